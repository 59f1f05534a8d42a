"""Boundary-data library: closed-form g with explicit extensions G.

Each scenario fixes Dirichlet data g on the rectangle boundary together with a
closed-form extension G of g to the whole plane (and its gradient), plus an
optional reference description of the expected vanishing-regularization limit:
the limit field, a reference jump segment, and its length.

Available scenarios:

* ``const(c)``   -- g = G = c; limit u = c, no jump.
* ``affine(a,b,c)`` -- g = G = a + b x + c y; limit u = g, no jump.
* ``crack(delta)`` -- g = G = tanh(y/delta) on [-1,1]^2; a mollified step that
  forces a straight horizontal jump in the limit.  Reference: u -> sign(y),
  jump segment (-1,1) x {0}, length 2.  delta is fixed independently of the
  regularization length, keeping g twice continuously differentiable on every
  side while making cracking strongly favored (the smooth competitor pays
  elastic energy of order 8/delta >> 2).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Grid


@dataclass(frozen=True)
class Reference:
    """Expected limit objects for a scenario, where known.

    u_limit_grad is the approximate (absolutely continuous) gradient of the
    limit field: identically zero for a piecewise-constant limit, jumps
    excluded.
    """

    u_limit: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    u_limit_grad: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None
    segment: tuple[float, float, float] | None = None  # (a, b, y_c)
    jump_length: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """Closed-form boundary data g, its extension G, and reference limit data."""

    name: str
    params: tuple[float, ...]
    extension: Callable[[np.ndarray, np.ndarray], np.ndarray]
    extension_grad: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    reference: Reference = field(default_factory=Reference)

    @property
    def ident(self) -> str:
        """Canonical 'name(p1,p2,...)' form used in configs and metadata."""
        inner = ",".join(format(p, "g") for p in self.params)
        return f"{self.name}({inner})"

    def G(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.extension(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def grad_G(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.extension_grad(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def g_field(self, grid: Grid) -> np.ndarray:
        """G sampled on all nodes; only the boundary ring acts as Dirichlet data."""
        X, Y = grid.meshgrid()
        return self.G(X, Y)


def make_scenario(name: str, *params: float) -> Scenario:
    """Build a scenario by name; raises ValueError for unknown names/bad params."""
    if name == "const":
        (c,) = params if params else (0.0,)

        def ext(x, y, c=c):
            return np.full(np.broadcast(x, y).shape, float(c))

        def ext_grad(x, y):
            z = np.zeros(np.broadcast(x, y).shape)
            return z, z.copy()

        ref = Reference(
            u_limit=lambda x, y, c=c: np.full(np.broadcast(x, y).shape, float(c)),
            u_limit_grad=ext_grad,
        )
        return Scenario("const", (float(c),), ext, ext_grad, ref)

    if name == "affine":
        if len(params) != 3:
            raise ValueError("affine scenario needs parameters (a, b, c)")
        a, b, c = (float(p) for p in params)

        def ext(x, y, a=a, b=b, c=c):
            return a + b * x + c * y

        def ext_grad(x, y, b=b, c=c):
            shape = np.broadcast(x, y).shape
            return np.full(shape, b), np.full(shape, c)

        ref = Reference(u_limit=ext, u_limit_grad=ext_grad)
        return Scenario("affine", (a, b, c), ext, ext_grad, ref)

    if name == "crack":
        (delta,) = params if params else (0.1,)
        delta = float(delta)
        if delta <= 0:
            raise ValueError(f"crack scenario needs delta > 0, got {delta}")

        def ext(x, y, d=delta):
            return np.tanh(np.asarray(y) / d) * np.ones_like(np.asarray(x, dtype=float))

        def ext_grad(x, y, d=delta):
            shape = np.broadcast(x, y).shape
            gy = 1.0 / (d * np.cosh(np.asarray(y) / d) ** 2) * np.ones(shape)
            return np.zeros(shape), gy

        def zero_grad(x, y):
            shape = np.broadcast(x, y).shape
            return np.zeros(shape), np.zeros(shape)

        ref = Reference(
            u_limit=lambda x, y: np.sign(y) * np.ones_like(np.asarray(x, dtype=float)),
            u_limit_grad=zero_grad,
            segment=(-1.0, 1.0, 0.0),
            jump_length=2.0,
        )
        return Scenario("crack", (delta,), ext, ext_grad, ref)

    raise ValueError(f"unknown scenario '{name}'")


_SCEN_RE = re.compile(r"^\s*([a-zA-Z_]+)\s*(?:\(([^)]*)\))?\s*$")


def parse_scenario(text: str) -> Scenario:
    """Parse 'name(p1,p2,...)' strings, e.g. 'crack(0.1)' or 'const(3)'."""
    m = _SCEN_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse scenario '{text}'")
    name = m.group(1)
    raw = m.group(2)
    params: tuple[float, ...] = ()
    if raw is not None and raw.strip():
        try:
            params = tuple(float(p) for p in raw.split(","))
        except ValueError as exc:
            raise ValueError(f"bad scenario parameters in '{text}'") from exc
    return make_scenario(name, *params)
