"""One discrete elliptic-regularized energy and its two exact partial gradients.

The discrete energy of a configuration (u, v) with regularization length eps
and ellipticity floor eta is

    E(u, v) = sum_edges  a_e (du_e/h)^2 w_e                    (elastic)
            + eps * sum_edges (dv_e/h)^2 w_e                   (field gradient)
            + sum_nodes (1 - v_p)^2 / (4 eps) * omega_p        (potential)

with edge coefficient a_e = eta + (v_p^2 + v_q^2)/2 (arithmetic mean of the
endpoint values of eta + v^2), edge weights w_e = h^2 halved on edges lying
inside the boundary, and trapezoid node weights omega_p.  Both linear systems
below are exactly one half of the partial gradients of E, so alternating exact
minimizations decrease E monotonically:

* u-system: variable-coefficient 5-point scheme  sum_e a_e (u_p - u_q) = 0,
  Dirichlet data folded into the right-hand side;
* v-system: eps * (5-point Laplacian) + diagonal [omega_p/(4 eps) + s_p] with
  s_p = sum_{e owns p} (du_e/h)^2 w_e / 2, right-hand side omega_p/(4 eps)
  plus the fold-in of v = 1 on the boundary.

Both matrices are symmetric M-matrices (positive diagonal, non-positive
off-diagonal, weakly diagonally dominant), which yields the discrete maximum
principles min g <= u <= max g and 0 <= v <= 1 for the exact solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .grid import Grid, cell_gradient, check_field, hedge_weights, nodal_weights, vedge_weights
from .scenarios import Scenario


@dataclass(frozen=True)
class ATParams:
    """Regularization length eps and ellipticity parameter eta, 0 < eta <= eps."""

    eps: float
    eta: float

    def __post_init__(self):
        if not (self.eps > 0):
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not (0 < self.eta <= self.eps):
            raise ValueError(f"need 0 < eta <= eps, got eta={self.eta}, eps={self.eps}")

    @classmethod
    def with_default_eta(cls, eps: float) -> "ATParams":
        """Default coupling eta = eps^4 (clamped to eps).

        The ellipticity floor only needs eta << eps; keeping it this far below
        eps makes the residual conductivity across fully developed transition
        layers energetically negligible at desk-scale eps, which coarser rules
        like eps^2 do not.
        """
        return cls(eps=eps, eta=min(eps ** 4, eps))


@dataclass
class ATState:
    """One admissible discrete configuration (u, v) with its boundary data.

    Invariants: u equals the scenario data g and v equals 1 at boundary nodes;
    after a converged solve additionally 0 <= v <= 1 and min g <= u <= max g
    everywhere (discrete maximum principles).
    """

    grid: Grid
    params: ATParams
    u: np.ndarray
    v: np.ndarray
    scenario: Scenario | None = None

    def __post_init__(self):
        self.u = check_field(self.grid, self.u)
        self.v = check_field(self.grid, self.v)

    def check_admissible(self, tol: float = 0.0) -> None:
        """Verify the boundary conditions; tol=0 demands exact equality."""
        b = self.grid.boundary_mask()
        if np.max(np.abs(self.v[b] - 1.0)) > tol:
            raise ValueError("v != 1 on the boundary")
        if self.scenario is not None:
            g = self.scenario.g_field(self.grid)
            if np.max(np.abs(self.u[b] - g[b])) > tol:
                raise ValueError("u != g on the boundary")

    def copy(self) -> "ATState":
        return ATState(self.grid, self.params, self.u.copy(), self.v.copy(), self.scenario)


class EnergySplit(NamedTuple):
    elastic: float
    pf_grad: float
    pf_pot: float
    total: float


def edge_coefficients(grid: Grid, params: ATParams, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elastic conductivities a_e on horizontal and vertical edges."""
    v2 = v * v
    ah = params.eta + 0.5 * (v2[:, :-1] + v2[:, 1:])
    av = params.eta + 0.5 * (v2[:-1, :] + v2[1:, :])
    return ah, av


def discrete_at_energy(state: ATState) -> EnergySplit:
    """The split discrete energy (elastic, field gradient, potential, total)."""
    grid, params = state.grid, state.params
    u, v = state.u, state.v
    h = grid.h
    wh, wv = hedge_weights(grid), vedge_weights(grid)
    ah, av = edge_coefficients(grid, params, v)

    du_h = (u[:, 1:] - u[:, :-1]) / h
    du_v = (u[1:, :] - u[:-1, :]) / h
    e_el = float(np.sum(ah * du_h ** 2 * wh) + np.sum(av * du_v ** 2 * wv))

    dv_h = (v[:, 1:] - v[:, :-1]) / h
    dv_v = (v[1:, :] - v[:-1, :]) / h
    e_grad = params.eps * float(np.sum(dv_h ** 2 * wh) + np.sum(dv_v ** 2 * wv))

    e_pot = float(np.sum((1.0 - v) ** 2 * nodal_weights(grid)) / (4.0 * params.eps))
    return EnergySplit(e_el, e_grad, e_pot, e_el + e_grad + e_pot)


@dataclass
class SparseSystem:
    """SPD system over interior nodes in row-major interior ordering."""

    matrix: sp.csr_matrix
    rhs: np.ndarray

    @property
    def n(self) -> int:
        return self.rhs.size


def interior(f: np.ndarray) -> np.ndarray:
    """Interior values of a nodal field, flattened row-major."""
    return f[1:-1, 1:-1].ravel()


def scatter_interior(grid: Grid, x: np.ndarray, boundary_field: np.ndarray) -> np.ndarray:
    """Full nodal field with interior values x and boundary row from boundary_field."""
    f = boundary_field.copy()
    f[1:-1, 1:-1] = x.reshape(grid.ny - 2, grid.nx - 2)
    return f


def _five_point(grid: Grid, a_w, a_e, a_s, a_n, diag_extra=None) -> sp.csr_matrix:
    """CSR matrix of  sum_dir a_dir (x_p - x_q) + diag_extra x_p  over interior nodes."""
    inx, iny = grid.nx - 2, grid.ny - 2
    n = inx * iny
    idx = np.arange(n).reshape(iny, inx)
    diag = (a_w + a_e + a_s + a_n).ravel()
    if diag_extra is not None:
        diag = diag + diag_extra.ravel()

    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag]
    # west/east couplings exist for interior-column neighbors, etc.
    rows.append(idx[:, 1:].ravel()); cols.append(idx[:, :-1].ravel()); vals.append(-a_w[:, 1:].ravel())
    rows.append(idx[:, :-1].ravel()); cols.append(idx[:, 1:].ravel()); vals.append(-a_e[:, :-1].ravel())
    rows.append(idx[1:, :].ravel()); cols.append(idx[:-1, :].ravel()); vals.append(-a_s[1:, :].ravel())
    rows.append(idx[:-1, :].ravel()); cols.append(idx[1:, :].ravel()); vals.append(-a_n[:-1, :].ravel())

    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return m.tocsr()


def assemble_u_system(grid: Grid, params: ATParams, v: np.ndarray, g: np.ndarray) -> SparseSystem:
    """Stationarity of the energy in u at fixed v.

    g is a full nodal field whose boundary ring provides the Dirichlet data
    (interior entries are ignored).
    """
    v = check_field(grid, v)
    g = check_field(grid, g)
    ah, av = edge_coefficients(grid, params, v)
    # couplings of each interior node (j=1..ny-2, i=1..nx-2) to its neighbors
    a_w = ah[1:-1, :-1]
    a_e = ah[1:-1, 1:]
    a_s = av[:-1, 1:-1]
    a_n = av[1:, 1:-1]
    mat = _five_point(grid, a_w, a_e, a_s, a_n)

    rhs = np.zeros((grid.ny - 2, grid.nx - 2))
    rhs[:, 0] += a_w[:, 0] * g[1:-1, 0]
    rhs[:, -1] += a_e[:, -1] * g[1:-1, -1]
    rhs[0, :] += a_s[0, :] * g[0, 1:-1]
    rhs[-1, :] += a_n[-1, :] * g[-1, 1:-1]
    return SparseSystem(mat, rhs.ravel())


def elastic_node_load(grid: Grid, u: np.ndarray) -> np.ndarray:
    """s_p = sum over edges owning node p of (du_e/h)^2 w_e / 2, shaped (ny, nx).

    Defined so that sum_p s_p v_p^2 plus the eta part reproduces the elastic
    energy for every v; the v-subproblem couples to u only through s_p.
    """
    u = check_field(grid, u)
    h = grid.h
    qh = ((u[:, 1:] - u[:, :-1]) / h) ** 2 * hedge_weights(grid)
    qv = ((u[1:, :] - u[:-1, :]) / h) ** 2 * vedge_weights(grid)
    s = np.zeros(grid.shape)
    s[:, :-1] += 0.5 * qh
    s[:, 1:] += 0.5 * qh
    s[:-1, :] += 0.5 * qv
    s[1:, :] += 0.5 * qv
    return s


def assemble_v_system(grid: Grid, params: ATParams, u: np.ndarray) -> SparseSystem:
    """Stationarity of the energy in v at fixed u.

    The potential is quadratic in v, so the subproblem is linear; the diagonal
    couples to u through s_p, keeping the quadratic form equal to the elastic
    energy term for every v.
    """
    eps = params.eps
    s = elastic_node_load(grid, u)

    ones = np.ones((grid.ny - 2, grid.nx - 2))
    a_dir = eps * ones
    omega = nodal_weights(grid)[1:-1, 1:-1]
    diag_extra = omega / (4.0 * eps) + s[1:-1, 1:-1]
    mat = _five_point(grid, a_dir, a_dir, a_dir, a_dir, diag_extra=diag_extra)

    rhs = omega / (4.0 * eps)
    # Dirichlet fold-in of v = 1 along the boundary ring
    rhs = rhs.copy()
    rhs[:, 0] += eps
    rhs[:, -1] += eps
    rhs[0, :] += eps
    rhs[-1, :] += eps
    return SparseSystem(mat, rhs.ravel())


class CGResult(NamedTuple):
    x: np.ndarray
    iterations: int
    relative_residual: float
    converged: bool


def cg_solve(system: SparseSystem, x0: np.ndarray | None = None,
             rel_tol: float = 1e-12, max_iter: int | None = None) -> CGResult:
    """Jacobi-preconditioned conjugate gradients.

    Stops when ||r|| <= rel_tol * ||b|| (absolute when b = 0).  Reductions are
    plain numpy dot products in a fixed order, so results are deterministic
    for a fixed build.  Hitting max_iter is reported, not raised.
    """
    A, b = system.matrix, system.rhs
    n = b.size
    if max_iter is None:
        max_iter = max(1000, 20 * n)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    dinv = 1.0 / A.diagonal()
    bnorm = float(np.linalg.norm(b))
    target = rel_tol * bnorm if bnorm > 0 else rel_tol
    scale = bnorm if bnorm > 0 else 1.0

    r = b - A @ x
    rnorm = float(np.linalg.norm(r))
    if rnorm <= target:
        return CGResult(x, 0, rnorm / scale, True)
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rnorm = float(np.linalg.norm(r))
        if rnorm <= target:
            return CGResult(x, k, rnorm / scale, True)
        z = dinv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return CGResult(x, max_iter, rnorm / scale, False)


def pde_residuals(state: ATState) -> tuple[float, float]:
    """Relative algebraic residuals of the two systems at the current (u, v)."""
    grid, params = state.grid, state.params
    su = assemble_u_system(grid, params, state.v, state.u)
    sv = assemble_v_system(grid, params, state.u)
    r_u = _relative_residual(su, interior(state.u))
    r_v = _relative_residual(sv, interior(state.v))
    return r_u, r_v


def _relative_residual(system: SparseSystem, x: np.ndarray) -> float:
    r = system.matrix @ x - system.rhs
    bnorm = float(np.linalg.norm(system.rhs))
    rnorm = float(np.linalg.norm(r))
    return rnorm / bnorm if bnorm > 0 else rnorm
