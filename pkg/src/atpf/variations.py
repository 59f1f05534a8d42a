"""Domain-deformation diagnostics: stress tensors, inner variations, varifold
first variation, duality-pairing residuals, defect-measure blocks and the
strip-averaged jump tensor.

All diagnostics contract cell tensors against a fixed catalog of closed-form
test vector fields

    X = ( (x1-x)(x-x0) p(x,y),  (y1-y)(y-y0) q(x,y) ),   p, q in {1, x, y},

which are exactly tangent to the rectangle boundary (X.n = 0, with equality at
machine precision since the normals are axis-aligned) and have exact Jacobians.
A degenerate all-zero entry is kept in the catalog for sanity checks.

Two cell tensors are provided.  `stress_tensor` is the reported diagnostic
form

    T = (eta+v^2)(2 grad u x grad u - |grad u|^2 Id)
        + 2 eps grad v x grad v - ((1-v)^2/eps + eps|grad v|^2) Id,

whose trace is identically -2 (1-v)^2 / eps per cell.  `eshelby_tensor`
replaces the isotropic weight (1-v)^2/eps by the potential energy density
(1-v)^2/(4 eps); this energy-consistent form is the one whose divergence
identity expresses stationarity under domain deformations, and it is what the
assembled inner variation, the strip estimate and the refinement studies use:
at a stationary state,

    sum_cells T_eshelby : DX h^2  =  2 (eta+1) * integral_boundary
                                     (d_nu u) (X . grad G) ds

up to discretization error, where G is the scenario's closed-form extension of
the boundary data.  The flow-based variant differentiates the energy directly
along the deformation path and equals (rhs - lhs) of the assembled identity up
to O(t^2 + h).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import ATState, discrete_at_energy, edge_coefficients
from .energetics import w_field
from .grid import (
    Grid,
    SIDES,
    boundary_integral,
    boundary_normal_derivative,
    boundary_normal_derivative_nodal,
    cell_average,
    cell_gradient,
    check_field,
    interp_bilinear,
)

Domain = tuple[float, float, float, float]

_POLY = {
    "1": (lambda x, y: np.ones(np.broadcast(x, y).shape), lambda x, y: 0.0, lambda x, y: 0.0),
    "x": (lambda x, y: x * np.ones_like(np.asarray(y, dtype=float)), lambda x, y: 1.0, lambda x, y: 0.0),
    "y": (lambda x, y: y * np.ones_like(np.asarray(x, dtype=float)), lambda x, y: 0.0, lambda x, y: 1.0),
}


@dataclass(frozen=True)
class TestVectorField:
    """Boundary-tangent polynomial test field with exact Jacobian."""

    name: str
    domain: Domain
    p: str  # "1" | "x" | "y" | "0"
    q: str

    def __call__(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.p == "0":
            z = np.zeros(np.broadcast(x, y).shape)
            return z, z.copy()
        x0, x1, y0, y1 = self.domain
        pv = _POLY[self.p][0](x, y)
        qv = _POLY[self.q][0](x, y)
        return (x1 - x) * (x - x0) * pv, (y1 - y) * (y - y0) * qv

    def jacobian(self, x, y) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(dX1/dx, dX1/dy, dX2/dx, dX2/dy) at the given points."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        if self.p == "0":
            z = np.zeros(shape)
            return z, z.copy(), z.copy(), z.copy()
        x0, x1, y0, y1 = self.domain
        pv, px, py = (f(x, y) for f in _POLY[self.p])
        qv, qx, qy = (f(x, y) for f in _POLY[self.q])
        bx = (x1 - x) * (x - x0)
        by = (y1 - y) * (y - y0)
        dbx = x0 + x1 - 2.0 * x
        dby = y0 + y1 - 2.0 * y
        d11 = dbx * pv + bx * px
        d12 = bx * py * np.ones(shape)
        d21 = by * qx * np.ones(shape)
        d22 = dby * qv + by * qy
        return d11, d12, d21, d22


def catalog(domain: Domain) -> list[TestVectorField]:
    """The nine polynomial test fields plus the degenerate zero entry."""
    fields = [
        TestVectorField(f"X[{p},{q}]", domain, p, q)
        for p in ("1", "x", "y")
        for q in ("1", "x", "y")
    ]
    fields.append(TestVectorField("X[0]", domain, "0", "0"))
    return fields


def _domain_of(grid: Grid) -> Domain:
    return (grid.x0, grid.x1, grid.y0, grid.y1)


def _require_catalog_field(grid: Grid, X: TestVectorField) -> None:
    if not isinstance(X, TestVectorField):
        raise ValueError("X is not a catalog test field")
    if any(abs(a - b) > 1e-12 for a, b in zip(X.domain, _domain_of(grid))):
        raise ValueError(f"test field domain {X.domain} does not match the grid")


def _cell_tensor(state: ATState, potential_scale: float) -> np.ndarray:
    """Shared tensor kernel, components stacked as (T11, T22, T12).

    v enters through its cell average; the potential weight uses the cell
    average of (1-v)^2 scaled by potential_scale/(4 eps).
    """
    grid, params = state.grid, state.params
    eps = params.eps
    gu = cell_gradient(grid, state.u)
    gv = cell_gradient(grid, state.v)
    vbar = cell_average(state.v)
    pot = cell_average((1.0 - state.v) ** 2) * (potential_scale / (4.0 * eps))
    coeff = params.eta + vbar ** 2
    u_sq = gu[:, :, 0] ** 2 + gu[:, :, 1] ** 2
    v_sq = gv[:, :, 0] ** 2 + gv[:, :, 1] ** 2

    t = np.empty(grid.cell_shape + (3,))
    iso = pot + eps * v_sq
    t[:, :, 0] = coeff * (2.0 * gu[:, :, 0] ** 2 - u_sq) + 2.0 * eps * gv[:, :, 0] ** 2 - iso
    t[:, :, 1] = coeff * (2.0 * gu[:, :, 1] ** 2 - u_sq) + 2.0 * eps * gv[:, :, 1] ** 2 - iso
    t[:, :, 2] = 2.0 * coeff * gu[:, :, 0] * gu[:, :, 1] + 2.0 * eps * gv[:, :, 0] * gv[:, :, 1]
    return t


def stress_tensor(state: ATState) -> np.ndarray:
    """Reported stress-energy tensor per cell, components (T11, T22, T12).

    Its trace is -2 (1-v)^2 / eps per cell exactly (the u-part and the
    eps |grad v|^2 contributions cancel in the trace).
    """
    return _cell_tensor(state, potential_scale=4.0)


def eshelby_tensor(state: ATState) -> np.ndarray:
    """Energy-consistent deformation tensor per cell, components (T11, T22, T12).

    Differs from `stress_tensor` only in the isotropic potential weight, which
    here is the energy density itself; this is the tensor that is
    divergence-free at stationary states and the one all inner-variation and
    strip diagnostics contract against.
    """
    return _cell_tensor(state, potential_scale=1.0)


def tensor_as_matrices(t: np.ndarray) -> np.ndarray:
    """Expand (..., 3) component stacks to (..., 2, 2) symmetric matrices."""
    m = np.empty(t.shape[:-1] + (2, 2))
    m[..., 0, 0] = t[..., 0]
    m[..., 1, 1] = t[..., 1]
    m[..., 0, 1] = t[..., 2]
    m[..., 1, 0] = t[..., 2]
    return m


def _contract_cells(grid: Grid, t: np.ndarray, X: TestVectorField) -> float:
    """sum_cells T : DX h^2 with DX evaluated at cell centers."""
    Xc, Yc = grid.cell_centers()
    d11, d12, d21, d22 = X.jacobian(Xc, Yc)
    integrand = t[:, :, 0] * d11 + t[:, :, 1] * d22 + t[:, :, 2] * (d12 + d21)
    return float(np.sum(integrand) * grid.h ** 2)


@dataclass(frozen=True)
class InnerVariation:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def inner_variation_assembled(state: ATState, X: TestVectorField) -> InnerVariation:
    """Volume and boundary sides of the stationarity identity under deformation.

    lhs contracts the energy-consistent cell tensor against DX; rhs is
    2 (eta+1) times the boundary trapezoid of (d_nu u)(X . grad G) using the
    scenario's closed-form extension G.  At a stationary, well-resolved state
    the two agree; their gap is the discretization residual.
    """
    grid = state.grid
    _require_catalog_field(grid, X)
    if state.scenario is None:
        raise ValueError("state has no scenario; the boundary term needs grad G")
    t = eshelby_tensor(state)
    lhs = _contract_cells(grid, t, X)

    dnu = boundary_normal_derivative(grid, state.u)
    xs, ys = grid.xs, grid.ys
    side_coords = {
        "left": (np.full(grid.ny, grid.x0), ys),
        "right": (np.full(grid.ny, grid.x1), ys),
        "bottom": (xs, np.full(grid.nx, grid.y0)),
        "top": (xs, np.full(grid.nx, grid.y1)),
    }
    samples = {}
    for side in SIDES:
        sx, sy = side_coords[side]
        X1, X2 = X(sx, sy)
        gx, gy = state.scenario.grad_G(sx, sy)
        samples[side] = dnu[side] * (X1 * gx + X2 * gy)
    rhs = 2.0 * (state.params.eta + 1.0) * boundary_integral(grid, samples)
    return InnerVariation(lhs=lhs, rhs=rhs)


def _rk4_flow(X: TestVectorField, x: np.ndarray, y: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    k1x, k1y = X(x, y)
    k2x, k2y = X(x + 0.5 * t * k1x, y + 0.5 * t * k1y)
    k3x, k3y = X(x + 0.5 * t * k2x, y + 0.5 * t * k2y)
    k4x, k4y = X(x + t * k3x, y + t * k3y)
    return (x + (t / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x),
            y + (t / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y))


def inner_variation_flow(state: ATState, X: TestVectorField, t: float | None = None) -> float:
    """Central-difference derivative of the energy along the deformation flow.

    The configuration is transported as (u o F_{-s} - G o F_{-s} + G,
    v o F_{-s}) for s = +-t, with F the flow of X integrated by one RK4 step
    and field composition by bilinear interpolation; boundary values are
    re-imposed exactly (the flow maps each side to itself, so this matches the
    continuum transport).  The default step is t = h: the O(t^4) flow error is
    negligible against the O(t^2) differencing error.
    """
    grid = state.grid
    _require_catalog_field(grid, X)
    if state.scenario is None:
        raise ValueError("state has no scenario; transport needs the extension G")
    if t is None:
        t = grid.h
    Xn, Yn = grid.meshgrid()
    g = state.scenario.g_field(grid)
    G0 = state.scenario.G(Xn, Yn)

    def transported_energy(s: float) -> float:
        # configuration at path parameter s uses the backward flow F_{-s}
        px, py = _rk4_flow(X, Xn, Yn, -s)
        u_s = (interp_bilinear(grid, state.u, px, py, tol_factor=1e-6)
               - state.scenario.G(px, py) + G0)
        v_s = interp_bilinear(grid, state.v, px, py, tol_factor=1e-6)
        u_s[0, :], u_s[-1, :], u_s[:, 0], u_s[:, -1] = g[0, :], g[-1, :], g[:, 0], g[:, -1]
        v_s[0, :] = v_s[-1, :] = 1.0
        v_s[:, 0] = v_s[:, -1] = 1.0
        moved = ATState(grid, state.params, u_s, v_s, state.scenario)
        return discrete_at_energy(moved).total

    return (transported_energy(t) - transported_energy(-t)) / (2.0 * t)


def varifold_first_variation(state: ATState, X: TestVectorField,
                             threshold_factor: float = 1e-12) -> float:
    """First variation of the line measure built from w = v - v^2/2.

    sum over cells with |grad w| above threshold of
    (Id - n x n) : DX |grad w| h^2, n = grad w / |grad w|; the relative
    threshold avoids 0/0 without biasing the mass.
    """
    grid = state.grid
    _require_catalog_field(grid, X)
    gw = cell_gradient(grid, w_field(state.v))
    mag = np.hypot(gw[:, :, 0], gw[:, :, 1])
    theta = threshold_factor * float(mag.max()) if mag.max() > 0 else np.inf
    mask = mag >= theta
    if not np.any(mask):
        return 0.0
    Xc, Yc = grid.cell_centers()
    d11, d12, d21, d22 = X.jacobian(Xc, Yc)
    nx = np.where(mask, gw[:, :, 0] / np.where(mask, mag, 1.0), 0.0)
    ny = np.where(mask, gw[:, :, 1] / np.where(mask, mag, 1.0), 0.0)
    # (Id - n x n) : DX = (1 - nx^2) d11 + (1 - ny^2) d22 - nx ny (d12 + d21)
    integrand = (1.0 - nx ** 2) * d11 + (1.0 - ny ** 2) * d22 - nx * ny * (d12 + d21)
    return float(np.sum(np.where(mask, integrand * mag, 0.0)) * grid.h ** 2)


def ms_inner_variation_reference(segment: tuple[float, float, float], X: TestVectorField,
                                 n_quad: int = 8) -> float:
    """Deformation derivative of the length of a horizontal segment.

    For a piecewise-constant limit field with a straight horizontal jump, all
    volume and boundary contributions vanish and the full first variation
    reduces to the tangential divergence integral_a^b dX1/dx (x, y_c) dx,
    computed by Gauss-Legendre quadrature (exact here: the integrand is a
    polynomial of degree <= 3).
    """
    a, b, y_c = segment
    x0, x1, y0, y1 = X.domain
    if not (x0 - 1e-12 <= a <= b <= x1 + 1e-12 and y0 - 1e-12 <= y_c <= y1 + 1e-12):
        raise ValueError(f"segment {segment} is outside the domain {X.domain}")
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    xq = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    d11, _, _, _ = X.jacobian(xq, np.full_like(xq, y_c))
    return float(0.5 * (b - a) * np.sum(weights * d11))


def anzellotti_residual(state: ATState, phi: np.ndarray) -> float:
    """Duality-pairing residual probing the weak no-flux condition.

    I(phi) = sum_cells (eta + vbar^2) [ |grad u|^2 phibar
                                        + ubar (grad u . grad phi) ] h^2,
    which vanishes identically at continuum stationary states (test the flux
    equation with u*phi); the discrete value measures the stationarity and
    quadrature gap and probes whether a concentration defect obstructs the
    weak no-flux condition on the jump.  phi must vanish on the boundary.
    """
    grid = state.grid
    phi = check_field(grid, phi)
    bmask = grid.boundary_mask()
    if np.max(np.abs(phi[bmask])) > 0.0:
        raise ValueError("phi must vanish at every boundary node")
    gu = cell_gradient(grid, state.u)
    gphi = cell_gradient(grid, phi)
    coeff = state.params.eta + cell_average(state.v) ** 2
    u_sq = gu[:, :, 0] ** 2 + gu[:, :, 1] ** 2
    dot = gu[:, :, 0] * gphi[:, :, 0] + gu[:, :, 1] * gphi[:, :, 1]
    integrand = coeff * (u_sq * cell_average(phi) + cell_average(state.u) * dot)
    return float(np.sum(integrand) * grid.h ** 2)


def anzellotti_test_functions(grid: Grid) -> dict[str, np.ndarray]:
    """Polynomial bump test functions vanishing on the boundary ring."""
    X, Y = grid.meshgrid()
    bump = (grid.x1 - X) * (X - grid.x0) * (grid.y1 - Y) * (Y - grid.y0)
    out = {"phi[1]": bump, "phi[x]": bump * X, "phi[y]": bump * Y}
    for a in out.values():  # kill round-off on the ring so the contract is exact
        a[0, :] = a[-1, :] = 0.0
        a[:, 0] = a[:, -1] = 0.0
    return out


@dataclass
class MuBlocks:
    """Coarse block sums of the weighted gradient tensor measure.

    blocks[i, j] holds sum over the block's cells of
    (eta + vbar^2) grad u x grad u h^2 as (m11, m22, m12); reference_blocks
    holds the same sums for a supplied reference gradient, so their difference
    localizes any concentration excess.
    """

    blocks: np.ndarray                    # (K, K, 3)
    reference_blocks: np.ndarray | None   # (K, K, 3) or None
    x_edges: np.ndarray                   # (K+1,) physical block boundaries
    y_edges: np.ndarray

    def as_matrices(self) -> np.ndarray:
        return tensor_as_matrices(self.blocks)

    def frobenius(self) -> np.ndarray:
        b = self.blocks
        return np.sqrt(b[:, :, 0] ** 2 + b[:, :, 1] ** 2 + 2.0 * b[:, :, 2] ** 2)


def mu_blocks(state: ATState, K: int,
              reference_gradient: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None
              ) -> MuBlocks:
    """K x K block sums of (eta + vbar^2) grad u x grad u over cells.

    Blocks partition the cell grid into K columns and K rows of floor size,
    with the last block in each direction absorbing the remainder.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    grid = state.grid
    ncy, ncx = grid.cell_shape
    K = min(K, ncx, ncy)
    gu = cell_gradient(grid, state.u)
    coeff = state.params.eta + cell_average(state.v) ** 2
    dens = np.stack([coeff * gu[:, :, 0] ** 2,
                     coeff * gu[:, :, 1] ** 2,
                     coeff * gu[:, :, 0] * gu[:, :, 1]], axis=-1) * grid.h ** 2

    ix = np.arange(K + 1) * (ncx // K)
    iy = np.arange(K + 1) * (ncy // K)
    ix[-1], iy[-1] = ncx, ncy

    def block_sums(d: np.ndarray) -> np.ndarray:
        out = np.empty((K, K, 3))
        for bj in range(K):
            for bi in range(K):
                out[bj, bi] = d[iy[bj]:iy[bj + 1], ix[bi]:ix[bi + 1]].sum(axis=(0, 1))
        return out

    ref = None
    if reference_gradient is not None:
        Xc, Yc = grid.cell_centers()
        rx, ry = reference_gradient(Xc, Yc)
        rdens = np.stack([rx ** 2, ry ** 2, rx * ry], axis=-1) * grid.h ** 2
        ref = block_sums(rdens)

    return MuBlocks(
        blocks=block_sums(dens),
        reference_blocks=ref,
        x_edges=grid.x0 + grid.h * ix.astype(float),
        y_edges=grid.y0 + grid.h * iy.astype(float),
    )


def theta_strip_estimate(state: ATState, strip_halfwidth: float, tip_margin: float,
                         segment: tuple[float, float, float] | None = None) -> np.ndarray:
    """Strip-averaged jump-tensor estimate around a horizontal reference segment.

    Theta_hat = -(1/L_eff) * sum of the energy-consistent cell tensor times
    h^2 over cells with |y - y_c| <= strip_halfwidth and
    a + tip_margin <= x <= b - tip_margin.  For a horizontal jump the expected
    limit is diag(1, 0), the tangential projector.
    """
    grid = state.grid
    if segment is None:
        if state.scenario is None or state.scenario.reference.segment is None:
            raise ValueError("no reference segment available for the strip estimate")
        segment = state.scenario.reference.segment
    a, b, y_c = segment
    lo, hi = a + tip_margin, b - tip_margin
    if hi <= lo:
        raise ValueError("tip margins leave no segment")
    if y_c - strip_halfwidth < grid.y0 - 1e-12 or y_c + strip_halfwidth > grid.y1 + 1e-12:
        raise ValueError("strip exits the domain")
    Xc, Yc = grid.cell_centers()
    mask = (np.abs(Yc - y_c) <= strip_halfwidth) & (Xc >= lo) & (Xc <= hi)
    t = eshelby_tensor(state)
    comp = -(t * mask[:, :, None]).sum(axis=(0, 1)) * grid.h ** 2 / (hi - lo)
    return np.array([[comp[0], comp[2]], [comp[2], comp[1]]])


def boundary_energy_integrand(state: ATState) -> tuple[dict[str, np.ndarray], float]:
    """Per-node samples of |d_nu u|^2 + eps |d_nu v|^2 along each side.

    Corner entries are the average of the two adjacent sides.  Also returns
    the boundary trapezoid integral of the samples (the total mass of the
    boundary flux-energy surrogate at this regularization level).
    """
    grid = state.grid
    du = boundary_normal_derivative_nodal(grid, state.u)
    dv = boundary_normal_derivative_nodal(grid, state.v)
    samples = {s: du[s] ** 2 + state.params.eps * dv[s] ** 2 for s in SIDES}
    return samples, boundary_integral(grid, samples)


@dataclass
class DiagnosticsReport:
    """All deformation diagnostics of one state, keyed for serialization."""

    fields: dict[str, dict[str, float]] = field(default_factory=dict)
    anzellotti: dict[str, float] = field(default_factory=dict)
    boundary_integrand: dict[str, list[float]] = field(default_factory=dict)
    boundary_total: float = 0.0
    mu: dict | None = None
    theta: dict | None = None

    def as_dict(self) -> dict:
        return {
            "fields": self.fields,
            "anzellotti": self.anzellotti,
            "boundary_integrand": self.boundary_integrand,
            "boundary_total": self.boundary_total,
            "mu": self.mu,
            "theta": self.theta,
        }


ALL_DIAGNOSTICS = ("inner_variation", "flow", "varifold", "anzellotti", "boundary", "mu", "theta")


def diagnostics_report(state: ATState, toggles: set[str] | None = None,
                       mu_k: int = 8, theta_widths: tuple[float, float] | None = None) -> DiagnosticsReport:
    """Run the requested diagnostics (all by default) over the field catalog."""
    on = set(ALL_DIAGNOSTICS) if toggles is None else set(toggles)
    unknown = on - set(ALL_DIAGNOSTICS)
    if unknown:
        raise ValueError(f"unknown diagnostics: {sorted(unknown)}")
    grid = state.grid
    rep = DiagnosticsReport()

    cat = catalog(_domain_of(grid))
    for X in cat:
        entry: dict[str, float] = {}
        if "inner_variation" in on and state.scenario is not None:
            iv = inner_variation_assembled(state, X)
            entry.update(assembled_lhs=iv.lhs, boundary_rhs=iv.rhs, residual=iv.residual)
        if "flow" in on and state.scenario is not None:
            entry["flow"] = inner_variation_flow(state, X)
        if "varifold" in on:
            entry["varifold"] = varifold_first_variation(state, X)
        if entry:
            rep.fields[X.name] = entry

    if "anzellotti" in on:
        rep.anzellotti = {
            name: anzellotti_residual(state, phi)
            for name, phi in anzellotti_test_functions(grid).items()
        }
    if "boundary" in on:
        samples, total = boundary_energy_integrand(state)
        rep.boundary_integrand = {s: a.tolist() for s, a in samples.items()}
        rep.boundary_total = total
    if "mu" in on:
        ref = None
        if state.scenario is not None:
            ref = state.scenario.reference.u_limit_grad
        mb = mu_blocks(state, mu_k, reference_gradient=ref)
        rep.mu = {
            "blocks": mb.blocks.tolist(),
            "reference_blocks": None if mb.reference_blocks is None else mb.reference_blocks.tolist(),
            "x_edges": mb.x_edges.tolist(),
            "y_edges": mb.y_edges.tolist(),
        }
    if "theta" in on and state.scenario is not None and state.scenario.reference.segment is not None:
        eps = state.params.eps
        hw, tm = theta_widths if theta_widths is not None else (10.0 * eps, 10.0 * eps)
        theta = theta_strip_estimate(state, hw, tm)
        rep.theta = {"matrix": theta.tolist(), "strip_halfwidth": hw, "tip_margin": tm}
    return rep
