"""Alternate minimization at fixed eps and eps-continuation with warm starts.

The energy is separately quadratic in u and in v, and each half-step of a
sweep solves its subproblem by warm-started conjugate gradients, which can
only decrease the shared discrete energy.  Convergence requires both energy
stagnation and small algebraic residuals of the coupled system: energy alone
can stall on plateaus, while the residuals certify stationarity of the
(non-convex) coupled problem.  Different seeds for v may land on different
stationary configurations; runs are recorded as found, never de-duplicated.

Continuation walks a strictly decreasing list of eps values, refining the mesh
as h = eps / ratio and transferring (u, v) to the next grid by bilinear
interpolation with the boundary data re-imposed, so each stage starts inside
the basin selected by the previous one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    ATParams,
    ATState,
    SparseSystem,
    assemble_u_system,
    assemble_v_system,
    cg_solve,
    discrete_at_energy,
    interior,
    pde_residuals,
    scatter_interior,
)
from .energetics import EnergyReport, energy_report
from .grid import Grid, GridSpec, interp_bilinear, make_grid
from .scenarios import Scenario


@dataclass
class SweepRecord:
    sweep: int
    e_total: float
    e_drop: float
    r_u: float
    r_v: float
    cg_iters_u: int
    cg_iters_v: int


@dataclass
class IterationLog:
    """Per-sweep history of one alternate-minimization run."""

    records: list[SweepRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def sweeps(self) -> int:
        return len(self.records)

    def energies(self) -> np.ndarray:
        return np.array([r.e_total for r in self.records])


def init_state(scenario: Scenario, grid: Grid, params: ATParams,
               v_seed: np.ndarray | None = None, cg_tol: float = 1e-12) -> ATState:
    """Initial admissible state: v = 1 (or a seed) and u solving its subproblem.

    With v = 1 this is the harmonic-type extension of the boundary data; a
    supplied v seed (clipped to [0,1], reset to 1 on the boundary) selects a
    different basin.
    """
    g = scenario.g_field(grid)
    if v_seed is None:
        v = np.ones(grid.shape)
    else:
        v = np.clip(np.asarray(v_seed, dtype=float), 0.0, 1.0)
        v[0, :] = v[-1, :] = 1.0
        v[:, 0] = v[:, -1] = 1.0
    sys_u = assemble_u_system(grid, params, v, g)
    res = cg_solve(sys_u, x0=interior(g), rel_tol=cg_tol)
    u = scatter_interior(grid, res.x, g)
    return ATState(grid, params, u, v, scenario)


def offset_profile_seed(grid: Grid, eps: float, y_c: float = 0.0) -> np.ndarray:
    """Transition-profile seed centered half a cell off the line y = y_c.

    Alternate minimization preserves any mirror symmetry of its initial data,
    so symmetric data whose symmetry line falls on a node row rides a
    node-centered stationary configuration; the generic (and lower-energy)
    configuration centers the transition on a cell edge instead.  Seeding v
    with this field selects that basin; the choice of branch is a recorded
    property of a run, not a contract.
    """
    _, Y = grid.meshgrid()
    return 1.0 - np.exp(-np.abs(Y - (y_c + 0.5 * grid.h)) / (2.0 * eps))


def alternate_minimize(state0: ATState, rel_energy_tol: float = 1e-8,
                       residual_tol: float = 1e-7, max_sweeps: int = 500,
                       cg_tol: float = 1e-12) -> tuple[ATState, IterationLog]:
    """Alternating exact minimizations in u and v until stationarity.

    Stops when the energy drop over one sweep is below rel_energy_tol times
    the energy AND both relative residuals are below residual_tol.  Reaching
    max_sweeps returns the current state flagged non-converged.
    """
    state = state0.copy()
    grid, params = state.grid, state.params
    if state.scenario is None:
        raise ValueError("state has no scenario (boundary data) attached")
    g = state.scenario.g_field(grid)

    log = IterationLog()
    e_prev = discrete_at_energy(state).total
    for sweep in range(1, max_sweeps + 1):
        sys_u = assemble_u_system(grid, params, state.v, g)
        res_u = cg_solve(sys_u, x0=interior(state.u), rel_tol=cg_tol)
        state.u = scatter_interior(grid, res_u.x, g)

        sys_v = assemble_v_system(grid, params, state.u)
        res_v = cg_solve(sys_v, x0=interior(state.v), rel_tol=cg_tol)
        vb = np.ones(grid.shape)
        state.v = scatter_interior(grid, res_v.x, vb)

        e_now = discrete_at_energy(state).total
        r_u, r_v = pde_residuals(state)
        log.records.append(SweepRecord(sweep, e_now, e_prev - e_now, r_u, r_v,
                                       res_u.iterations, res_v.iterations))
        stalled = abs(e_prev - e_now) <= rel_energy_tol * max(e_prev, e_now)
        stationary = max(r_u, r_v) <= residual_tol
        e_prev = e_now
        if stalled and stationary:
            log.converged = True
            break
    return state, log


def _eta_for(eps: float, eta_rule: str | float) -> float:
    if isinstance(eta_rule, (int, float)):
        return float(eta_rule)
    if eta_rule in ("eps^2", "eps2", "eps*eps"):
        return eps * eps
    if eta_rule in ("eps^3", "eps3"):
        return eps ** 3
    if eta_rule in ("eps^4", "eps4"):
        return eps ** 4
    raise ValueError(f"unknown eta rule '{eta_rule}'")


@dataclass(frozen=True)
class ContinuationSchedule:
    """Strictly decreasing eps values with mesh and eta rules.

    The mesh rule is h = eps / mesh_ratio with mesh_ratio >= 2, so every stage
    resolves its own transition width.  The default eta rule eps^4 keeps the
    ellipticity floor far enough below eps that transition layers carry no
    spurious conductivity; eps^2 and eps^3 remain selectable.
    """

    eps_list: tuple[float, ...]
    mesh_ratio: float = 4.0
    eta_rule: str | float = "eps^4"
    rel_energy_tol: float = 1e-8
    residual_tol: float = 1e-7
    max_sweeps: int = 500
    cg_tol: float = 1e-12

    def __post_init__(self):
        if len(self.eps_list) == 0:
            raise ValueError("empty eps schedule")
        eps = np.asarray(self.eps_list)
        if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ValueError("eps values must be positive and strictly decreasing")
        if self.mesh_ratio < 2:
            raise ValueError("mesh_ratio must be at least 2 (h <= eps/2)")

    def params_for(self, eps: float) -> ATParams:
        return ATParams(eps=eps, eta=_eta_for(eps, self.eta_rule))

    def grid_for(self, eps: float, domain: tuple[float, float, float, float]) -> Grid:
        x0, x1, y0, y1 = domain
        h = eps / self.mesh_ratio
        nx = int(round((x1 - x0) / h)) + 1
        ny = int(round((y1 - y0) / h)) + 1
        return make_grid(GridSpec(max(nx, 3), max(ny, 3), x0, x1, y0, y1))


@dataclass
class StageResult:
    state: ATState
    report: EnergyReport
    log: IterationLog


def warm_start(state: ATState, grid: Grid, params: ATParams) -> ATState:
    """Transfer (u, v) to a new grid by bilinear interpolation.

    Boundary data is re-imposed exactly after interpolation; bilinear transfer
    preserves the [0, 1] range of v.
    """
    scen = state.scenario
    X, Y = grid.meshgrid()
    u = interp_bilinear(state.grid, state.u, X, Y)
    v = interp_bilinear(state.grid, state.v, X, Y)
    if scen is not None:
        g = scen.g_field(grid)
        u[0, :], u[-1, :], u[:, 0], u[:, -1] = g[0, :], g[-1, :], g[:, 0], g[:, -1]
    v[0, :] = v[-1, :] = 1.0
    v[:, 0] = v[:, -1] = 1.0
    return ATState(grid, params, u, v, scen)


def continuation_run(schedule: ContinuationSchedule, scenario: Scenario,
                     domain: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0),
                     v_seed: np.ndarray | None = None) -> list[StageResult]:
    """Run the eps schedule with warm starts; non-converged stages are kept.

    Returns one StageResult per eps, in schedule order.
    """
    results: list[StageResult] = []
    prev: ATState | None = None
    for eps in schedule.eps_list:
        params = schedule.params_for(eps)
        grid = schedule.grid_for(eps, domain)
        if prev is None:
            state0 = init_state(scenario, grid, params, v_seed=v_seed, cg_tol=schedule.cg_tol)
        else:
            state0 = warm_start(prev, grid, params)
        state, log = alternate_minimize(
            state0,
            rel_energy_tol=schedule.rel_energy_tol,
            residual_tol=schedule.residual_tol,
            max_sweeps=schedule.max_sweeps,
            cg_tol=schedule.cg_tol,
        )
        last = log.records[-1]
        report = energy_report(state, sweeps=log.sweeps, residuals=(last.r_u, last.r_v))
        results.append(StageResult(state, report, log))
        prev = state
    return results
