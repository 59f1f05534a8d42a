"""Phase-field critical points of a free-discontinuity energy on 2D grids,
with diagnostics for the vanishing-regularization limit objects."""

from .assembly import (
    ATParams,
    ATState,
    SparseSystem,
    assemble_u_system,
    assemble_v_system,
    cg_solve,
    discrete_at_energy,
    pde_residuals,
)
from .energetics import (
    EnergyReport,
    discrepancy,
    energy_report,
    optimal_profile,
    profile_energy_per_length,
    sampled_profile_state,
    w_mass,
)
from .grid import (
    Grid,
    GridSpec,
    boundary_normal_derivative,
    cell_gradient,
    integrate_cell,
    integrate_nodal,
    make_grid,
)
from .scenarios import Scenario, make_scenario, parse_scenario
from .solver import (
    ContinuationSchedule,
    IterationLog,
    alternate_minimize,
    continuation_run,
    init_state,
)
from .variations import (
    TestVectorField,
    anzellotti_residual,
    catalog,
    diagnostics_report,
    eshelby_tensor,
    inner_variation_assembled,
    inner_variation_flow,
    ms_inner_variation_reference,
    mu_blocks,
    stress_tensor,
    theta_strip_estimate,
    varifold_first_variation,
)

__version__ = "0.1.0"
