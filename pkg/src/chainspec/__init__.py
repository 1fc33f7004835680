"""Market and planner allocations for supply chains with endogenous input specialization."""

from .forms import (
    Calibration,
    Distribution,
    FormsError,
    FunctionalForms,
    ModelParams,
    default_calibration,
    power_exp_forms,
    resilience_calibration,
    validate_forms,
)
from .grids import ZGrid, build_zgrid, compat_aggregates, expectation, finding_prob, phi_hat
from .solver import (
    SolveOptions,
    SolverError,
    chi_multipliers,
    rho,
    stationary_mu,
    stationary_mu_links,
)
from .statics import (
    StaticEquilibrium,
    offered_surplus,
    offered_surplus_at,
    output_and_welfare_static,
    solve_planner_static,
    solve_static,
    static_output,
    welfare_functional_static,
)
from .dynamics import (
    CustomizationPath,
    DynamicSteadyState,
    EfficiencyIndex,
    compatibility_elasticity,
    customization_path,
    efficiency_index,
    lambda_bar,
    optimal_complexity,
    resilience,
    solve_dynamic,
    solve_planner_dynamic,
    u_bound,
)
from .links import (
    GridScanResult,
    LinkSteadyState,
    overspec_gridscan,
    resilience_links,
    solve_links,
    solve_planner_links,
    weakest_link,
)

__version__ = "0.1.0"
