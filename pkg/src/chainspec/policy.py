"""Externality accounting, targeted transaction subsidies, decentralization.

The marginal welfare effect of one node's specialization, evaluated at the
equilibrium allocation, splits into offsetting business-stealing and
appropriability terms (they cancel under surplus posting), a negative network
term proportional to N-1, and, in dynamic settings, a positive search term.
The planner allocation is decentralized by a per-transaction subsidy
tau(z) = e^{-lam phihat(z_low, z)} T with an aggregate component T; the same
wedge, expressed through the efficiency factor M(N), prices the dynamic case.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import DynamicSteadyState, m_factor, solve_planner_dynamic
from .forms import FunctionalForms, ModelParams
from .grids import ZGrid, compat_aggregates, expect_best, expect_best_below
from .solver import SolveOptions, VariantConfig, solve_profile
from .statics import StaticEquilibrium, solve_planner_static


@dataclass(frozen=True)
class ExternalityDecomposition:
    """Per-node externality terms, in surplus units.

    total is proportional to dW/ds(z) at the equilibrium profile; the
    node-wise proportionality factor (positive) is in ``dw_ds_factor``, so
    dW/ds = dw_ds_factor * total node by node.
    """

    z: np.ndarray
    business_stealing: np.ndarray
    appropriability: np.ndarray
    network: np.ndarray
    search: np.ndarray
    total: np.ndarray
    dw_ds_factor: np.ndarray


def _decompose(sol, chi_beta_search: float) -> ExternalityDecomposition:
    p = sol.params
    n = p.n_inputs
    grid = sol.grid
    forms = sol.forms
    phi = forms.phi(sol.s)
    agg = compat_aggregates(grid, phi, p.lam)
    bs = expect_best_below(grid, agg, phi, sol.A)
    targeting = np.exp(-p.lam * agg.phihat)
    network = -(n - 1.0) * targeting * sol.e_hat
    search = chi_beta_search * sol.f**n * n * targeting * sol.e_hat
    total = bs - sol.x + network + search
    # dW/ds = N m gamma * theta lam P * (-phi'/phi) * total per unit dz
    factor = (
        n * p.m * grid.gamma
        * (sol.trade_prob * p.lam / p.m)
        * (-forms.phi_prime(sol.s) / phi)
    )
    return ExternalityDecomposition(
        z=grid.z.copy(),
        business_stealing=bs,
        appropriability=-sol.x,
        network=network,
        search=search,
        total=total,
        dw_ds_factor=factor,
    )


def externality_decomposition_static(eq: StaticEquilibrium) -> ExternalityDecomposition:
    """Static decomposition: business stealing, appropriability, network."""
    return _decompose(eq, 0.0)


def dynamic_externality_decomposition(eq: DynamicSteadyState) -> ExternalityDecomposition:
    """Dynamic decomposition: adds the positive search term; the sign of the
    total equals the sign of 1 - N*M(N)."""
    p = eq.params
    chi_beta = p.beta * (1.0 - p.delta) / (1.0 + p.beta * (1.0 - p.delta))
    return _decompose(eq, chi_beta)


# ---------------------------------------------------------------------------
# Welfare functional and analytic gradient (static)


def welfare_gradient_static(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    s: np.ndarray,
) -> np.ndarray:
    """Partial derivatives of the discretized static welfare in the node values.

    Node i carries its quadrature weight: dW/ds_i = w_i * N * m * gamma_i *
    { theta lam P_i [a' + (phi'/phi)(A - E_best_below + (N-1) e^{-lam phihat}
    E_hat)] - w q' }. Cross-checked against central finite differences of
    :func:`chainspec.statics.welfare_functional_static`.
    """
    s = np.asarray(s, dtype=float)
    p = params
    n = p.n_inputs
    phi = forms.phi(s)
    agg = compat_aggregates(grid, phi, p.lam)
    A = forms.surplus(s, grid.z)
    e_best_below = expect_best_below(grid, agg, phi, A)
    e_max = expect_best(grid, agg, phi, A)
    e_hat = e_max / agg.f
    qbar = grid.integrate(forms.q(s) * grid.gamma)
    w = p.psi / (1.0 - n * p.m * qbar)
    theta = 1.0 / p.m
    trade_prob = phi * np.exp(-p.lam * (agg.phibar - agg.phihat)) * agg.f ** (n - 1.0)
    wedge = A - e_best_below + (n - 1.0) * np.exp(-p.lam * agg.phihat) * e_hat
    brace = theta * p.lam * trade_prob * (
        forms.a_prime(s) + forms.phi_prime(s) / phi * wedge
    ) - w * forms.q_prime(s)
    return grid.w * n * p.m * grid.gamma * brace


# ---------------------------------------------------------------------------
# Targeted transaction subsidies


@dataclass(frozen=True)
class SubsidySchedule:
    """Per-transaction subsidy decentralizing the efficient allocation.

    tau(z) = scale * e^{-lam phihat(z_low, z)} * T, with the aggregate
    component T = (N-1) E_hat[A] in the static model and (N M(N) - 1)
    E_hat[A] in the dynamic one (negative = a transaction tax). ``tau`` holds
    the schedule evaluated on the solution it was derived from; the
    decentralizing re-solve re-evaluates the same rule on its own aggregates
    so the wedge stays consistent with the implemented allocation.
    """

    kind: str  # "static" | "dynamic"
    scale: float
    t_star: float
    z: np.ndarray
    tau: np.ndarray
    tau_rate: np.ndarray
    f: float
    tau_at_zlow: float
    tau_at_zhigh: float

    def scaled(self, factor: float) -> "SubsidySchedule":
        return replace(
            self,
            scale=self.scale * factor,
            tau=self.tau * factor,
            tau_rate=self.tau_rate * factor,
            t_star=self.t_star,
            tau_at_zlow=self.tau_at_zlow * factor,
            tau_at_zhigh=self.tau_at_zhigh * factor,
        )


def _schedule(sol, kind: str) -> SubsidySchedule:
    p = sol.params
    n = p.n_inputs
    grid = sol.grid
    forms = sol.forms
    phi = forms.phi(sol.s)
    agg = compat_aggregates(grid, phi, p.lam)
    aggregate_c = n - 1.0 if kind == "static" else n * m_factor(p, sol.f) - 1.0
    t_star = aggregate_c * sol.e_hat
    tau = np.exp(-p.lam * agg.phihat) * t_star
    # rate form: share of the offered surplus, via the phi-weighted integrals
    varphi = sol.A * np.exp(p.lam * agg.phihat) * p.lam * phi * grid.gamma
    below = grid.prefix(varphi)
    total = grid.integrate(varphi)
    with np.errstate(divide="ignore"):
        tau_rate = aggregate_c * (1.0 - sol.f) / sol.f * (1.0 + (total - below) / below)
    return SubsidySchedule(
        kind=kind,
        scale=1.0,
        t_star=float(t_star),
        z=grid.z.copy(),
        tau=tau,
        tau_rate=tau_rate,
        f=sol.f,
        tau_at_zlow=float(t_star),
        tau_at_zhigh=float(np.exp(-p.lam * agg.phibar) * t_star),
    )


def subsidy_static(eq: StaticEquilibrium) -> SubsidySchedule:
    """Static schedule: T = (N-1) E_hat[A]; tau decreasing from T to (1-f) T."""
    return _schedule(eq, "static")


def subsidy_dynamic(eq: DynamicSteadyState) -> SubsidySchedule:
    """Dynamic schedule: T = (N M(N) - 1) E_hat[A]; a tax when N M(N) < 1."""
    return _schedule(eq, "dynamic")


@dataclass(frozen=True)
class DecentralizationCheck:
    max_deviation: float
    s_subsidized: np.ndarray
    s_planner: np.ndarray
    z: np.ndarray


def verify_decentralization(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    schedule: SubsidySchedule,
    opts: SolveOptions | None = None,
) -> DecentralizationCheck:
    """Re-solve the equilibrium with sellers retaining A - (x - tau) and
    compare against the planner profile; the sup-norm gap should sit at
    solver tolerance for the unscaled schedule."""
    kind = schedule.kind
    cfg = VariantConfig(kind=kind, subsidy_kind=kind, subsidy_scale=schedule.scale)
    raw = solve_profile(params, forms, grid, cfg, opts)
    if kind == "static":
        planner = solve_planner_static(params, forms, grid, opts)
    else:
        planner = solve_planner_dynamic(params, forms, grid, opts)
    dev = float(np.max(np.abs(raw.state.s - planner.s)))
    return DecentralizationCheck(
        max_deviation=dev,
        s_subsidized=raw.state.s.copy(),
        s_planner=planner.s.copy(),
        z=grid.z.copy(),
    )
