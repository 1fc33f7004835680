"""Dynamic steady state: stationary search mass, demand, resilience, planner.

Long-term supplier relationships last until a firm-level disruption (per-period
probability delta); disrupted buyers lose all suppliers and search anew. The
stationary allocation solves the same surplus-posting problem as the static
model, with the compatibility-loss term weighted by delta*(1 + beta*(1-delta))
(the intertemporal value of a marginal new customer) and demand scaled to its
stationary level theta*lam*P/delta. The dynamic model nests the static one at
delta = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .forms import FunctionalForms, ModelParams
from .grids import ZGrid
from .solver import (
    RawSolution,
    SolveOptions,
    VariantConfig,
    solve_profile,
    stationary_mu,
)


def resilience(f: float, n_inputs: float) -> float:
    """Probability f^N that a disrupted buyer restores production next period."""
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"f must be in [0, 1], got {f}")
    if n_inputs < 1:
        raise ValueError("n_inputs must be >= 1")
    return float(f**n_inputs)


@dataclass(frozen=True)
class OutputFactors:
    """Multiplicative output decomposition Y = market_size * resilience * robustness * match_surplus."""

    market_size: float  # mu
    resilience: float  # f^N (or the composition-weighted version)
    robustness: float  # 1/delta
    match_surplus: float  # N * E[A | active]

    @property
    def product(self) -> float:
        return self.market_size * self.resilience * self.robustness * self.match_surplus


@dataclass(frozen=True)
class DynamicSteadyState:
    """Solved dynamic stationary allocation (equilibrium or planner)."""

    params: ModelParams
    forms: FunctionalForms
    grid: ZGrid
    role: str
    s: np.ndarray
    x: np.ndarray
    A: np.ndarray
    phi: np.ndarray
    phibar: float
    phihat: np.ndarray
    f: float
    G: np.ndarray
    trade_prob: np.ndarray
    e_hat: float
    qbar: float
    w: float
    mu: float
    theta: float
    D: np.ndarray  # stationary demand per node, theta*lam*P/delta
    R: float
    factors: OutputFactors
    Y: float
    W: float
    phi_dispersion: float
    foc_residual: np.ndarray
    n_iter: int
    boundary_flags: np.ndarray
    multiplicity_detected: bool


def _wrap_dynamic(raw: RawSolution, role: str) -> DynamicSteadyState:
    st = raw.state
    p = raw.params
    n = p.n_inputs
    trade_prob = st.phi * np.exp(-p.lam * (st.agg.phibar - st.agg.phihat)) * st.agg.f ** (n - 1.0)
    D = st.theta * p.lam * trade_prob / p.delta
    R = resilience(st.agg.f, n)
    factors = OutputFactors(st.mu, R, 1.0 / p.delta, n * st.e_hat)
    Y = factors.product
    W = Y + p.psi * np.log(1.0 - n * p.m * st.qbar)
    return DynamicSteadyState(
        params=p, forms=raw.forms, grid=raw.grid, role=role,
        s=st.s, x=st.x, A=st.A, phi=st.phi,
        phibar=st.agg.phibar, phihat=st.agg.phihat, f=st.agg.f, G=st.agg.G,
        trade_prob=trade_prob, e_hat=st.e_hat, qbar=st.qbar, w=st.w,
        mu=st.mu, theta=st.theta, D=D, R=R, factors=factors,
        Y=Y, W=float(W), phi_dispersion=st.agg.dispersion,
        foc_residual=raw.foc_residual, n_iter=raw.n_iter,
        boundary_flags=raw.boundary_flags,
        multiplicity_detected=raw.multiplicity_detected,
    )


def solve_dynamic(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    opts: SolveOptions | None = None,
) -> DynamicSteadyState:
    """Stationary equilibrium of the baseline dynamic model."""
    raw = solve_profile(params, forms, grid, VariantConfig(kind="dynamic"), opts)
    return _wrap_dynamic(raw, "equilibrium")


def solve_planner_dynamic(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    opts: SolveOptions | None = None,
    steady_state_behavior: bool = False,
) -> DynamicSteadyState:
    """Constrained-efficient dynamic allocation.

    Internalizes the network term (N-1) e^{-lam phihat} E_hat[A] and the
    (positive) search term beta(1-delta)/(1+beta(1-delta)) f^N N
    e^{-lam phihat} E_hat[A]. With ``steady_state_behavior`` the planner
    instead maximizes stationary welfare itself (the benchmark for
    steady-state welfare comparisons; the dynamically consistent allocation
    does not maximize stationary welfare).
    """
    cfg = VariantConfig(
        kind="dynamic", role="planner",
        planner_flavor="steady-state" if steady_state_behavior else "recursive",
    )
    raw = solve_profile(params, forms, grid, cfg, opts)
    return _wrap_dynamic(raw, "planner")


# ---------------------------------------------------------------------------
# Efficiency index and comparative statics


@dataclass(frozen=True)
class EfficiencyIndex:
    """Specialization-efficiency diagnostics for the dynamic model.

    m_factor      M(N) = 1 - f^N beta(1-delta)/(1+beta(1-delta)), in (1/2, 1]
    gap           G = N*M(N) - 1; positive means over-specialization
    u_bound       U(N; lam) = 0.5 N (1 - e^-lam)^N, the bound from the
                  complexity comparative static
    lambda_bar    search-efficiency threshold: G increasing in N for all N
                  when lam <= lambda_bar
    eps_phibar_lam  elasticity of solved mean compatibility to lam (NaN when
                  not requested)
    """

    n_inputs: float
    f: float
    m_factor: float
    gap: float
    u_bound: float
    lambda_bar: float
    eps_phibar_lam: float = float("nan")


def m_factor(params: ModelParams, f: float) -> float:
    """M(N) = 1 - f^N * beta(1-delta) / (1 + beta(1-delta))."""
    chi = params.beta * (1.0 - params.delta) / (1.0 + params.beta * (1.0 - params.delta))
    return 1.0 - f**params.n_inputs * chi


def u_bound(n_inputs: float, lam: float) -> float:
    """Upper bound 0.5 * N * (1 - e^-lam)^N on the complexity increment."""
    fbar = -np.expm1(-lam)
    return 0.5 * n_inputs * fbar**n_inputs


def lambda_bar() -> float:
    """Largest lam with U(N; lam) <= 1 for every N.

    U is maximized over N at N_bar = 1/(-ln(1 - e^-lam)), where it equals
    1/(2e(-ln(1 - e^-lam))); the root of that expression minus one.
    """
    def worst_u(lam: float) -> float:
        fbar = -np.expm1(-lam)
        n_bar = 1.0 / (-np.log(fbar))
        return u_bound(n_bar, lam) - 1.0

    return float(brentq(worst_u, 0.5, 10.0, xtol=1e-12))


def efficiency_index(
    params: ModelParams,
    f: float,
    forms: FunctionalForms | None = None,
    grid: ZGrid | None = None,
    opts: SolveOptions | None = None,
    rel_step: float = 1e-3,
) -> EfficiencyIndex:
    """Efficiency index at finding probability f; optionally with the
    compatibility-to-search elasticity (requires re-solving at lam*(1 +/- h))."""
    if not 0.0 < f < 1.0:
        raise ValueError(f"f must be in (0, 1), got {f}")
    m = m_factor(params, f)
    eps = float("nan")
    if forms is not None and grid is not None:
        eps = compatibility_elasticity(params, forms, grid, opts, rel_step)
    return EfficiencyIndex(
        n_inputs=params.n_inputs, f=f, m_factor=m,
        gap=params.n_inputs * m - 1.0,
        u_bound=u_bound(params.n_inputs, params.lam),
        lambda_bar=lambda_bar(),
        eps_phibar_lam=eps,
    )


def compatibility_elasticity(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    opts: SolveOptions | None = None,
    rel_step: float = 1e-3,
) -> float:
    """Elasticity of the solved mean compatibility to search efficiency.

    Centered finite difference of phibar across lam*(1 +/- rel_step); each
    point is a full dynamic solve.
    """
    h = rel_step * params.lam
    lo = solve_dynamic(params.with_(lam=params.lam - h), forms, grid, opts)
    hi = solve_dynamic(params.with_(lam=params.lam + h), forms, grid, opts)
    mid_phibar = 0.5 * (lo.phibar + hi.phibar)
    return float((hi.phibar - lo.phibar) / (2 * h) * params.lam / mid_phibar)


# ---------------------------------------------------------------------------
# Customization: firm-level specialization over the life of a supplier


@dataclass(frozen=True)
class CustomizationPath:
    """Firm-level specialization and demand by age, at fixed aggregates.

    s[t] and D[t] are node profiles at age t+1 (entry age 1, D_0 = 0). The
    terminal profile is pinned at the steady state.
    """

    ages: np.ndarray
    s: np.ndarray  # (T, n)
    D: np.ndarray  # (T, n)
    steady_s: np.ndarray
    steady_D: np.ndarray


def customization_path(eq: DynamicSteadyState, horizon: int) -> CustomizationPath:
    """Specialization/demand path of an entrant supplier with no customers.

    Holds all aggregates (tightness, offer distribution, offered surplus,
    wage) at their stationary values. Demand accumulates by the geometric
    recursion D_t = (1-delta) D_{t-1} + theta lam P at the stationary
    acquisition flow, so D_t -> theta lam P / delta; specialization is
    backward-induced from the steady-state terminal profile, each age
    trading off customization of the installed base against the trading
    probability on new customers.
    """
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    p = eq.params
    forms = eq.forms
    grid = eq.grid
    n = p.n_inputs
    lam, delta, beta = p.lam, p.delta, p.beta
    win = np.exp(-lam * (eq.phibar - eq.phihat)) * eq.f ** (n - 1.0)  # excl. phi(s)
    c_nodes = forms.c(grid.z)
    x = eq.x
    w = eq.w
    theta = eq.theta

    def foc(s_t, d_prev, s_next):
        a_next = forms.a(s_next) - c_nodes
        gain = (forms.a(s_t) - c_nodes - x) + beta * (1.0 - delta) * (a_next - x)
        return (
            (1.0 - delta) * d_prev * forms.a_prime(s_t)
            + theta * lam * win * (forms.phi(s_t) * forms.a_prime(s_t)
                                   + forms.phi_prime(s_t) * gain)
            - w * forms.q_prime(s_t)
        )

    T = horizon
    flow = theta * lam * eq.trade_prob  # stationary acquisition flow
    D_path = np.zeros((T, grid.n))
    d_prev = np.zeros(grid.n)
    for t in range(T):
        D_path[t] = (1.0 - delta) * d_prev + flow
        d_prev = D_path[t]

    # Bisect each age's condition on the branch below the stationary profile:
    # with a large installed base the condition also admits a harvest branch
    # (spike specialization on existing customers, forgo acquisition) that is
    # inconsistent with the stationary-profile equilibrium concept.
    s_path = np.empty((T, grid.n))
    s_path[T - 1] = eq.s
    s_lo = 1e-12 * forms.s_max
    for t in range(T - 2, -1, -1):
        d_prev = D_path[t - 1] if t > 0 else np.zeros(grid.n)
        s_next = s_path[t + 1]
        lo = np.full(grid.n, s_lo)
        hi = eq.s.copy()
        g_lo = foc(lo, d_prev, s_next)
        g_hi = foc(hi, d_prev, s_next)
        at_steady = np.sign(g_lo) == np.sign(g_hi)  # base large enough: stay at s_ss
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            g_mid = foc(mid, d_prev, s_next)
            take_low = np.sign(g_mid) == np.sign(g_lo)
            lo = np.where(take_low, mid, lo)
            g_lo = np.where(take_low, g_mid, g_lo)
            hi = np.where(take_low, hi, mid)
        # keep the monotone branch: ages approach the stationary profile
        # from below, so an age never out-specializes its successor
        s_path[t] = np.minimum(np.where(at_steady, eq.s, 0.5 * (lo + hi)), s_next)

    return CustomizationPath(
        ages=np.arange(1, T + 1),
        s=s_path,
        D=D_path,
        steady_s=eq.s.copy(),
        steady_D=eq.D.copy(),
    )


# ---------------------------------------------------------------------------
# Endogenous complexity (closed forms)


@dataclass(frozen=True)
class ComplexityResult:
    n_private: float  # privately optimal number of inputs
    n_efficient: float  # planner's, static
    n_efficient_dynamic: float  # planner's, dynamic
    excess_complexity: bool

    def as_tuple(self) -> tuple[float, float, float]:
        return self.n_private, self.n_efficient, self.n_efficient_dynamic


def optimal_complexity(f: float, labor_share: float, mu: float) -> ComplexityResult:
    """Closed-form complexity choices.

    Private: N* = 1/ln(1/f). Efficient (static): N*(1 - labor_share), the
    planner netting out design costs. Efficient (dynamic): the static value
    divided by the stationary searching mass.
    """
    if not 0.0 < f < 1.0:
        raise ValueError(f"f must be in (0, 1), got {f}")
    if not 0.0 <= labor_share < 1.0:
        raise ValueError(f"labor_share must be in [0, 1), got {labor_share}")
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"mu must be in (0, 1], got {mu}")
    n_star = 1.0 / np.log(1.0 / f)
    n_eff = n_star * (1.0 - labor_share)
    return ComplexityResult(
        n_private=float(n_star),
        n_efficient=float(n_eff),
        n_efficient_dynamic=float(n_eff / mu),
        excess_complexity=bool(n_star > n_eff),
    )
