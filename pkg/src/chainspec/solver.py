"""Shared fixed-point engine for equilibrium and planner allocations.

All model variants reduce to the same structure: given a specialization
profile s(z) on the grid, compute compatibility aggregates, the offered
surplus x(z) (closed-form best-below expectation), the wage, and then take a
node-wise root of the specialization first-order condition

    k_i * [phi(s) a'(s) + mult * phi'(s) * (A(s; z_i) - x_eff_i)] = w q'(s),

where (k_i, mult, x_eff) encode the variant:

* model kind sets the demand scale and the dynamic multiplier on the
  compatibility-loss term,
* the planner role subtracts the uninternalized network and search terms from
  x (so the root internalizes them),
* a transaction subsidy subtracts the schedule tau from x,
* a specialization cap clips the root inside the iteration so every aggregate
  reflects the cap.

The map s -> root(aggregates(s)) is iterated with damping until the sup-norm
displacement is below tolerance. Node roots use vectorized bisection on
[0, s_max]; nodes without a sign change take the better boundary and are
flagged. Second-order conditions are verified at the converged roots.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .forms import FunctionalForms, ModelParams
from .grids import (
    CompatAggregates,
    ZGrid,
    compat_aggregates,
    expect_best,
    expect_best_below,
)


class SolverError(RuntimeError):
    """Fixed-point non-convergence, labor infeasibility, or SOC failure."""


@dataclass(frozen=True)
class SolveOptions:
    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 500
    bisect_iter: int = 80
    check_soc: bool = True
    multi_start: bool = False
    s0: np.ndarray | float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must be in (0, 1], got {self.damping}")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be > 0 and max_iter >= 1")


@dataclass(frozen=True)
class VariantConfig:
    """What to solve: model kind, role, and variant switches.

    planner_flavor "recursive" internalizes the externalities of the
    dynamically consistent planner (the beta-weighted search term); flavor
    "steady-state" maximizes stationary welfare itself (its wedge is the
    elasticity of the stationary output multiplier to the finding
    probability), which is the right benchmark for steady-state welfare
    comparisons. The two coincide in the static model.
    """

    kind: str  # "static" | "dynamic" | "links"
    role: str = "equilibrium"  # "equilibrium" | "planner"
    planner_flavor: str = "recursive"  # "recursive" | "steady-state"
    noncontingent: bool = False  # static only: pay suppliers regardless of halts
    xi: float = 0.0  # static bargaining weight of buyers; 0 = surplus posting
    s_cap: float | None = None  # specialization standard (cap), clipped in-loop
    subsidy_kind: str | None = None  # "static" | "dynamic": re-solve with tau wedge
    subsidy_scale: float = 1.0
    nest_baseline: bool = False  # links only: force nu=0, rho=1, f_tilde=f^(N-1)

    def __post_init__(self) -> None:
        if self.kind not in ("static", "dynamic", "links"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.role not in ("equilibrium", "planner"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.planner_flavor not in ("recursive", "steady-state"):
            raise ValueError(f"unknown planner flavor {self.planner_flavor!r}")
        if not 0.0 <= self.xi < 1.0:
            raise ValueError("bargaining weight xi must be in [0, 1)")
        if self.noncontingent and self.kind != "static":
            raise ValueError("non-contingent contracts are a static variant")
        if self.xi > 0 and self.kind != "static":
            raise ValueError("bargaining is a static variant")


@dataclass
class IterationState:
    """Aggregates implied by the current specialization profile."""

    s: np.ndarray
    phi: np.ndarray
    A: np.ndarray
    agg: CompatAggregates
    x: np.ndarray
    e_hat: float  # expected surplus of the best supplier, conditional on active
    qbar: float
    w: float
    mu: float
    nu: float
    rho_nm1: float
    f_tilde: float
    theta: float
    k_scale: np.ndarray  # node factor multiplying the FOC bracket
    mult: float  # multiplier on the compatibility-loss term
    x_eff: np.ndarray
    retention_discount: float  # demand survival factor per period (0 for static)


def stationary_mu(f: float, n_inputs: float, delta: float) -> float:
    """Stationary searching mass delta / (delta + (1-delta) f^N)."""
    if not 0.0 <= f < 1.0:
        raise ValueError(f"f must be in [0, 1), got {f}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must be in (0, 1], got {delta}")
    if n_inputs < 1:
        raise ValueError("n_inputs must be >= 1")
    return delta / (delta + (1.0 - delta) * f**n_inputs)


def rho(f: float, n: float, delta: float) -> float:
    """Per-period retention: probability [1 - delta(1-f)]^n that n links all hold.

    Each of n links independently either survives (prob 1-delta) or breaks and
    is replaced the next period (prob delta * f). Real n is accepted so the
    degenerate N-2 terms of the welfare multipliers stay evaluable at N=1.
    """
    if not 0.0 <= f <= 1.0 or not 0.0 <= delta <= 1.0:
        raise ValueError("f and delta must be in [0, 1]")
    return float((1.0 - delta * (1.0 - f)) ** n)


def _mu_links_residual(mu: float, f: float, n_inputs: float, delta: float) -> float:
    """Stationarity residual of the searching mass in the link-destruction model."""
    nu = (delta / (1.0 - delta)) * (1.0 / mu - 1.0)
    rho_nm1 = rho(f, n_inputs - 1.0, delta)
    q = (1.0 - f**n_inputs) * (1.0 - nu) + (1.0 - f * rho_nm1) * nu
    return delta * (1.0 - q * mu) + q * mu - mu


def stationary_mu_links(
    f: float, n_inputs: float, delta: float, nu_override: float | None = None
) -> tuple[float, float, float]:
    """Searching mass, previously-active share, and activation mix (mu, nu, f_tilde).

    Solves the scalar stationarity equation by bracketed bisection on
    mu in (delta, 1]; the residual at the returned mu is below 1e-10.
    ``nu_override`` pins nu (0 reproduces the baseline stationary mass).
    """
    if not 0.0 < f < 1.0:
        raise ValueError(f"f must be in (0, 1), got {f}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"link model needs delta in (0, 1), got {delta}")
    rho_nm1 = rho(f, n_inputs - 1.0, delta)
    if nu_override is not None:
        nu = float(nu_override)
        q = (1.0 - f**n_inputs) * (1.0 - nu) + (1.0 - f * rho_nm1) * nu
        mu = delta / (1.0 - (1.0 - delta) * q)
        f_tilde = nu * rho_nm1 + (1.0 - nu) * f ** (n_inputs - 1.0)
        return mu, nu, f_tilde

    lo, hi = delta + 1e-12, 1.0
    g_lo = _mu_links_residual(lo, f, n_inputs, delta)
    g_hi = _mu_links_residual(hi, f, n_inputs, delta)
    if g_lo * g_hi > 0:
        raise SolverError(
            f"no stationary searching mass in ({lo}, {hi}]: residuals {g_lo}, {g_hi}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = _mu_links_residual(mid, f, n_inputs, delta)
        if g_lo * g_mid <= 0:
            hi = mid
        else:
            lo, g_lo = mid, g_mid
    mu = 0.5 * (lo + hi)
    resid = _mu_links_residual(mu, f, n_inputs, delta)
    if abs(resid) > 1e-10:
        raise SolverError(f"stationary mass bisection stalled, residual {resid}")
    nu = (delta / (1.0 - delta)) * (1.0 / mu - 1.0)
    f_tilde = nu * rho_nm1 + (1.0 - nu) * f ** (n_inputs - 1.0)
    return mu, nu, f_tilde


def chi_multipliers(
    f: float, n_inputs: float, delta: float, mu: float, nu: float
) -> tuple[float, float]:
    """Welfare multipliers (chi1, chi2) on the network and search terms.

    chi1 discounts the network term for searchers that keep other links and
    inflates it for retained customers' exposure; chi2 adjusts the search term
    for the composition of the searching pool. chi1 > 0 always; chi2 can take
    either sign. For N < 2 the rho(f; N-2) factors are evaluated with their
    real (degenerate) exponents.
    """
    n = n_inputs
    rho_n = rho(f, n, delta)
    rho_nm1 = rho(f, n - 1.0, delta)
    rho_nm2 = rho(f, n - 2.0, delta)
    f_tilde = nu * rho_nm1 + (1.0 - nu) * f ** (n - 1.0)
    chi1 = (
        1.0
        - nu * (rho_n - delta * f * rho_nm2) / f_tilde
        + (1.0 - delta) * (delta * f * rho_nm2) / (1.0 - (1.0 - delta) * rho_nm1)
    )
    chi2 = (
        1.0 - (rho_nm1 - f ** (n - 1.0)) / f_tilde * delta / ((1.0 - delta) * mu)
    ) * (
        (1.0 - nu)
        + (nu / n) * (rho_nm1 / f ** (n - 1.0) + (n - 1.0) * delta * rho_nm2 / f ** (n - 2.0))
    )
    return float(chi1), float(chi2)


def _labor_and_wage(params: ModelParams, forms: FunctionalForms, grid: ZGrid, s: np.ndarray):
    """Design-labor share and the implied wage.

    Inside the iteration an infeasible labor share only floors the leisure
    margin (the exploding wage is what pushes specialization back down); the
    converged point must be strictly feasible.
    """
    qbar = grid.integrate(forms.q(s) * grid.gamma)
    labor = params.n_inputs * params.m * qbar
    return qbar, params.psi / max(1.0 - labor, 1e-9)


def _build_state(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    cfg: VariantConfig,
    s: np.ndarray,
) -> IterationState:
    lam, n, delta, beta = params.lam, params.n_inputs, params.delta, params.beta
    phi = forms.phi(s)
    A = forms.surplus(s, grid.z)
    agg = compat_aggregates(grid, phi, lam)
    f = agg.f
    x = expect_best_below(grid, agg, phi, A)
    e_hat = expect_best(grid, agg, phi, A) / f if f > 0 else 0.0
    qbar, w = _labor_and_wage(params, forms, grid, s)

    mu, nu, rho_nm1, f_tilde = 1.0, 0.0, 1.0, f ** (n - 1.0)
    retention = 0.0
    win = np.exp(-lam * (agg.phibar - agg.phihat))  # prob best among compatible
    ss_planner = cfg.role == "planner" and cfg.planner_flavor == "steady-state"

    if cfg.kind == "static":
        theta = 1.0 / params.m
        mult = 1.0
        f_pow = 1.0 if cfg.noncontingent else f ** (n - 1.0)
        k_scale = theta * lam * f_pow * win
        if cfg.xi > 0.0:
            k_scale = k_scale * (1.0 - cfg.xi)
    elif cfg.kind == "dynamic":
        mu = stationary_mu(f, n, delta)
        theta = mu / params.m
        mult = 1.0 if ss_planner else delta * (1.0 + beta * (1.0 - delta))
        k_scale = theta * lam * f ** (n - 1.0) * win / delta
        retention = 1.0 - delta
    else:  # links
        if cfg.nest_baseline:
            mu = stationary_mu(f, n, delta)
            nu, rho_nm1, f_tilde = 0.0, 1.0, f ** (n - 1.0)
        else:
            mu, nu, f_tilde = stationary_mu_links(f, n, delta)
            rho_nm1 = rho(f, n - 1.0, delta)
        theta = mu / params.m
        survive = (1.0 - delta) * rho_nm1
        if ss_planner:
            mult = 1.0
            k_scale = theta * lam * f_tilde * win / delta
        else:
            mult = (1.0 - survive) * (1.0 + beta * (1.0 - delta) * rho_nm1)
            k_scale = theta * lam * f_tilde * win / (1.0 - survive)
        retention = survive

    x_eff = x.copy()
    ext = _externality_wedge(params, cfg, agg, e_hat, f, mu, nu)
    if ext is not None:
        x_eff = x - ext
    return IterationState(
        s=s, phi=phi, A=A, agg=agg, x=x, e_hat=e_hat, qbar=qbar, w=w,
        mu=mu, nu=nu, rho_nm1=rho_nm1, f_tilde=f_tilde, theta=theta,
        k_scale=k_scale, mult=mult, x_eff=x_eff, retention_discount=retention,
    )


def _externality_wedge(
    params: ModelParams,
    cfg: VariantConfig,
    agg: CompatAggregates,
    e_hat: float,
    f: float,
    mu: float,
    nu: float,
) -> np.ndarray | None:
    """Per-node wedge subtracted from x so the FOC internalizes externalities.

    Planner roles build it from the network term (N-1) e^{-lam phihat} E_hat
    and the search term chi_beta f^N N e^{-lam phihat} E_hat; a subsidy
    re-solve builds it as the schedule tau(z) = scale * T * e^{-lam phihat}.
    The two coincide at scale 1 by the aggregation identities.
    """
    n, delta, beta = params.n_inputs, params.delta, params.beta
    targeting = np.exp(-agg.lam * agg.phihat)
    chi_beta = beta * (1.0 - delta) / (1.0 + beta * (1.0 - delta))
    if cfg.role == "planner":
        if cfg.planner_flavor == "steady-state" and cfg.kind != "static":
            return _phi_elasticity(cfg.kind, f, n, delta) * targeting * e_hat
        if cfg.kind == "static":
            c_net, c_search = 1.0, 0.0
        elif cfg.kind == "dynamic":
            c_net, c_search = 1.0, chi_beta
        else:
            chi1, chi2 = chi_multipliers(f, n, delta, mu, nu)
            c_net, c_search = chi1, chi2 * chi_beta
        return (c_net * (n - 1.0) - c_search * f**n * n) * targeting * e_hat
    if cfg.subsidy_kind is not None:
        if cfg.subsidy_kind == "static":
            t_star = (n - 1.0) * e_hat
        elif cfg.subsidy_kind == "dynamic":
            m_factor = 1.0 - f**n * chi_beta
            t_star = (n * m_factor - 1.0) * e_hat
        else:
            raise ValueError(f"unknown subsidy kind {cfg.subsidy_kind!r}")
        return cfg.subsidy_scale * t_star * targeting
    return None


def _output_multiplier(kind: str, f: float, n: float, delta: float) -> float:
    """Stationary output per unit of best-supplier surplus mass: Y = Phi(f) N E_best."""
    if kind == "dynamic":
        return stationary_mu(f, n, delta) * f ** (n - 1.0) / delta
    mu, nu, f_tilde = stationary_mu_links(f, n, delta)
    return mu * f_tilde / delta


def _phi_elasticity(kind: str, f: float, n: float, delta: float, h: float = 1e-6) -> float:
    """Wedge coefficient of the steady-state planner: f * Phi'(f) / Phi(f).

    Under stationary welfare, every f-channel (search mass, resilience,
    retention) enters through the scalar multiplier Phi(f); its elasticity
    plays exactly the role (N-1) plays in the static planner condition.
    """
    step = h * min(f, 1.0 - f)
    lo = _output_multiplier(kind, f - step, n, delta)
    hi = _output_multiplier(kind, f + step, n, delta)
    mid = _output_multiplier(kind, f, n, delta)
    return f * (hi - lo) / (2.0 * step) / mid


def _foc(forms: FunctionalForms, state: IterationState, c_nodes: np.ndarray, s: np.ndarray):
    """FOC residual g(s) per node, given previous-iterate aggregates."""
    A_s = forms.a(s) - c_nodes
    lhs = state.k_scale * (
        forms.phi(s) * forms.a_prime(s)
        + state.mult * forms.phi_prime(s) * (A_s - state.x_eff)
    )
    return lhs - state.w * forms.q_prime(s)


def _foc_deriv(forms: FunctionalForms, state: IterationState, c_nodes: np.ndarray, s: np.ndarray):
    """Analytic derivative of the FOC residual (second-order condition check)."""
    A_s = forms.a(s) - c_nodes
    term = (
        forms.phi(s) * forms.a_pp(s)
        + (1.0 + state.mult) * forms.phi_prime(s) * forms.a_prime(s)
        + state.mult * forms.phi_pp(s) * (A_s - state.x_eff)
    )
    return state.k_scale * term - state.w * forms.q_pp(s)


def _node_roots(
    forms: FunctionalForms,
    state: IterationState,
    grid: ZGrid,
    opts: SolveOptions,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized bisection of the FOC on [~0, s_max] at every node.

    Nodes whose FOC has no sign change take the boundary suggested by the
    sign (decreasing objective -> 0, increasing -> s_max) and are flagged.
    """
    c_nodes = forms.c(grid.z)
    s_max = forms.s_max
    lo = np.full(grid.n, 1e-12 * s_max)
    hi = np.full(grid.n, s_max)
    g_lo = _foc(forms, state, c_nodes, lo)
    g_hi = _foc(forms, state, c_nodes, hi)
    no_root = np.sign(g_lo) == np.sign(g_hi)
    corner = np.where(g_lo < 0.0, 0.0, s_max)
    for _ in range(opts.bisect_iter):
        mid = 0.5 * (lo + hi)
        g_mid = _foc(forms, state, c_nodes, mid)
        take_low = np.sign(g_mid) == np.sign(g_lo)
        lo = np.where(take_low, mid, lo)
        g_lo = np.where(take_low, g_mid, g_lo)
        hi = np.where(take_low, hi, mid)
    roots = 0.5 * (lo + hi)
    return np.where(no_root, corner, roots), no_root


def _feasible_s(params: ModelParams, forms: FunctionalForms) -> float:
    """Largest uniform s with design labor N*m*q(s) at most one half."""
    budget = 0.5 / (params.n_inputs * params.m)
    if forms.q(forms.s_max) <= budget:
        return forms.s_max
    lo, hi = 0.0, forms.s_max
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if forms.q(mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class RawSolution:
    """Converged fixed point plus diagnostics; consumed by the model wrappers."""

    params: ModelParams
    forms: FunctionalForms
    grid: ZGrid
    cfg: VariantConfig
    state: IterationState
    n_iter: int
    foc_residual: np.ndarray
    soc_margin: np.ndarray
    boundary_flags: np.ndarray
    cap_binding: np.ndarray
    multiplicity_detected: bool = False


def solve_profile(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    cfg: VariantConfig,
    opts: SolveOptions | None = None,
) -> RawSolution:
    """Damped fixed point of the map s -> node-wise FOC root."""
    opts = opts or SolveOptions()
    if opts.multi_start:
        starts = [0.1 * forms.s_max, 0.6 * forms.s_max,
                  np.linspace(0.05, 0.8, grid.n) * forms.s_max]
        sols = [
            _solve_single(params, forms, grid, cfg,
                          replace(opts, multi_start=False, s0=s0))
            for s0 in starts
        ]
        spread = max(
            float(np.max(np.abs(a.state.s - b.state.s)))
            for i, a in enumerate(sols) for b in sols[i + 1:]
        )
        best = sols[0]
        best.multiplicity_detected = spread > max(100 * opts.tol, 1e-6)
        return best
    return _solve_single(params, forms, grid, cfg, opts)


def _solve_single(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    cfg: VariantConfig,
    opts: SolveOptions,
) -> RawSolution:
    if opts.s0 is None:
        # start below both the working-range and the labor-feasibility scale
        s = np.full(grid.n, min(0.25 * forms.s_max, _feasible_s(params, forms)))
    elif np.isscalar(opts.s0):
        s = np.full(grid.n, float(opts.s0))
    else:
        s = np.asarray(opts.s0, dtype=float).copy()
    s = np.clip(s, 0.0, forms.s_max)
    if cfg.s_cap is not None:
        s = np.minimum(s, cfg.s_cap)

    state = None
    for it in range(1, opts.max_iter + 1):
        state = _build_state(params, forms, grid, cfg, s)
        roots, no_root = _node_roots(forms, state, grid, opts)
        if cfg.s_cap is not None:
            roots = np.minimum(roots, cfg.s_cap)
        step = roots - s
        s = s + opts.damping * step
        if float(np.max(np.abs(step))) <= opts.tol:
            break
    else:
        raise SolverError(
            f"no convergence after {opts.max_iter} iterations "
            f"(last step {float(np.max(np.abs(step))):.3e}, kind={cfg.kind}, role={cfg.role})"
        )

    # consistency pass at the converged profile
    s = roots if cfg.s_cap is None else np.minimum(roots, cfg.s_cap)
    state = _build_state(params, forms, grid, cfg, s)
    roots, no_root = _node_roots(forms, state, grid, opts)
    if cfg.s_cap is not None:
        cap_binding = roots > cfg.s_cap + 1e-12
        roots = np.minimum(roots, cfg.s_cap)
    else:
        cap_binding = np.zeros(grid.n, dtype=bool)

    labor = params.n_inputs * params.m * state.qbar
    if labor >= 1.0:
        raise SolverError(
            f"labor infeasible at the fixed point: N*m*qbar = {labor:.4f} >= 1"
        )

    c_nodes = forms.c(grid.z)
    g = _foc(forms, state, c_nodes, state.s)
    scale = np.maximum(np.abs(state.w * forms.q_prime(np.maximum(state.s, 1e-9))), 1e-12)
    foc_residual = np.where(cap_binding | no_root, 0.0, np.abs(g) / scale)
    soc = _foc_deriv(forms, state, c_nodes, np.maximum(state.s, 1e-12))
    interior = ~(cap_binding | no_root)
    if opts.check_soc and np.any(soc[interior] >= 0.0):
        raise SolverError("second-order condition failed at an interior root")

    return RawSolution(
        params=params, forms=forms, grid=grid, cfg=cfg, state=state,
        n_iter=it, foc_residual=foc_residual, soc_margin=soc,
        boundary_flags=no_root, cap_binding=cap_binding,
    )
