"""Compatibility standards: equilibrium under a specialization cap and the
welfare-maximizing cap.

A standard caps specialization at s_bar (a minimum-interoperability rule).
The capped equilibrium re-solves the full fixed point with each node's
first-order condition clipped at the cap, so the mean compatibility, finding
probability, wage, and offer distribution all reflect the policy. The optimal
cap maximizes stationary welfare over [min s*, max s*] by grid scan plus
golden-section refinement; the implicit first-order condition of the cap is
reported as a diagnostic only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicSteadyState, solve_dynamic, solve_planner_dynamic
from .forms import FunctionalForms, ModelParams
from .grids import ZGrid, compat_aggregates, expect_best
from .solver import RawSolution, SolveOptions, VariantConfig, solve_profile


@dataclass(frozen=True)
class CappedEquilibrium:
    """Dynamic equilibrium under a specialization cap."""

    s_bar: float
    s: np.ndarray
    x: np.ndarray
    f: float
    phibar: float
    mu: float
    Y: float
    W: float
    welfare_gain: float  # consumption-equivalent level vs laissez-faire
    cap_binding: np.ndarray
    z_hat: float  # lowest binding productivity (z_high + eps when slack)
    constrained_share: float  # 1 - Gamma(z_hat)
    foc_residual_unconstrained: float
    n_iter: int


@dataclass(frozen=True)
class StandardResult:
    """Optimal cap with its welfare curve and comparative-statics ratios."""

    s_bar_star: float
    z_hat: float
    constrained_share: float
    welfare_star: float
    welfare_laissez_faire: float
    welfare_max: float  # stationary-welfare-maximizing planner
    ratio_w_to_max: float  # W(s_bar*) / W_max
    ratio_sbar_to_mean_s: float  # s_bar* / E[s*]
    gain_share: float  # (W(s_bar*) - W_lf) / (W_max - W_lf)
    curve_s_bar: np.ndarray
    curve_w: np.ndarray
    foc_residual: float
    s_star_monotone: bool
    solution: CappedEquilibrium


def solve_with_standard(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    s_bar: float,
    opts: SolveOptions | None = None,
    w_laissez_faire: float | None = None,
) -> CappedEquilibrium:
    """Dynamic equilibrium with every node's specialization capped at s_bar."""
    if s_bar <= 0:
        raise ValueError("s_bar must be > 0")
    cfg = VariantConfig(kind="dynamic", s_cap=float(s_bar))
    raw = solve_profile(params, forms, grid, cfg, opts)
    return _wrap_capped(raw, s_bar, params, forms, grid, w_laissez_faire)


def _wrap_capped(
    raw: RawSolution,
    s_bar: float,
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    w_laissez_faire: float | None,
) -> CappedEquilibrium:
    st = raw.state
    n = params.n_inputs
    R = st.agg.f**n
    Y = st.mu * R / params.delta * n * st.e_hat
    W = Y + params.psi * np.log(1.0 - n * params.m * st.qbar)
    binding = raw.cap_binding
    if binding.any():
        z_hat = float(grid.z[np.argmax(binding)])
    else:
        z_hat = grid.z_high
    share = float(1.0 - grid.dist.cdf(z_hat)) if binding.any() else 0.0
    interior = ~binding
    return CappedEquilibrium(
        s_bar=float(s_bar),
        s=st.s, x=st.x, f=st.agg.f, phibar=st.agg.phibar, mu=st.mu,
        Y=float(Y), W=float(W),
        welfare_gain=float(W - w_laissez_faire) if w_laissez_faire is not None else float("nan"),
        cap_binding=binding,
        z_hat=z_hat,
        constrained_share=share,
        foc_residual_unconstrained=float(np.max(raw.foc_residual[interior], initial=0.0)),
        n_iter=raw.n_iter,
    )


def optimal_standard(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    opts: SolveOptions | None = None,
    n_scan: int = 21,
    refine_tol: float = 1e-5,
) -> StandardResult:
    """Scan + golden-section search for the welfare-maximizing cap.

    The scan runs over [min s*, max s*] of the laissez-faire equilibrium.
    A non-monotone laissez-faire profile (possible under skewed productivity
    distributions) is flagged; the binding threshold is then the lowest
    binding node rather than a crossing point.
    """
    lf = solve_dynamic(params, forms, grid, opts)
    planner = solve_planner_dynamic(params, forms, grid, opts, steady_state_behavior=True)
    monotone = bool(np.all(np.diff(lf.s) >= -1e-10))

    lo, hi = float(lf.s.min()), float(lf.s.max())
    scan = np.linspace(lo + 1e-6 * (hi - lo), hi, n_scan)
    warm = SolveOptions() if opts is None else opts

    def w_at(s_bar: float) -> float:
        return solve_with_standard(params, forms, grid, s_bar, warm, lf.W).W

    curve = np.array([w_at(sb) for sb in scan])
    i_best = int(np.argmax(curve))

    a = scan[max(i_best - 1, 0)]
    b = scan[min(i_best + 1, n_scan - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = w_at(c), w_at(d)
    while b - a > refine_tol * (hi - lo):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = w_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = w_at(d)
    s_bar_star = 0.5 * (a + b)
    best = solve_with_standard(params, forms, grid, s_bar_star, warm, lf.W)

    mean_s = grid.integrate(lf.s * grid.gamma)
    denom = planner.W - lf.W
    return StandardResult(
        s_bar_star=float(s_bar_star),
        z_hat=best.z_hat,
        constrained_share=best.constrained_share,
        welfare_star=best.W,
        welfare_laissez_faire=lf.W,
        welfare_max=planner.W,
        ratio_w_to_max=best.W / planner.W,
        ratio_sbar_to_mean_s=float(s_bar_star / mean_s),
        gain_share=float((best.W - lf.W) / denom) if denom > 0 else float("nan"),
        curve_s_bar=scan,
        curve_w=curve,
        foc_residual=standard_foc_residual(params, forms, grid, best, warm),
        s_star_monotone=monotone,
        solution=best,
    )


def standard_foc_residual(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    capped: CappedEquilibrium,
    opts: SolveOptions | None = None,
    fd_step: float = 1e-4,
) -> float:
    """Residual of the implicit optimal-cap condition at a capped solution.

    Marginal benefit: the average first-order gain of the constrained firms
    from a looser cap. Marginal cost: the induced change in the network
    externality (own-input finding probability falls, complementary inputs'
    rises through re-equilibration) plus the extra design labor. The
    cross-input response is recovered from a finite-difference re-solve of
    the symmetric capped equilibrium. Diagnostic only; the optimizer is the
    welfare scan.
    """
    p = params
    n = p.n_inputs
    s_bar = capped.s_bar
    lam = p.lam
    f = capped.f
    phi_bar_cap = forms.phi(s_bar)
    z_hat = capped.z_hat

    phi_prof = forms.phi(capped.s)
    agg = compat_aggregates(grid, phi_prof, lam)
    A_prof = forms.surplus(capped.s, grid.z)
    e_max = expect_best(grid, agg, phi_prof, A_prof)
    qbar = grid.integrate(forms.q(capped.s) * grid.gamma)
    labor = n * p.m * qbar
    w = p.psi / (1.0 - labor)

    # marginal benefit integral over the constrained range [z_hat, z_high]
    xg, wg = np.polynomial.legendre.leggauss(64)
    zz = 0.5 * (grid.z_high - z_hat) * xg + 0.5 * (grid.z_high + z_hat)
    ww = 0.5 * (grid.z_high - z_hat) * wg
    surv = 1.0 - grid.dist.cdf(zz)
    a_term = forms.a_prime(s_bar)
    x_tilde = lam * phi_bar_cap * surv * forms.surplus(s_bar, zz)
    integrand = (
        (a_term + forms.phi_prime(s_bar) / phi_bar_cap
         * (forms.surplus(s_bar, zz) - x_tilde))
        * np.exp(-lam * phi_bar_cap * surv)
        * grid.dist.pdf(zz)
    )
    mb = f ** (n - 1.0) * lam * phi_bar_cap * float(ww @ integrand)

    # finding-probability responses to the cap
    share = 1.0 - float(grid.dist.cdf(z_hat))
    df_own = (1.0 - f) * lam * float(forms.phi_prime(s_bar)) * share
    h = fd_step * s_bar
    f_up = solve_with_standard(p, forms, grid, s_bar + h, opts).f
    f_dn = solve_with_standard(p, forms, grid, s_bar - h, opts).f
    df_total = (f_up - f_dn) / (2.0 * h)
    df_other = (df_total - df_own) / (n - 1.0) if n > 1 else 0.0

    network = (n - 1.0) * f ** (n - 2.0) * e_max * (df_own + (n - 1.0) * df_other)
    labor_mc = w * p.m * share * float(forms.q_prime(s_bar))
    return float(mb + network - labor_mc)


@dataclass(frozen=True)
class StandardsReport:
    """Comparative statics of the optimal standard over a parameter sweep."""

    param_name: str
    values: np.ndarray
    ratio_w_to_max: np.ndarray
    ratio_sbar_to_mean_s: np.ndarray
    constrained_share: np.ndarray
    monotonicity: dict  # column -> "increasing" | "decreasing" | "mixed" | ""

    def rows(self):
        for i, v in enumerate(self.values):
            yield (
                float(v),
                float(self.ratio_w_to_max[i]),
                float(self.ratio_sbar_to_mean_s[i]),
                float(self.constrained_share[i]),
            )


def standard_report(param_name: str, values, results) -> StandardsReport:
    """Tabulate optimal-standard sweeps with per-column direction flags."""
    results = list(results)
    if len(results) < 1:
        raise ValueError("need at least one sweep point")
    cols = {
        "w_to_max": np.array([r.ratio_w_to_max for r in results]),
        "sbar_to_mean_s": np.array([r.ratio_sbar_to_mean_s for r in results]),
        "constrained_share": np.array([r.constrained_share for r in results]),
    }
    flags = {}
    for name, col in cols.items():
        if len(results) < 2:
            flags[name] = ""
        elif np.all(np.diff(col) > 0):
            flags[name] = "increasing"
        elif np.all(np.diff(col) < 0):
            flags[name] = "decreasing"
        else:
            flags[name] = "mixed"
    return StandardsReport(
        param_name=param_name,
        values=np.asarray(values, dtype=float),
        ratio_w_to_max=cols["w_to_max"],
        ratio_sbar_to_mean_s=cols["sbar_to_mean_s"],
        constrained_share=cols["constrained_share"],
        monotonicity=flags,
    )
