"""Dynamic model with single-link destruction.

Each supplier relationship breaks independently with per-period probability
delta; a buyer stays operational if every broken link is replaced the same
period, and loses all suppliers otherwise (idle links are severed). The
searching pool then mixes previously-active buyers (who need few inputs) with
previously-inactive ones (who need all N), which changes the stationary
search mass, demand retention, the specialization condition, resilience, and
the welfare multipliers on the network and search externalities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forms import FunctionalForms, ModelParams
from .grids import ZGrid
from .solver import (
    RawSolution,
    SolveOptions,
    VariantConfig,
    chi_multipliers,
    rho,
    solve_profile,
    stationary_mu_links,
)
from .dynamics import OutputFactors


def resilience_links(f: float, n_inputs: float, nu: float, delta: float) -> float:
    """Composition-weighted activation probability of a searching buyer.

    nu * f * rho(f; N-1) + (1 - nu) * f^N: previously-active searchers only
    replace their broken links, previously-inactive ones need all N inputs.
    Nests f^N at nu = 0.
    """
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"nu must be in [0, 1], got {nu}")
    rho_nm1 = rho(f, n_inputs - 1.0, delta)
    return float(nu * f * rho_nm1 + (1.0 - nu) * f**n_inputs)


@dataclass(frozen=True)
class LinkSteadyState:
    """Solved stationary allocation of the link-destruction model."""

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
    trade_prob: np.ndarray  # phi e^{-lam(phibar-phihat)} f_tilde
    e_hat: float
    qbar: float
    w: float
    mu: float
    nu: float
    rho_nm1: float
    f_tilde: float
    theta: float
    D: np.ndarray
    R_tilde: float
    chi1: float
    chi2: float
    m_tilde: float
    n_bar_star: float
    factors: OutputFactors
    Y: float
    W: float
    phi_dispersion: float
    foc_residual: np.ndarray
    n_iter: int
    boundary_flags: np.ndarray
    multiplicity_detected: bool
    mu_residual: float


def _wrap_links(raw: RawSolution, role: str) -> LinkSteadyState:
    from .solver import _mu_links_residual

    st = raw.state
    p = raw.params
    n = p.n_inputs
    trade_prob = st.phi * np.exp(-p.lam * (st.agg.phibar - st.agg.phihat)) * st.f_tilde
    survive = (1.0 - p.delta) * st.rho_nm1
    D = st.theta * p.lam * trade_prob / (1.0 - survive)
    r_tilde = resilience_links(st.agg.f, n, st.nu, p.delta)
    chi1, chi2 = chi_multipliers(st.agg.f, n, p.delta, st.mu, st.nu)
    chi_beta = p.beta * (1.0 - p.delta) / (1.0 + p.beta * (1.0 - p.delta))
    m_tilde = 1.0 - st.agg.f**n * chi_beta * chi2 / chi1
    factors = OutputFactors(st.mu, r_tilde, 1.0 / p.delta, n * st.e_hat)
    Y = factors.product
    W = Y + p.psi * np.log(1.0 - n * p.m * st.qbar)
    return LinkSteadyState(
        params=p, forms=raw.forms, grid=raw.grid, role=role,
        s=st.s, x=st.x, A=st.A, phi=st.phi,
        phibar=st.agg.phibar, phihat=st.agg.phihat, f=st.agg.f, G=st.agg.G,
        trade_prob=trade_prob, e_hat=st.e_hat, qbar=st.qbar, w=st.w,
        mu=st.mu, nu=st.nu, rho_nm1=st.rho_nm1, f_tilde=st.f_tilde,
        theta=st.theta, D=D, R_tilde=r_tilde,
        chi1=chi1, chi2=chi2, m_tilde=m_tilde,
        n_bar_star=1.0 / m_tilde,
        factors=factors, Y=Y, W=float(W),
        phi_dispersion=st.agg.dispersion,
        foc_residual=raw.foc_residual, n_iter=raw.n_iter,
        boundary_flags=raw.boundary_flags,
        multiplicity_detected=raw.multiplicity_detected,
        mu_residual=abs(_mu_links_residual(st.mu, st.agg.f, n, p.delta))
        if not raw.cfg.nest_baseline else 0.0,
    )


def solve_links(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    opts: SolveOptions | None = None,
    nest_baseline: bool = False,
) -> LinkSteadyState:
    """Stationary equilibrium with single-link destruction.

    ``nest_baseline`` forces nu = 0, full-retention rho = 1 in the demand and
    intertemporal factors, and activation mix f^(N-1): the specialization
    condition then collapses to the baseline dynamic one (equivalence test
    hook, not an economic scenario).
    """
    if params.delta >= 1.0:
        raise ValueError("link-destruction model requires delta < 1")
    cfg = VariantConfig(kind="links", nest_baseline=nest_baseline)
    raw = solve_profile(params, forms, grid, cfg, opts)
    return _wrap_links(raw, "equilibrium")


def solve_planner_links(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    opts: SolveOptions | None = None,
    steady_state_behavior: bool = False,
) -> LinkSteadyState:
    """Constrained-efficient allocation with link destruction.

    The network and search terms carry the chi1/chi2 multipliers; the
    equilibrium is efficient exactly when N equals 1/M_tilde(N), with
    M_tilde = 1 - f^N chi_beta chi2/chi1. ``steady_state_behavior`` swaps in
    the stationary-welfare-maximizing planner (see solve_planner_dynamic).
    """
    if params.delta >= 1.0:
        raise ValueError("link-destruction model requires delta < 1")
    cfg = VariantConfig(
        kind="links", role="planner",
        planner_flavor="steady-state" if steady_state_behavior else "recursive",
    )
    raw = solve_profile(params, forms, grid, cfg, opts)
    return _wrap_links(raw, "planner")


# ---------------------------------------------------------------------------
# Over-specialization grid scan


@dataclass(frozen=True)
class GridScanResult:
    """Scan of N - N_bar* over (delta, f, N) cells with the conservative
    1/2 bound on beta(1-delta)/(1+beta(1-delta))."""

    delta_grid: np.ndarray
    f_grid: np.ndarray
    n_set: np.ndarray
    values: np.ndarray  # (len(n_set), len(delta_grid), len(f_grid))
    min_value: float
    chi1_min: float
    chi2_sign_counts: dict

    def histogram(self, bins: int = 60) -> tuple[np.ndarray, np.ndarray]:
        return np.histogram(self.values.ravel(), bins=bins)


def _mu_links_vectorized(f: np.ndarray, n: float, delta: np.ndarray, iters: int = 80):
    """Bisection for the stationary searching mass over array-valued (f, delta)."""
    rho_nm1 = (1.0 - delta * (1.0 - f)) ** (n - 1.0)

    def residual(mu):
        nu = (delta / (1.0 - delta)) * (1.0 / mu - 1.0)
        q = (1.0 - f**n) * (1.0 - nu) + (1.0 - f * rho_nm1) * nu
        return delta * (1.0 - q * mu) + q * mu - mu

    lo = delta + 1e-12
    hi = np.ones_like(delta)
    g_lo = residual(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        g_mid = residual(mid)
        take_low = np.sign(g_mid) == np.sign(g_lo)
        lo = np.where(take_low, mid, lo)
        g_lo = np.where(take_low, g_mid, g_lo)
        hi = np.where(take_low, hi, mid)
    return 0.5 * (lo + hi)


def overspec_gridscan(
    delta_grid: np.ndarray,
    f_grid: np.ndarray,
    n_set: tuple = (2, 3, 4, 5, 6, 7, 8, 9, 10),
) -> GridScanResult:
    """Evaluate N - N_bar* over the scan grid.

    N_bar* = [1 - f^N (1/2) chi2/chi1]^(-1) bounds the efficiency knife-edge
    from above over all discount/disruption configurations. A strictly
    positive minimum means the link-destruction equilibrium over-specializes
    at every grid cell whenever production is complex.
    """
    delta_grid = np.asarray(delta_grid, dtype=float)
    f_grid = np.asarray(f_grid, dtype=float)
    if np.any((delta_grid <= 0) | (delta_grid >= 1)) or np.any((f_grid <= 0) | (f_grid >= 1)):
        raise ValueError("delta and f grids must lie strictly inside (0, 1)")
    n_set = np.asarray(sorted(n_set), dtype=float)
    if np.any(n_set < 2) or np.any(n_set > 10):
        raise ValueError("n_set must be within {2, ..., 10}")

    dd, ff = np.meshgrid(delta_grid, f_grid, indexing="ij")
    values = np.empty((n_set.size, delta_grid.size, f_grid.size))
    chi1_min = np.inf
    chi2_neg = 0
    chi2_pos = 0
    for i, n in enumerate(n_set):
        mu = _mu_links_vectorized(ff, n, dd)
        nu = (dd / (1.0 - dd)) * (1.0 / mu - 1.0)
        rho_n = (1.0 - dd * (1.0 - ff)) ** n
        rho_nm1 = (1.0 - dd * (1.0 - ff)) ** (n - 1.0)
        rho_nm2 = (1.0 - dd * (1.0 - ff)) ** (n - 2.0)
        f_tilde = nu * rho_nm1 + (1.0 - nu) * ff ** (n - 1.0)
        chi1 = (
            1.0
            - nu * (rho_n - dd * ff * rho_nm2) / f_tilde
            + (1.0 - dd) * (dd * ff * rho_nm2) / (1.0 - (1.0 - dd) * rho_nm1)
        )
        chi2 = (
            1.0 - (rho_nm1 - ff ** (n - 1.0)) / f_tilde * dd / ((1.0 - dd) * mu)
        ) * (
            (1.0 - nu)
            + (nu / n) * (rho_nm1 / ff ** (n - 1.0) + (n - 1.0) * dd * rho_nm2 / ff ** (n - 2.0))
        )
        n_bar = 1.0 / (1.0 - ff**n * 0.5 * chi2 / chi1)
        values[i] = n - n_bar
        chi1_min = min(chi1_min, float(chi1.min()))
        chi2_neg += int(np.sum(chi2 < 0))
        chi2_pos += int(np.sum(chi2 >= 0))
    return GridScanResult(
        delta_grid=delta_grid, f_grid=f_grid, n_set=n_set, values=values,
        min_value=float(values.min()),
        chi1_min=chi1_min,
        chi2_sign_counts={"negative": chi2_neg, "nonnegative": chi2_pos},
    )


def weakest_link(delta_vec, find_prob_vec) -> tuple[int, int]:
    """(endogenous, exogenous) weakest-link indices for heterogeneous inputs.

    Endogenous: argmax of delta_j * (1 - f_j), the joint probability that a
    link breaks and no replacement is found. Exogenous: argmax of delta_j
    alone. Ties resolve to the lowest index.
    """
    delta_vec = np.asarray(delta_vec, dtype=float)
    f_vec = np.asarray(find_prob_vec, dtype=float)
    if delta_vec.shape != f_vec.shape or delta_vec.ndim != 1:
        raise ValueError("delta and finding-probability vectors must be 1-d and match")
    endog = int(np.argmax(delta_vec * (1.0 - f_vec)))
    exog = int(np.argmax(delta_vec))
    return endog, exog
