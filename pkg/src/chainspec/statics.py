"""Static equilibrium: surplus posting plus specialization fixed point.

Includes the baseline (contingent contracts, surplus posting), the
non-contingent-contract variant (suppliers paid regardless of production
halts, so their trading probability loses the f^(N-1) factor), and the
bargaining variant (buyers hold weight xi; xi = 0 reproduces the baseline).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forms import FunctionalForms, ModelParams
from .grids import (
    ZGrid,
    compat_aggregates,
    expect_best,
    expect_best_below,
    expect_best_below_at,
)
from .solver import RawSolution, SolveOptions, VariantConfig, solve_profile


@dataclass(frozen=True)
class StaticEquilibrium:
    """Solved static allocation (equilibrium or planner)."""

    params: ModelParams
    forms: FunctionalForms
    grid: ZGrid
    role: str
    variant: str  # "baseline" | "noncontingent" | "bargaining(xi)"
    s: np.ndarray
    x: np.ndarray
    A: np.ndarray
    phi: np.ndarray
    phibar: float
    phihat: np.ndarray
    f: float
    G: np.ndarray
    trade_prob: np.ndarray  # P_i = phi_i e^{-lam(phibar-phihat_i)} f^(N-1)
    e_hat: float
    qbar: float
    w: float
    Y: float
    W: float
    phi_dispersion: float
    foc_residual: np.ndarray
    n_iter: int
    boundary_flags: np.ndarray
    multiplicity_detected: bool

    @property
    def demand(self) -> np.ndarray:
        """Per-period matches per supplier, theta * lam * P(z)."""
        return (1.0 / self.params.m) * self.params.lam * self.trade_prob


def static_output(f: float, n_inputs: float, e_hat: float) -> float:
    """Expected output f^N * N * E[A | active]."""
    return f**n_inputs * n_inputs * e_hat


def _wrap_static(raw: RawSolution, variant: str, role: str) -> StaticEquilibrium:
    st = raw.state
    p = raw.params
    n = p.n_inputs
    trade_prob = st.phi * np.exp(-p.lam * (st.agg.phibar - st.agg.phihat)) * st.agg.f ** (n - 1.0)
    Y = static_output(st.agg.f, n, st.e_hat)
    W = Y + p.psi * np.log(1.0 - n * p.m * st.qbar)
    return StaticEquilibrium(
        params=p, forms=raw.forms, grid=raw.grid, role=role, variant=variant,
        s=st.s, x=st.x, A=st.A, phi=st.phi,
        phibar=st.agg.phibar, phihat=st.agg.phihat, f=st.agg.f, G=st.agg.G,
        trade_prob=trade_prob, e_hat=st.e_hat, qbar=st.qbar, w=st.w,
        Y=Y, W=float(W), phi_dispersion=st.agg.dispersion,
        foc_residual=raw.foc_residual, n_iter=raw.n_iter,
        boundary_flags=raw.boundary_flags,
        multiplicity_detected=raw.multiplicity_detected,
    )


def solve_static(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    opts: SolveOptions | None = None,
    variant: str = "baseline",
    xi: float = 0.0,
) -> StaticEquilibrium:
    """Solve the static equilibrium (or a contract variant).

    variant: "baseline", "noncontingent", or "bargaining" (with buyer weight
    ``xi``; xi = 0 is identical to the baseline).
    """
    if variant not in ("baseline", "noncontingent", "bargaining"):
        raise ValueError(f"unknown static variant {variant!r}")
    cfg = VariantConfig(
        kind="static",
        noncontingent=(variant == "noncontingent"),
        xi=xi if variant == "bargaining" else 0.0,
    )
    raw = solve_profile(params, forms, grid, cfg, opts)
    tag = f"bargaining({xi})" if variant == "bargaining" else variant
    return _wrap_static(raw, tag, "equilibrium")


def solve_planner_static(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    opts: SolveOptions | None = None,
) -> StaticEquilibrium:
    """Constrained-efficient static allocation (network term internalized)."""
    cfg = VariantConfig(kind="static", role="planner")
    raw = solve_profile(params, forms, grid, cfg, opts)
    return _wrap_static(raw, "baseline", "planner")


def offered_surplus(
    grid: ZGrid,
    forms: FunctionalForms,
    lam: float,
    s_profile: np.ndarray,
) -> np.ndarray:
    """Equilibrium surplus offered to buyers, per node.

    x(z) is the expected surplus of the best compatible contacted supplier
    with productivity below z (the buyer's outside option); x(z_low) = 0 and
    x is nondecreasing.
    """
    s_profile = np.asarray(s_profile, dtype=float)
    phi = forms.phi(s_profile)
    agg = compat_aggregates(grid, phi, lam)
    A = forms.surplus(s_profile, grid.z)
    return expect_best_below(grid, agg, phi, A)


def offered_surplus_at(
    grid: ZGrid,
    forms: FunctionalForms,
    lam: float,
    s_profile: np.ndarray,
    z: float,
) -> float:
    """Offered surplus evaluated at an arbitrary z in the support."""
    s_profile = np.asarray(s_profile, dtype=float)
    phi = forms.phi(s_profile)
    agg = compat_aggregates(grid, phi, lam)
    A = forms.surplus(s_profile, grid.z)
    return expect_best_below_at(grid, agg, phi, A, z)


def output_and_welfare_static(eq: StaticEquilibrium) -> tuple[float, float]:
    """(Y, W) of a solved static allocation."""
    return eq.Y, eq.W


def welfare_functional_static(
    params: ModelParams,
    forms: FunctionalForms,
    grid: ZGrid,
    s: np.ndarray,
) -> float:
    """Static welfare of an arbitrary specialization profile.

    W = f^N N E[A | active] + psi log(1 - N m qbar); used for planner
    optimality checks and for finite-difference validation of the analytic
    welfare gradient.
    """
    s = np.asarray(s, dtype=float)
    phi = forms.phi(s)
    agg = compat_aggregates(grid, phi, params.lam)
    A = forms.surplus(s, grid.z)
    e_max = expect_best(grid, agg, phi, A)
    qbar = grid.integrate(forms.q(s) * grid.gamma)
    labor = params.n_inputs * params.m * qbar
    if labor >= 1.0:
        return -np.inf
    n = params.n_inputs
    Y = agg.f ** (n - 1.0) * n * e_max
    return float(Y + params.psi * np.log(1.0 - labor))
