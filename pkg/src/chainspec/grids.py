"""Productivity grid, quadrature, cumulative compatibility integrals, expectations.

Everything downstream of the primitives reduces to integrals against the
productivity density and to the cumulative compatibility integral

    phi_hat(z_a, z_b) = integral over [z_a, z_b] of phi(s(t)) gamma(t) dt.

The grid is composite Gauss-Legendre. Cumulative integrals are evaluated by
per-panel antiderivative accumulation: within a panel the integrand is the
interpolating polynomial through the panel's nodes, whose partial integral is
a fixed linear map of the node values. This keeps prefix integrals exactly
additive (phi_hat(a,b) + phi_hat(b,c) == phi_hat(a,c) to roundoff) and makes
the full-panel prefix coincide with the panel's Gauss weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forms import Distribution, FunctionalForms


def _panel_prefix_matrix(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Reference-panel machinery for k Gauss nodes on [-1, 1].

    Returns (nodes, weights, B, C) where B[i, j] = integral of the j-th
    Lagrange basis polynomial from -1 to node i, and C[j] holds the
    antiderivative coefficients of basis j (power series, constant chosen so
    the antiderivative vanishes at -1) for arbitrary-point evaluation.
    """
    x, w = np.polynomial.legendre.leggauss(k)
    B = np.empty((k, k))
    C = np.empty((k, k + 1))
    for j in range(k):
        roots = np.delete(x, j)
        coeffs = np.poly(roots)[::-1]  # power-series order
        coeffs /= np.prod(x[j] - roots)
        anti = np.concatenate([[0.0], coeffs / np.arange(1, k + 1)])
        anti[0] = -np.polynomial.polynomial.polyval(-1.0, anti)
        C[j] = anti
        B[:, j] = np.polynomial.polynomial.polyval(x, anti)
    return x, w, B, C


@dataclass(frozen=True)
class ZGrid:
    """Composite Gauss-Legendre grid over the productivity support.

    z        nodes, strictly increasing, interior to [z_low, z_high]
    w        quadrature weights for full-support integrals
    gamma    density values at the nodes
    prefix_mat  lower block matrix L with (L @ g)[i] = integral of g from
                z_low to z[i], g given by its node values
    """

    dist: Distribution
    z: np.ndarray
    w: np.ndarray
    gamma: np.ndarray
    panel_edges: np.ndarray
    nodes_per_panel: int
    prefix_mat: np.ndarray
    _ref: tuple = field(repr=False, default=())

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def z_low(self) -> float:
        return self.dist.z_low

    @property
    def z_high(self) -> float:
        return self.dist.z_high

    def integrate(self, values: np.ndarray) -> float:
        """Full-support integral of a node-valued integrand."""
        return float(self.w @ np.asarray(values, dtype=float))

    def prefix(self, values: np.ndarray) -> np.ndarray:
        """Cumulative integral from z_low to each node."""
        return self.prefix_mat @ np.asarray(values, dtype=float)

    def prefix_at(self, values: np.ndarray, z: float) -> float:
        """Cumulative integral from z_low to an arbitrary z in the support."""
        values = np.asarray(values, dtype=float)
        if not self.z_low - 1e-12 <= z <= self.z_high + 1e-12:
            raise ValueError(f"z={z} outside support [{self.z_low}, {self.z_high}]")
        z = min(max(z, self.z_low), self.z_high)
        x_ref, w_ref, _, C = self._ref
        k = self.nodes_per_panel
        p = min(int(np.searchsorted(self.panel_edges, z, side="right")) - 1,
                self.panel_edges.size - 2)
        a, b = self.panel_edges[p], self.panel_edges[p + 1]
        half = 0.5 * (b - a)
        total = 0.0
        for q in range(p):
            sl = slice(q * k, (q + 1) * k)
            hq = 0.5 * (self.panel_edges[q + 1] - self.panel_edges[q])
            total += hq * float(w_ref @ values[q * k:(q + 1) * k])
        t = (z - 0.5 * (a + b)) / half  # map to [-1, 1]
        basis_ints = np.array([np.polynomial.polynomial.polyval(t, C[j]) for j in range(k)])
        total += half * float(basis_ints @ values[p * k:(p + 1) * k])
        return total


def build_zgrid(dist: Distribution, n_nodes: int = 200, nodes_per_panel: int = 8) -> ZGrid:
    """Composite Gauss-Legendre grid with ~n_nodes nodes over the support."""
    if n_nodes < 8:
        raise ValueError("n_nodes must be >= 8")
    k = nodes_per_panel
    n_panels = max(1, round(n_nodes / k))
    x_ref, w_ref, B, C = _panel_prefix_matrix(k)
    edges = np.linspace(dist.z_low, dist.z_high, n_panels + 1)
    halves = 0.5 * np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    z = (mids[:, None] + halves[:, None] * x_ref[None, :]).ravel()
    w = (halves[:, None] * w_ref[None, :]).ravel()

    n = z.size
    L = np.zeros((n, n))
    for p in range(n_panels):
        rows = slice(p * k, (p + 1) * k)
        for q in range(p):
            L[rows, q * k:(q + 1) * k] = halves[q] * w_ref[None, :]
        L[rows, rows] = halves[p] * B
    return ZGrid(
        dist=dist, z=z, w=w, gamma=dist.pdf(z),
        panel_edges=edges, nodes_per_panel=k, prefix_mat=L,
        _ref=(x_ref, w_ref, B, C),
    )


@dataclass(frozen=True)
class CompatAggregates:
    """Compatibility aggregates induced by a specialization profile.

    phibar      mean compatibility, integral of phi(s(z)) gamma(z)
    phihat      cumulative integral from z_low to each node
    f           input finding probability 1 - exp(-lam * phibar)
    G           surplus-offer CDF values phihat / phibar at the nodes
    dispersion  var(phi)/mean(phi) under gamma; diagnostic for the Poisson
                approximation (small is good), reported but never enforced
    """

    lam: float
    phibar: float
    phihat: np.ndarray
    f: float
    G: np.ndarray
    dispersion: float


def finding_prob(lam: float, phibar: float) -> float:
    """Probability a searching buyer finds at least one compatible supplier."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    if not 0.0 <= phibar <= 1.0:
        raise ValueError(f"phibar must be in [0, 1], got {phibar}")
    return float(-np.expm1(-lam * phibar))


def compat_aggregates(grid: ZGrid, phi_vals: np.ndarray, lam: float) -> CompatAggregates:
    """Aggregate a node-valued compatibility profile phi(s(z_i))."""
    phi_vals = np.asarray(phi_vals, dtype=float)
    g = phi_vals * grid.gamma
    phibar = grid.integrate(g)
    phihat = grid.prefix(g)
    mean = phibar
    var = grid.integrate((phi_vals - mean) ** 2 * grid.gamma)
    return CompatAggregates(
        lam=lam,
        phibar=phibar,
        phihat=phihat,
        f=finding_prob(lam, phibar),
        G=phihat / phibar if phibar > 0 else np.zeros_like(phihat),
        dispersion=var / mean if mean > 0 else np.inf,
    )


def phi_hat(
    grid: ZGrid,
    forms: FunctionalForms,
    s_profile: np.ndarray,
    z_a: float,
    z_b: float,
) -> float:
    """Partial compatibility integral of phi(s(t)) gamma(t) over [z_a, z_b]."""
    if z_b < z_a:
        raise ValueError(f"reversed bounds: z_a={z_a} > z_b={z_b}")
    g = forms.phi(np.asarray(s_profile, dtype=float)) * grid.gamma
    return grid.prefix_at(g, z_b) - grid.prefix_at(g, z_a)


def expect_best_below(
    grid: ZGrid,
    agg: CompatAggregates,
    phi_vals: np.ndarray,
    values: np.ndarray,
) -> np.ndarray:
    """E over the best compatible supplier with productivity <= z_i, per node.

    Returns the vector x with
    x[i] = integral_{z_low}^{z_i} values(t) e^{-lam phi_hat(t, z_i)} lam phi(t) gamma(t) dt.
    """
    lam = agg.lam
    c = 0.5 * lam * agg.phibar
    u = np.asarray(values, dtype=float) * lam * phi_vals * grid.gamma * np.exp(lam * agg.phihat - c)
    return np.exp(c - lam * agg.phihat) * (grid.prefix_mat @ u)


def expect_best_below_at(
    grid: ZGrid,
    agg: CompatAggregates,
    phi_vals: np.ndarray,
    values: np.ndarray,
    z: float,
) -> float:
    """Same as :func:`expect_best_below` at an arbitrary z in the support."""
    lam = agg.lam
    c = 0.5 * lam * agg.phibar
    u = np.asarray(values, dtype=float) * lam * phi_vals * grid.gamma * np.exp(lam * agg.phihat - c)
    g = phi_vals * grid.gamma
    phihat_z = grid.prefix_at(g, z)
    return float(np.exp(c - lam * phihat_z) * grid.prefix_at(u, z))


def expect_best(grid: ZGrid, agg: CompatAggregates, phi_vals: np.ndarray, values: np.ndarray) -> float:
    """E over the best compatible supplier on the whole support (mass f < 1)."""
    lam = agg.lam
    weight = lam * phi_vals * grid.gamma * np.exp(-lam * (agg.phibar - agg.phihat))
    return grid.integrate(np.asarray(values, dtype=float) * weight)


def expectation(
    kind: str,
    grid: ZGrid,
    forms: FunctionalForms,
    lam: float,
    s_profile: np.ndarray,
    values: np.ndarray,
    z: float | None = None,
) -> float:
    """Expectation operators over the productivity distribution.

    kind:
      "plain"    integral of values * gamma
      "max_all"  best compatible contacted supplier over the full support
                 (integrates to f for values == 1)
      "max_leq"  best compatible contacted supplier below ``z``
      "active"   max_all normalized by f (distribution of active matches)
    """
    values = np.asarray(values, dtype=float)
    if kind == "plain":
        return grid.integrate(values * grid.gamma)
    phi_vals = forms.phi(np.asarray(s_profile, dtype=float))
    agg = compat_aggregates(grid, phi_vals, lam)
    if kind == "max_all":
        return expect_best(grid, agg, phi_vals, values)
    if kind == "max_leq":
        if z is None:
            raise ValueError("kind 'max_leq' requires z")
        return expect_best_below_at(grid, agg, phi_vals, values, z)
    if kind == "active":
        if agg.f <= 0:
            raise ZeroDivisionError("active expectation undefined at f = 0")
        return expect_best(grid, agg, phi_vals, values) / agg.f
    raise ValueError(f"unknown expectation kind {kind!r}")
