"""Comparison policies operating on continuous channel gains.

All functions accept gains of shape ``(K, K, B)`` or a batch
``(n, K, K, B)`` and return powers ``(K, B)`` / ``(n, K, B)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

KINDS = ("goodman_inversion", "iwfa", "bpc_cs", "full_power")


@dataclass(frozen=True)
class BaselinePolicy:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}")
        for k, v in self.params.items():
            if v is not None and v <= 0:
                raise ValueError(f"baseline parameter {k} must be positive")

    def powers(self, scenario, gains):
        if self.kind == "goodman_inversion":
            return goodman_equilibrium(scenario, gains, self.params["beta"],
                                       int(self.params.get("max_iters", 200)))[0]
        if self.kind == "iwfa":
            return iwfa(scenario, gains, int(self.params.get("max_rounds", 200)))[0]
        if self.kind == "bpc_cs":
            return bpc_cs(scenario, gains)
        return full_power(scenario, gains)


def goodman_target_sinr(psi, upper=1e4):
    """Positive root of ``x psi'(x) = psi(x)``, the SINR maximizing ``psi(x)/x``.

    Raises ``ValueError`` when ``psi`` has no interior root (e.g. a single
    packet, ``M = 1``, or the Shannon form).
    """
    if psi.name == "outage":
        return float(psi.param)
    if psi.name == "shannon" or (psi.name == "packet_success" and int(psi.param) < 2):
        raise ValueError(f"psi={psi.name}({psi.param}) has no positive root of x psi' = psi")

    def h(x):
        # x psi'(x) - psi(x), divided by (1 - e^-x)^(M-1) > 0
        m = int(psi.param)
        return m * x * np.exp(-x) + np.expm1(-x)

    lo, hi = 1e-6, 1.0
    while h(hi) > 0:
        hi *= 2
        if hi > upper:
            raise ValueError("no sign change found for x psi' = psi")
    if h(lo) <= 0:
        raise ValueError("no positive root of x psi' = psi")
    return float(optimize.brentq(h, lo, hi, xtol=1e-14, rtol=1e-12))


def _batch(gains):
    g = np.asarray(gains, dtype=float)
    return (g[None], True) if g.ndim == 3 else (g, False)


def _interference(gains, powers, noise, i):
    """Noise plus interference at receiver ``i`` on every band, ``(n, B)``."""
    received = np.einsum("njb,njb->nb", gains[:, :, i, :], powers)
    return noise + received - gains[:, i, i, :] * powers[:, i, :]


def goodman_equilibrium(scenario, gains, beta, max_iters=200, tol=1e-9):
    """Sequential best responses ``a_i = min(P_max, beta (noise + I_i) / g_ii)``.

    With several bands each transmitter uses only the band needing the least
    power to reach ``beta`` (ties to the lowest band). Returns
    ``(powers, converged)``.
    """
    g, single = _batch(gains)
    n, K, B = g.shape[0], scenario.K, scenario.B
    p = np.zeros((n, K, B))
    converged = np.zeros(n, bool)
    for _ in range(max_iters):
        prev = p.copy()
        for i in range(K):
            need = beta * _interference(g, p, scenario.noise, i) / g[:, i, i, :]
            band = np.argmin(need, axis=1)
            p[:, i, :] = 0.0
            p[np.arange(n), i, band] = np.minimum(scenario.p_max, need[np.arange(n), band])
        converged = np.abs(p - prev).max(axis=(1, 2)) < tol
        if converged.all():
            break
    return (p[0], bool(converged[0])) if single else (p, converged)


def water_fill(floors, budget, cap):
    """``a_b = clip(mu - floors_b, 0, cap)`` with ``sum_b a_b = min(budget, B cap)``.

    ``floors`` has shape ``(n, B)``. The total is piecewise linear in the
    water level ``mu`` with breakpoints at ``floors`` and ``floors + cap``,
    so ``mu`` is found exactly by interpolating between breakpoints.
    """
    floors = np.atleast_2d(np.asarray(floors, dtype=float))
    B = floors.shape[-1]
    target = min(budget, B * cap)
    knots = np.sort(np.concatenate([floors, floors + cap], axis=-1), axis=-1)  # (n, 2B)
    totals = np.clip(knots[:, :, None] - floors[:, None, :], 0.0, cap).sum(axis=-1)
    k = np.clip((totals < target).sum(axis=-1), 1, 2 * B - 1)  # first knot reaching target
    rows = np.arange(len(floors))
    x0, x1 = knots[rows, k - 1], knots[rows, k]
    t0, t1 = totals[rows, k - 1], totals[rows, k]
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.where(t1 > t0, x0 + (target - t0) * (x1 - x0) / (t1 - t0), x1)
    return np.clip(mu[:, None] - floors, 0.0, cap), mu


def iwfa(scenario, gains, max_rounds=200, tol=1e-9):
    """Iterative water-filling: each user in turn water-fills its total
    budget over the bands against the interference it currently measures.
    Per-band powers are capped at ``P_max`` inside the water-filling.
    Returns ``(powers, converged)``."""
    g, single = _batch(gains)
    n, K, B = g.shape[0], scenario.K, scenario.B
    p = np.zeros((n, K, B))
    converged = np.zeros(n, bool)
    for _ in range(max_rounds):
        prev = p.copy()
        for i in range(K):
            floors = _interference(g, p, scenario.noise, i) / g[:, i, i, :]
            p[:, i, :], _ = water_fill(floors, scenario.p_total, scenario.p_max)
        converged = np.abs(p - prev).max(axis=(1, 2)) < tol
        if converged.all():
            break
    return (p[0], bool(converged[0])) if single else (p, converged)


def bpc_cs(scenario, gains):
    """Full power on the band with the largest direct gain (lowest index on ties)."""
    g, single = _batch(gains)
    n, K = g.shape[0], scenario.K
    direct = g[:, np.arange(K), np.arange(K), :]  # (n, K, B)
    band = np.argmax(direct, axis=2)
    p = np.zeros((n, K, scenario.B))
    p[np.arange(n)[:, None], np.arange(K)[None, :], band] = scenario.p_max
    return p[0] if single else p


def full_power(scenario, gains):
    """Equal split of the total budget over the bands, capped at ``P_max``."""
    g, single = _batch(gains)
    per_band = min(scenario.p_max, scenario.p_total / scenario.B)
    p = np.full((g.shape[0], scenario.K, scenario.B), per_band)
    return p[0] if single else p
