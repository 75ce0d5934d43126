"""Scenarios, discrete alphabets, SINR and the instantaneous utility family.

Gains are stored as arrays indexed ``[..., tx, rx, band]`` so that
``gains[..., i, j, b]`` is the gain of the link from transmitter ``i`` to
receiver ``j`` on band ``b``. Powers are indexed ``[..., tx, band]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TOPOLOGIES = ("interference", "mac")

# Normalized mobile-station coordinates of the nine-cell small-cell layout.
SMALLCELL_MS_COORDS = (
    (3.8, 3.2), (7.9, 1.4), (10.2, 0.7),
    (2.3, 5.9), (6.6, 5.9), (14.1, 9.3),
    (1.8, 10.6), (7.1, 14.6), (12.5, 10.7),
)
SMALLCELL_D0 = 5.0


def db2lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm2watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def power_grid(p_max, n_levels, spacing="uniform", p_min=None):
    """Admissible per-band power values, ascending and starting at zero.

    ``spacing="uniform"`` gives ``n_levels`` equally spaced values on
    ``[0, p_max]``. ``spacing="log"`` gives zero plus ``n_levels - 1``
    geometrically spaced values on ``[p_min, p_max]`` (``p_min`` defaults to
    ``p_max * 1e-4``).
    """
    if n_levels < 2:
        raise ValueError("need at least two power levels (zero and p_max)")
    if spacing == "uniform":
        return np.linspace(0.0, p_max, n_levels)
    if spacing == "log":
        p_min = p_max * 1e-4 if p_min is None else p_min
        if not 0 < p_min < p_max:
            raise ValueError("log grid needs 0 < p_min < p_max")
        return np.concatenate(([0.0], np.geomspace(p_min, p_max, n_levels - 1)))
    raise ValueError(f"unknown power grid spacing {spacing!r}")


@dataclass(frozen=True)
class ActionAlphabet:
    """Enumerated power vectors of one transmitter, shape ``(n_actions, B)``.

    Ordered by total power, ties broken lexicographically, so that a lower
    index never means more radiated power.
    """

    actions: np.ndarray

    def __len__(self):
        return len(self.actions)

    @classmethod
    def enumerate(cls, power_levels, n_bands, p_max, p_total):
        levels = np.asarray(power_levels, dtype=float)
        vecs = [v for v in itertools.product(levels, repeat=n_bands)
                if max(v) <= p_max * (1 + 1e-12) and sum(v) <= p_total * (1 + 1e-12)]
        vecs = np.array(sorted(set(vecs), key=lambda v: (sum(v), v)), dtype=float)
        return cls(vecs.reshape(-1, n_bands))


@dataclass(frozen=True, eq=False)
class Scenario:
    """Full network description.

    ``gain_means[i, j, b]`` is the mean gain from transmitter ``i`` to
    receiver ``j`` on band ``b``. With ``topology="mac"`` all transmitters
    share one receiver; the tensor then satisfies ``gain_means[i, j, b] ==
    gain_means[i, i, b]`` for every ``j`` and only ``K * B`` gains fade
    independently.
    """

    K: int
    B: int
    p_max: float
    p_total: float
    noise: float
    p0: float
    r0: float
    gain_means: np.ndarray
    power_levels: np.ndarray
    topology: str = "interference"

    def __post_init__(self):
        gm = np.asarray(self.gain_means, dtype=float)
        if gm.shape != (self.K, self.K, self.B):
            raise ValueError(f"gain_means must have shape {(self.K, self.K, self.B)}, got {gm.shape}")
        levels = np.asarray(self.power_levels, dtype=float)
        object.__setattr__(self, "gain_means", gm)
        object.__setattr__(self, "power_levels", levels)
        if self.K < 1 or self.B < 1:
            raise ValueError("K and B must be >= 1")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if not np.all(gm > 0):
            raise ValueError("all gain means must be positive")
        if self.noise <= 0:
            raise ValueError("noise power must be positive")
        if self.p_total < self.p_max:
            raise ValueError("p_total must be >= p_max")
        if self.p0 < 0 or self.r0 <= 0:
            raise ValueError("p0 must be >= 0 and r0 > 0")
        if levels.ndim != 1 or len(levels) < 1 or np.any(np.diff(levels) <= 0):
            raise ValueError("power_levels must be strictly ascending")
        if levels[0] < 0 or levels[-1] > self.p_max * (1 + 1e-12):
            raise ValueError("power_levels must lie in [0, p_max]")
        if self.topology == "mac":
            diag = gm[np.arange(self.K), np.arange(self.K)]
            if not np.allclose(gm, diag[:, None, :]):
                raise ValueError("mac topology needs gain_means[i, j] == gain_means[i, i]")

    @cached_property
    def actions(self) -> ActionAlphabet:
        return ActionAlphabet.enumerate(self.power_levels, self.B, self.p_max, self.p_total)

    def action_alphabets(self):
        """Per-transmitter action alphabets (identical for every transmitter)."""
        return [self.actions] * self.K

    @cached_property
    def link_variables(self):
        """Independently fading gains, as a tuple of ``(i, j, b)`` cell groups.

        Each variable fills every ``(i, j, b)`` entry of its group with the
        same value; a group is a single link for interference networks and a
        full row ``(i, *, b)`` for the MAC.
        """
        groups = []
        if self.topology == "interference":
            for i, j, b in itertools.product(range(self.K), range(self.K), range(self.B)):
                groups.append(((i, j, b),))
        else:
            for i, b in itertools.product(range(self.K), range(self.B)):
                groups.append(tuple((i, j, b) for j in range(self.K)))
        return tuple(groups)

    def variable_means(self):
        return np.array([self.gain_means[g[0]] for g in self.link_variables])

    def gains_from_variables(self, values):
        """Map ``(..., n_vars)`` variable values to a ``(..., K, K, B)`` tensor."""
        values = np.asarray(values, dtype=float)
        out = np.empty(values.shape[:-1] + (self.K, self.K, self.B))
        for v, group in enumerate(self.link_variables):
            for i, j, b in group:
                out[..., i, j, b] = values[..., v]
        return out


def interference_scenario(K=2, B=1, *, direct_mean=1.0, cross_mean=None, cross_db=5.0,
                          noise=0.01, p_max=0.1, p_total=None, p0=0.0, r0=1e6,
                          n_levels=75, spacing="uniform", power_levels=None):
    """Symmetric interference network with equal direct and equal cross means.

    ``cross_db`` is the direct-to-cross mean ratio in dB; ``cross_mean``
    overrides it.
    """
    if cross_mean is None:
        cross_mean = direct_mean / db2lin(cross_db)
    gm = np.full((K, K, B), float(cross_mean))
    gm[np.arange(K), np.arange(K)] = direct_mean
    if power_levels is None:
        power_levels = power_grid(p_max, n_levels, spacing)
    return Scenario(K=K, B=B, p_max=p_max, p_total=p_max if p_total is None else p_total,
                    noise=noise, p0=p0, r0=r0, gain_means=gm,
                    power_levels=power_levels, topology="interference")


def mac_scenario(K=2, B=1, *, gain_mean=1.0, noise=0.01, p_max=0.1, p_total=None,
                 p0=0.0, r0=1e6, n_levels=2, spacing="uniform", power_levels=None):
    """Multiple access channel where every transmitter has the same mean gain."""
    means = np.broadcast_to(np.asarray(gain_mean, dtype=float), (K,))
    gm = np.repeat(np.repeat(means[:, None, None], K, axis=1), B, axis=2)
    if power_levels is None:
        power_levels = power_grid(p_max, n_levels, spacing)
    return Scenario(K=K, B=B, p_max=p_max, p_total=p_max if p_total is None else p_total,
                    noise=noise, p0=p0, r0=r0, gain_means=gm,
                    power_levels=power_levels, topology="mac")


def build_smallcell_scenario(isd, ms_coords=SMALLCELL_MS_COORDS, sbs_coords=None, *,
                             d0=SMALLCELL_D0, B=1, p_max=10.0, noise=0.01, p0=0.01,
                             r0=1e6, n_levels=16, spacing="uniform", power_levels=None):
    """Small-cell network with mean gains ``(d0 / d_ij)**2``.

    Coordinates are normalized: a unit in ``ms_coords`` / ``sbs_coords``
    corresponds to ``isd / d0`` meters. When ``sbs_coords`` is omitted the
    base stations sit at the centers of a ``sqrt(K) x sqrt(K)`` grid of
    cells with side ``d0`` normalized units.
    """
    ms = np.asarray(ms_coords, dtype=float)
    K = len(ms)
    if sbs_coords is None:
        side = int(round(np.sqrt(K)))
        if side * side != K:
            raise ValueError("K must be a perfect square when sbs_coords is omitted")
        sbs = np.array([((c + 0.5) * d0, (r + 0.5) * d0) for r in range(side) for c in range(side)])
    else:
        sbs = np.asarray(sbs_coords, dtype=float)
    if sbs.shape != ms.shape or ms.shape[1] != 2:
        raise ValueError("need one 2-D base-station coordinate per mobile station")
    if np.any(ms < 0) or np.any(sbs < 0):
        raise ValueError("coordinates must be nonnegative")
    scale = isd / d0
    # transmitter i = SBS_i, receiver j = MS_j
    dist = np.linalg.norm(sbs[:, None, :] - ms[None, :, :], axis=-1) * scale
    if np.any(dist == 0):
        raise ValueError("coincident transmitter and receiver")
    gm = np.repeat(((d0 / dist) ** 2)[:, :, None], B, axis=2)
    if power_levels is None:
        power_levels = power_grid(p_max, n_levels, spacing)
    return Scenario(K=K, B=B, p_max=p_max, p_total=p_max, noise=noise, p0=p0, r0=r0,
                    gain_means=gm, power_levels=power_levels)


# -- utilities --------------------------------------------------------------

@dataclass(frozen=True)
class Psi:
    """Net-rate function applied to an SINR.

    ``packet_success``: ``(1 - exp(-x))**M``; ``outage``: ``exp(-c / x)``;
    ``shannon``: ``log2(1 + x)``.
    """

    name: str
    param: float | None = None

    def __post_init__(self):
        if self.name == "packet_success":
            if self.param is None or self.param < 1 or int(self.param) != self.param:
                raise ValueError("packet_success needs an integer M >= 1")
        elif self.name == "outage":
            if self.param is None or self.param <= 0:
                raise ValueError("outage needs c > 0")
        elif self.name != "shannon":
            raise ValueError(f"unknown psi {self.name!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "packet_success":
            return (-np.expm1(-x)) ** int(self.param)
        if self.name == "outage":
            with np.errstate(divide="ignore"):
                return np.where(x > 0, np.exp(-self.param / np.where(x > 0, x, 1.0)), 0.0)
        return np.log2(1.0 + x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "packet_success":
            m = int(self.param)
            return m * np.exp(-x) * (-np.expm1(-x)) ** (m - 1)
        if self.name == "outage":
            return self.param / x**2 * np.exp(-self.param / x)
        return 1.0 / ((1.0 + x) * np.log(2.0))


@dataclass(frozen=True)
class UtilitySpec:
    kind: str
    psi: Psi = field(default_factory=lambda: Psi("shannon"))
    weights: tuple = (0.5, 0.5)

    def __post_init__(self):
        if self.kind not in ("energy_efficiency", "shannon_rate"):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must lie in the unit simplex")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    def with_weights(self, weights):
        return UtilitySpec(self.kind, self.psi, tuple(weights))


def energy_efficiency(psi, K, weights=None):
    weights = (1.0 / K,) * K if weights is None else weights
    return UtilitySpec("energy_efficiency", psi, weights)


def shannon_rate(K, weights=None):
    weights = (1.0 / K,) * K if weights is None else weights
    return UtilitySpec("shannon_rate", Psi("shannon"), weights)


def sinr_array(gains, powers, noise):
    """Per-user, per-band SINR for broadcastable ``(..., K, K, B)`` gains and
    ``(..., K, B)`` powers."""
    gains = np.asarray(gains, dtype=float)
    powers = np.asarray(powers, dtype=float)
    K = gains.shape[-2]
    direct = gains[..., np.arange(K), np.arange(K), :]
    signal = direct * powers
    received = (gains * powers[..., :, None, :]).sum(axis=-3)
    interference = np.maximum(received - signal, 0.0)
    return signal / (noise + interference)


def utility_array(spec, scenario, gains, powers):
    """Instantaneous utilities ``(..., K)`` for every transmitter."""
    gamma = sinr_array(gains, powers, scenario.noise)
    if spec.kind == "shannon_rate":
        return np.log2(1.0 + gamma).sum(axis=-1)
    rate = scenario.r0 * spec.psi(gamma).sum(axis=-1)
    spent = np.asarray(powers, dtype=float).sum(axis=-1) + scenario.p0
    spent = np.broadcast_to(spent, rate.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(spent > 0, rate / np.where(spent > 0, spent, 1.0), 0.0)


def weighted_utility_array(spec, scenario, gains, powers):
    return utility_array(spec, scenario, gains, powers) @ np.asarray(spec.weights)


def _check_indices(scenario, i, b=None):
    if not 0 <= i < scenario.K:
        raise IndexError(f"transmitter index {i} out of range")
    if b is not None and not 0 <= b < scenario.B:
        raise IndexError(f"band index {b} out of range")


def _as_state(scenario, state):
    g = np.asarray(state, dtype=float)
    return g.reshape(scenario.K, scenario.K, scenario.B)


def _as_actions(scenario, actions):
    return np.asarray(actions, dtype=float).reshape(scenario.K, scenario.B)


def sinr(scenario, state, actions, i, b=0):
    """SINR of transmitter ``i`` on band ``b``.

    ``state`` is a gain vector in ``(g_11^1..g_11^B, g_12^1, ...)`` order (or
    the equivalent ``(K, K, B)`` array); ``actions`` holds one power vector
    per transmitter.
    """
    _check_indices(scenario, i, b)
    return float(sinr_array(_as_state(scenario, state), _as_actions(scenario, actions),
                            scenario.noise)[i, b])


def instantaneous_utility(spec, scenario, state, actions, i):
    _check_indices(scenario, i)
    return float(utility_array(spec, scenario, _as_state(scenario, state),
                               _as_actions(scenario, actions))[i])


def weighted_utility(spec, scenario, state, actions):
    return float(weighted_utility_array(spec, scenario, _as_state(scenario, state),
                                        _as_actions(scenario, actions)))
