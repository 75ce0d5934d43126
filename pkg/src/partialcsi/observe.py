"""Discrete channel-state alphabets and observation structures.

A :class:`StateAlphabet` is the product of one :class:`GainQuantizer` per
independently fading variable of a scenario. An :class:`ObservationModel`
holds, for every transmitter, the conditional law of its signal given the
global state index. Deterministic structures are stored as an index map
``state -> signal``; noisy ones as a dense column-stochastic matrix.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse, stats

STRUCTURES = ("global", "direct", "local", "individual", "noisy_individual", "constant", "custom")


@dataclass(frozen=True, eq=False)
class GainQuantizer:
    """Scalar quantizer on a gain: ``N - 1`` boundaries, ``N`` representatives."""

    boundaries: np.ndarray
    representatives: np.ndarray
    cell_probs: np.ndarray

    def __post_init__(self):
        bnd = np.atleast_1d(np.asarray(self.boundaries, dtype=float))
        rep = np.atleast_1d(np.asarray(self.representatives, dtype=float))
        prob = np.atleast_1d(np.asarray(self.cell_probs, dtype=float))
        if len(rep) != len(bnd) + 1 or len(prob) != len(rep):
            raise ValueError("need N representatives, N probabilities and N-1 boundaries")
        if np.any(np.diff(rep) <= 0) or np.any(np.diff(bnd) <= 0):
            raise ValueError("representatives and boundaries must be strictly increasing")
        if np.any(rep[:-1] > bnd) or np.any(rep[1:] < bnd):
            raise ValueError("each representative must lie inside its cell")
        if np.any(prob < 0) or abs(prob.sum() - 1.0) > 1e-9:
            raise ValueError("cell probabilities must form a distribution")
        object.__setattr__(self, "boundaries", bnd)
        object.__setattr__(self, "representatives", rep)
        object.__setattr__(self, "cell_probs", prob)

    @property
    def n_cells(self):
        return len(self.representatives)

    def cell_of(self, values):
        """Cell index of each value; values below the first boundary
        (negative ones included) land in cell 0."""
        return np.searchsorted(self.boundaries, values, side="right")

    def quantize(self, values):
        return self.representatives[self.cell_of(values)]

    @classmethod
    def fixed(cls, value):
        """Single-cell quantizer for a gain that does not fade."""
        return cls(np.empty(0), np.array([float(value)]), np.array([1.0]))

    @classmethod
    def from_levels(cls, levels, probs=None):
        """Quantizer over an already discrete law; boundaries at midpoints."""
        levels = np.asarray(levels, dtype=float)
        probs = np.full(len(levels), 1.0 / len(levels)) if probs is None else probs
        return cls(0.5 * (levels[1:] + levels[:-1]), levels, probs)


def exponential_gain_law(mean):
    """Law of ``|h|**2`` for a circular complex Gaussian ``h`` with
    ``E|h|**2 = mean``."""
    return stats.expon(scale=mean)


def max_entropy_quantize(gain_law, n_cells):
    """Equiprobable quantizer of a continuous gain law.

    Cell boundaries sit at the CDF quantiles ``k / N`` and the representative
    of each cell is the conditional mean of the gain inside it. Quantizing
    the Rayleigh modulus ``|h|`` with equiprobable cells induces the same
    partition on ``g = |h|**2`` because squaring is monotone, so the law is
    given directly on the gain.
    """
    n_cells = int(n_cells)
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    q = np.arange(1, n_cells) / n_cells
    bnd = np.asarray(gain_law.ppf(q), dtype=float)
    if not np.all(np.isfinite(bnd)) or np.any(np.diff(bnd) <= 0):
        raise ValueError("gain law has no invertible CDF at the requested quantiles")
    lo, hi = gain_law.support()
    edges = np.concatenate(([lo], bnd, [hi]))
    reps = np.array([gain_law.expect(lambda x: x, lb=a, ub=b, conditional=True)
                     for a, b in zip(edges[:-1], edges[1:])])
    return GainQuantizer(bnd, reps, np.full(n_cells, 1.0 / n_cells))


@dataclass(frozen=True, eq=False)
class StateAlphabet:
    """Product alphabet of the independently fading gains of a scenario.

    ``laws[v]`` is the continuous law of variable ``v`` used in Monte Carlo
    evaluation, or ``None`` when the variable is held at its single
    representative.
    """

    scenario: object
    quantizers: tuple
    laws: tuple

    def __post_init__(self):
        n = len(self.scenario.link_variables)
        if len(self.quantizers) != n or len(self.laws) != n:
            raise ValueError(f"need one quantizer and one law per fading variable ({n})")

    @property
    def n_vars(self):
        return len(self.quantizers)

    @cached_property
    def shape(self):
        return tuple(q.n_cells for q in self.quantizers)

    def __len__(self):
        return int(np.prod(self.shape))

    @cached_property
    def cells(self):
        """``(n_states, n_vars)`` cell indices, C order over variables."""
        idx = np.indices(self.shape).reshape(self.n_vars, -1).T
        return np.ascontiguousarray(idx)

    @cached_property
    def values(self):
        """``(n_states, n_vars)`` representative gain of each variable."""
        out = np.empty(self.cells.shape)
        for v, q in enumerate(self.quantizers):
            out[:, v] = q.representatives[self.cells[:, v]]
        return out

    @cached_property
    def gains(self):
        """``(n_states, K, K, B)`` gain tensor of every state."""
        return self.scenario.gains_from_variables(self.values)

    @property
    def states(self):
        """Gain vectors in ``(g_11^1..g_11^B, g_12^1, ..., g_KK^B)`` order."""
        return self.gains.reshape(len(self), -1)

    @cached_property
    def probs(self):
        p = np.ones(1)
        for q in self.quantizers:
            p = np.outer(p, q.cell_probs).ravel()
        return p

    def state_index(self, cells):
        return np.ravel_multi_index(tuple(np.asarray(cells).T), self.shape)

    def sample_values(self, n, rng):
        """Continuous draws of every variable, shape ``(n, n_vars)``."""
        out = np.empty((n, self.n_vars))
        for v, (q, law) in enumerate(zip(self.quantizers, self.laws)):
            if law is None:
                out[:, v] = q.representatives[0]
            else:
                out[:, v] = law.rvs(size=n, random_state=rng)
        return out

    def cells_of_values(self, values):
        return np.stack([q.cell_of(values[:, v]) for v, q in enumerate(self.quantizers)], axis=1)


def build_state_alphabet(scenario, n_cells, fading=None):
    """Max-entropy quantization of every fading variable of ``scenario``.

    Each variable is exponential (Rayleigh block fading) with its mean from
    ``scenario.gain_means``. ``fading`` is an optional boolean mask over the
    variables; masked-out variables are held at their mean.
    """
    means = scenario.variable_means()
    n_vars = len(means)
    fading = np.ones(n_vars, bool) if fading is None else np.asarray(fading, bool)
    cells = np.broadcast_to(np.asarray(n_cells), (n_vars,))
    quantizers, laws = [], []
    cache = {}
    for m, fade, n in zip(means, fading, cells):
        if not fade:
            quantizers.append(GainQuantizer.fixed(m))
            laws.append(None)
            continue
        key = (float(m), int(n))
        if key not in cache:
            cache[key] = max_entropy_quantize(exponential_gain_law(m), int(n))
        quantizers.append(cache[key])
        laws.append(exponential_gain_law(m))
    return StateAlphabet(scenario, tuple(quantizers), tuple(laws))


def discrete_state_alphabet(scenario, levels, probs=None):
    """State alphabet whose variables take the given discrete values exactly."""
    q = GainQuantizer.from_levels(levels, probs)
    law = stats.rv_discrete(values=(np.arange(q.n_cells), q.cell_probs))
    laws = tuple(_DiscreteLaw(q.representatives, law) for _ in scenario.link_variables)
    return StateAlphabet(scenario, (q,) * len(scenario.link_variables), laws)


class _DiscreteLaw:
    def __init__(self, levels, index_law):
        self.levels = levels
        self.index_law = index_law

    def rvs(self, size, random_state):
        return self.levels[self.index_law.rvs(size=size, random_state=random_state)]


# -- observation structures --------------------------------------------------

@dataclass(frozen=True, eq=False)
class ObservationModel:
    """Per-transmitter conditional law of the signal given the state.

    For transmitter ``i`` exactly one of ``index_maps[i]`` (deterministic,
    length ``n_states``) and ``matrices[i]`` (``n_signals[i] x n_states``,
    column-stochastic) is set. ``observed_vars[i]`` lists the fading
    variables the signal is built from and ``noise_std[i]`` the standard
    deviation of the additive estimation noise on each of them (0 for
    perfect observation).
    """

    label: str
    states: StateAlphabet
    n_signals: tuple
    index_maps: tuple
    matrices: tuple
    observed_vars: tuple
    noise_std: tuple
    esnr_db: float | None = None

    def __post_init__(self):
        if self.label not in STRUCTURES:
            raise ValueError(f"unknown observation structure {self.label!r}")
        n = len(self.states)
        for i, (imap, mat) in enumerate(zip(self.index_maps, self.matrices)):
            if (imap is None) == (mat is None):
                raise ValueError(f"transmitter {i}: give exactly one of index map / matrix")
            if imap is not None and (imap.shape != (n,) or imap.max() >= self.n_signals[i]):
                raise ValueError(f"transmitter {i}: bad index map")
            if mat is not None:
                if mat.shape != (self.n_signals[i], n):
                    raise ValueError(f"transmitter {i}: table shape {mat.shape}")
                if np.any(mat < -1e-15) or np.any(np.abs(mat.sum(axis=0) - 1) > 1e-9):
                    raise ValueError(f"transmitter {i}: table is not column-stochastic")

    @property
    def K(self):
        return len(self.n_signals)

    def is_deterministic(self, i):
        return self.index_maps[i] is not None

    def table(self, i):
        """Dense ``n_signals x n_states`` transition matrix of transmitter ``i``."""
        if self.matrices[i] is not None:
            return self.matrices[i]
        t = np.zeros((self.n_signals[i], len(self.states)))
        t[self.index_maps[i], np.arange(len(self.states))] = 1.0
        return t

    def weighted_table(self, i, weights):
        """``table(i) * weights`` (broadcast over states), sparse if deterministic."""
        n = len(self.states)
        if self.index_maps[i] is not None:
            return sparse.csr_matrix((weights, (self.index_maps[i], np.arange(n))),
                                     shape=(self.n_signals[i], n))
        return self.matrices[i] * weights

    def is_common(self):
        """True when every transmitter sees the same deterministic signal."""
        maps = self.index_maps
        return all(m is not None for m in maps) and all(np.array_equal(maps[0], m) for m in maps[1:])

    def observe(self, values, rng=None):
        """Signal indices ``(n, K)`` for continuous variable draws ``(n, n_vars)``.

        Noisy transmitters add Gaussian noise of the calibrated standard
        deviation to each observed gain before quantizing.
        """
        if self.label == "custom":
            raise ValueError("custom observation tables have no continuous observation path")
        out = np.zeros((len(values), self.K), dtype=np.int64)
        for i, (vars_i, std) in enumerate(zip(self.observed_vars, self.noise_std)):
            if not vars_i:
                continue
            cells = []
            for v in vars_i:
                x = values[:, v]
                if std:
                    x = x + rng.normal(0.0, std, size=len(x))
                cells.append(self.states.quantizers[v].cell_of(x))
            shape = tuple(self.states.quantizers[v].n_cells for v in vars_i)
            out[:, i] = np.ravel_multi_index(tuple(cells), shape)
        return out

    def sample_signals(self, state_idx, rng):
        """Draw signal indices ``(n, K)`` from the discrete tables."""
        out = np.empty((len(state_idx), self.K), dtype=np.int64)
        for i in range(self.K):
            if self.index_maps[i] is not None:
                out[:, i] = self.index_maps[i][state_idx]
            else:
                cdf = np.cumsum(self.matrices[i][:, state_idx], axis=0)
                u = rng.random(len(state_idx)) * cdf[-1]
                out[:, i] = np.minimum((cdf < u).sum(axis=0), self.n_signals[i] - 1)
        return out

    @classmethod
    def from_tables(cls, states, tables, label="custom"):
        """Observation model from explicit column-stochastic tables."""
        tables = tuple(np.asarray(t, dtype=float) for t in tables)
        return cls(label, states, tuple(t.shape[0] for t in tables), (None,) * len(tables),
                   tables, ((),) * len(tables), (0.0,) * len(tables))


def _structure_vars(scenario, label, i):
    """Fading variables observed by transmitter ``i`` under ``label``."""
    groups = scenario.link_variables
    K = scenario.K

    def var_of(tx, rx, b):
        for v, g in enumerate(groups):
            if (tx, rx, b) in g:
                return v
        raise KeyError((tx, rx, b))

    bands = range(scenario.B)
    if label == "global":
        return tuple(range(len(groups)))
    if label == "constant":
        return ()
    if label in ("individual", "noisy_individual"):
        return tuple(var_of(i, i, b) for b in bands)
    if label == "direct":
        return tuple(dict.fromkeys(var_of(j, j, b) for j in range(K) for b in bands))
    if label == "local":
        # every gain into receiver i
        return tuple(dict.fromkeys(var_of(j, i, b) for j in range(K) for b in bands))
    raise ValueError(f"unknown observation structure {label!r}")


def build_observation(label, scenario, states):
    """Deterministic observation structure projecting the state onto the
    gains named by ``label`` (global, direct, local, individual, constant)."""
    if label not in ("global", "direct", "local", "individual", "constant"):
        raise ValueError(f"unknown deterministic observation structure {label!r}")
    maps, n_sig, obs_vars = [], [], []
    for i in range(scenario.K):
        vars_i = _structure_vars(scenario, label, i)
        shape = tuple(states.shape[v] for v in vars_i)
        if vars_i:
            imap = np.ravel_multi_index(tuple(states.cells[:, v] for v in vars_i), shape)
        else:
            imap = np.zeros(len(states), dtype=np.int64)
        maps.append(imap.astype(np.int64))
        n_sig.append(int(np.prod(shape)) if vars_i else 1)
        obs_vars.append(vars_i)
    K = scenario.K
    return ObservationModel(label, states, tuple(n_sig), tuple(maps), (None,) * K,
                            tuple(obs_vars), (0.0,) * K)


# -- noisy individual CSI -------------------------------------------------------

def realized_esnr(law, quantizer, noise_std, n_samples, rng):
    """Ratio ``E[g**2] / E[(g_hat - g)**2]`` where ``g_hat`` quantizes ``g + z``."""
    g = law.rvs(size=n_samples, random_state=rng)
    z = rng.standard_normal(n_samples)
    return _esnr(g, z, quantizer, noise_std)


def _esnr(g, z, quantizer, noise_std):
    g_hat = quantizer.quantize(g + noise_std * z)
    return np.mean(g**2) / np.mean((g_hat - g) ** 2)


def calibrate_noise(law, quantizer, esnr_db, n_samples=1_000_000, seed=0, tol_db=0.01):
    """Standard deviation of the additive gain noise that realizes ``esnr_db``.

    Bisection on ``log(std)`` with common random numbers, so the realized
    ratio is a deterministic function of the noise level. Raises
    ``ValueError`` when the target exceeds the quantization-only ceiling.
    """
    if np.isinf(esnr_db):
        return 0.0
    rng = np.random.default_rng(seed)
    g = law.rvs(size=n_samples, random_state=rng)
    z = rng.standard_normal(n_samples)
    target = 10 ** (esnr_db / 10)
    scale = float(law.mean())

    def err_db(log_std):
        return 10 * np.log10(_esnr(g, z, quantizer, np.exp(log_std))) - esnr_db

    lo, hi = np.log(scale * 1e-6), np.log(scale * 1e3)
    ceiling = _esnr(g, z, quantizer, 0.0)
    if ceiling < target or err_db(lo) < 0:
        raise ValueError(f"target ESNR {esnr_db} dB exceeds the quantization ceiling "
                         f"{10 * np.log10(ceiling):.2f} dB for {quantizer.n_cells} cells")
    if err_db(hi) > 0:
        raise ValueError(f"target ESNR {esnr_db} dB not reached at the largest noise level")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        e = err_db(mid)
        if abs(e) < tol_db and hi - lo < 1e-6:
            break
        if e > 0:
            lo = mid
        else:
            hi = mid
    return float(np.exp(0.5 * (lo + hi)))


def confusion_matrix(law, quantizer, noise_std, mc_samples, rng):
    """``C[m, k] = P(cell(g + z) = k | cell(g) = m)`` by Monte Carlo.

    Gains are drawn from the conditional law inside each cell by inverse
    CDF sampling.
    """
    n = quantizer.n_cells
    if noise_std == 0:
        return np.eye(n)
    out = np.zeros((n, n))
    cdf_edges = np.concatenate(([0.0], law.cdf(quantizer.boundaries), [1.0]))
    for m in range(n):
        u = rng.uniform(cdf_edges[m], cdf_edges[m + 1], size=mc_samples)
        g = law.ppf(u)
        k = quantizer.cell_of(g + rng.normal(0.0, noise_std, size=mc_samples))
        out[m] = np.bincount(k, minlength=n) / mc_samples
    return out


def build_noisy_individual(scenario, states, esnr_db, mc_samples=100_000, seed=0,
                           calib_samples=1_000_000):
    """Noisy individual CSI: transmitter ``i`` quantizes ``g_ii^b + z``.

    The noise level is calibrated per direct-gain law so the realized
    estimation SNR matches ``esnr_db``; the table is then estimated by Monte
    Carlo with ``mc_samples`` draws per cell.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be positive")
    rng = np.random.default_rng(seed)
    K = scenario.K
    cache = {}
    mats, n_sig, obs_vars, stds = [], [], [], []
    for i in range(K):
        vars_i = _structure_vars(scenario, "noisy_individual", i)
        confusions, std_i = [], []
        for v in vars_i:
            q, law = states.quantizers[v], states.laws[v]
            if law is None:
                confusions.append(np.ones((1, 1)))
                std_i.append(0.0)
                continue
            key = (id(q), float(law.mean()))
            if key not in cache:
                std = calibrate_noise(law, q, esnr_db, n_samples=calib_samples, seed=seed)
                cache[key] = (std, confusion_matrix(law, q, std, mc_samples, rng))
            std, conf = cache[key]
            confusions.append(conf)
            std_i.append(std)
        # signal = ravel of per-band noisy cells; factorizes across bands
        table = np.ones((1, len(states)))
        for v, conf in zip(vars_i, confusions):
            per_band = conf[states.cells[:, v]].T  # (n_cells, n_states)
            table = (table[:, None, :] * per_band[None, :, :]).reshape(-1, len(states))
        mats.append(table)
        n_sig.append(table.shape[0])
        obs_vars.append(vars_i)
        stds.append(std_i[0] if std_i else 0.0)
        if len(set(std_i)) > 1:
            raise ValueError("bands of one transmitter must share a gain law")
    if np.isinf(esnr_db):
        return ObservationModel("noisy_individual", states, tuple(n_sig),
                                tuple(np.argmax(m, axis=0) for m in mats), (None,) * K,
                                tuple(obs_vars), (0.0,) * K, esnr_db=float(esnr_db))
    return ObservationModel("noisy_individual", states, tuple(n_sig), (None,) * K, tuple(mats),
                            tuple(obs_vars), tuple(stds), esnr_db=float(esnr_db))


def joint_signal_count(observation):
    return int(np.prod(observation.n_signals))


def iter_joint_signals(observation):
    return itertools.product(*(range(n) for n in observation.n_signals))
