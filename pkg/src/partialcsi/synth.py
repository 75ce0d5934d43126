"""Sequential best-response synthesis of one-shot decision functions.

Every quantity here is an exact expectation over the discrete state and
signal alphabets. Because signals are conditionally independent given the
state, the action of transmitter ``j`` given state ``z`` has law
``P_j(a | z) = sum_{s: f_j(s) = a} T_j(s | z)``; expectations are taken by
enumerating the support of these laws ("branches") instead of joint
signals.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .model import utility_array

CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True, eq=False)
class DecisionProfile:
    """One lookup table per transmitter mapping signal index to action index."""

    tables: tuple

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(np.asarray(t, dtype=np.int64) for t in self.tables))

    @property
    def K(self):
        return len(self.tables)

    def validate(self, scenario, observation):
        n_act = len(scenario.actions)
        if self.K != scenario.K or observation.K != scenario.K:
            raise ValueError("profile, scenario and observation disagree on K")
        for i, t in enumerate(self.tables):
            if t.shape != (observation.n_signals[i],):
                raise ValueError(f"table {i} has length {t.shape}, expected {observation.n_signals[i]}")
            if t.min() < 0 or t.max() >= n_act:
                raise ValueError(f"table {i} holds an invalid action index")

    def powers(self, scenario, i):
        """Power vector chosen by transmitter ``i`` for every signal."""
        return scenario.actions.actions[self.tables[i]]

    def replace(self, i, table):
        tables = list(self.tables)
        tables[i] = np.asarray(table, dtype=np.int64)
        return DecisionProfile(tuple(tables))

    def __eq__(self, other):
        return (isinstance(other, DecisionProfile) and self.K == other.K
                and all(np.array_equal(a, b) for a, b in zip(self.tables, other.tables)))

    def __hash__(self):
        return hash(tuple(t.tobytes() for t in self.tables))

    @classmethod
    def constant(cls, observation, action):
        return cls(tuple(np.full(n, action, dtype=np.int64) for n in observation.n_signals))


def full_power_profile(scenario, observation):
    """Every signal mapped to the highest-power action."""
    return DecisionProfile.constant(observation, len(scenario.actions) - 1)


def random_profile(scenario, observation, rng):
    n_act = len(scenario.actions)
    return DecisionProfile(tuple(rng.integers(0, n_act, size=n) for n in observation.n_signals))


# -- exact expectations -------------------------------------------------------

def _branches(observation, table, j):
    """Support of ``P_j(. | z)`` as ``(weights or None, actions)`` pairs."""
    if observation.is_deterministic(j):
        return [(None, table[observation.index_maps[j]])]
    mat = observation.matrices[j]
    n_states = mat.shape[1]
    out = []
    for a in np.unique(table):
        w = mat[table == a].sum(axis=0)
        if np.any(w > 0):
            out.append((w, np.full(n_states, a, dtype=np.int64)))
    return out


def _chunks(n, per_item):
    step = max(1, CHUNK_ELEMENTS // max(1, per_item))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def _combine(branch_lists):
    """Cartesian product of per-player branches: (weights or None, [actions])."""
    for combo in itertools.product(*branch_lists):
        weight = None
        for w, _ in combo:
            if w is not None:
                weight = w if weight is None else weight * w
        yield weight, [a for _, a in combo]


def check_dimensions(profile, scenario, observation):
    profile.validate(scenario, observation)


def per_user_utilities(profile, scenario, observation, spec):
    """Exact long-term utility ``U_i`` of every transmitter under ``profile``."""
    check_dimensions(profile, scenario, observation)
    states = observation.states
    rho = states.probs
    acts = scenario.actions.actions
    K = scenario.K
    branch_lists = [_branches(observation, profile.tables[j], j) for j in range(K)]
    total = np.zeros(K)
    for weight, actions in _combine(branch_lists):
        p = rho if weight is None else rho * weight
        for sl in _chunks(len(rho), K * K * scenario.B):
            powers = np.stack([acts[a[sl]] for a in actions], axis=1)  # (c, K, B)
            u = utility_array(spec, scenario, states.gains[sl], powers)
            total += p[sl] @ u
    return total


def expected_weighted_utility(profile, scenario, observation, spec):
    """Exact ``W_lambda`` of a deterministic profile."""
    return float(per_user_utilities(profile, scenario, observation, spec) @ np.asarray(spec.weights))


def _state_action_values(i, profile, scenario, observation, spec):
    """``M[z, a_i]``: expected weighted utility given state ``z`` when
    transmitter ``i`` plays ``a_i`` and the others follow ``profile``."""
    states = observation.states
    acts = scenario.actions.actions
    n_act = len(acts)
    K, B = scenario.K, scenario.B
    lam = np.asarray(spec.weights)
    others = [j for j in range(K) if j != i]
    branch_lists = [_branches(observation, profile.tables[j], j) for j in others]
    out = np.zeros((len(states), n_act))
    for weight, actions in _combine(branch_lists):
        for sl in _chunks(len(states), n_act * K * K * B):
            c = sl.stop - sl.start
            powers = np.empty((c, n_act, K, B))
            powers[:, :, i, :] = acts[None, :, :]
            for j, a in zip(others, actions):
                powers[:, :, j, :] = acts[a[sl]][:, None, :]
            w = utility_array(spec, scenario, states.gains[sl][:, None], powers) @ lam
            if weight is not None:
                w *= weight[sl][:, None]
            out[sl] += w
    return out


def best_response_scores(i, profile, scenario, observation, spec):
    """``omega_i(s_i, a_i)`` for every signal and action of transmitter ``i``,
    shape ``(n_signals_i, n_actions)``."""
    check_dimensions(profile, scenario, observation)
    m = _state_action_values(i, profile, scenario, observation, spec)
    return np.asarray(observation.weighted_table(i, observation.states.probs) @ m)


def best_response_score(i, s_i, a_i, profile, scenario, observation, spec):
    if not 0 <= s_i < observation.n_signals[i]:
        raise IndexError(f"signal index {s_i} out of range")
    if not 0 <= a_i < len(scenario.actions):
        raise IndexError(f"action index {a_i} out of range")
    return float(best_response_scores(i, profile, scenario, observation, spec)[s_i, a_i])


def _weighted_tensor(scenario, observation, spec):
    """``w[z, a_1, ..., a_K]`` for small instances (naive engine)."""
    acts = scenario.actions.actions
    n_act, K = len(acts), scenario.K
    grids = np.indices((n_act,) * K).reshape(K, -1).T  # (n_joint, K)
    powers = acts[grids]  # (n_joint, K, B)
    g = observation.states.gains[:, None]
    w = utility_array(spec, scenario, g, powers[None]) @ np.asarray(spec.weights)
    return w.reshape((len(observation.states),) + (n_act,) * K)


def naive_scores(i, profile, scenario, observation, spec, counter=None, tensor=None):
    """Literal evaluation of ``omega_i`` by looping over states, joint signals
    and actions. ``counter`` (a one-element list) is incremented once per
    utility term visited."""
    states = observation.states
    rho = states.probs
    K = scenario.K
    n_act = len(scenario.actions)
    tables = [observation.table(j) for j in range(K)]
    w = _weighted_tensor(scenario, observation, spec) if tensor is None else tensor
    omega = np.zeros((observation.n_signals[i], n_act))
    for z in range(len(states)):
        for s in itertools.product(*(range(n) for n in observation.n_signals)):
            p = rho[z]
            for j in range(K):
                p *= tables[j][s[j], z]
            joint = [profile.tables[j][s[j]] for j in range(K)]
            for a_i in range(n_act):
                if counter is not None:
                    counter[0] += 1
                joint[i] = a_i
                omega[s[i], a_i] += p * w[(z, *joint)]
    return omega


def ops_per_sweep(scenario, observation):
    """``|A_0| * |S| * sum_k |A_k|``: utility terms visited per sweep."""
    n_joint_signals = int(np.prod(observation.n_signals))
    return len(observation.states) * n_joint_signals * len(scenario.actions) * scenario.K


# -- best-response dynamics ------------------------------------------------------

@dataclass
class SynthReport:
    profile: DecisionProfile
    trace: list                # W_lambda at start and after every sweep
    update_trace: list         # W_lambda after every single-entry change
    iterations: int            # sweeps performed
    converged: bool
    sweep_seconds: list = field(default_factory=list)
    ops: list = field(default_factory=list)   # utility terms per sweep
    start_values: list = field(default_factory=list)

    @property
    def value(self):
        return self.trace[-1]


def synthesize(scenario, observation, spec, init=None, eps=1e-9, iter_max=100,
               stop="fixed_point", engine="vectorized", on_update=None):
    """Round-robin best-response dynamics on the decision functions.

    Each transmitter in turn sets ``f_i(s_i) = argmax_a omega_i(s_i, a)`` for
    every signal, ties going to the lowest action index. With
    ``stop="fixed_point"`` the run ends after a sweep that changes no table
    entry; with ``stop="norm"`` it ends once every
    ``||f_i_old - f_i||_2 < eps`` measured on the power values. ``on_update``
    is called with the profile after every single-entry change.
    """
    if eps <= 0 or iter_max < 1:
        raise ValueError("eps must be > 0 and iter_max >= 1")
    if stop not in ("fixed_point", "norm"):
        raise ValueError(f"unknown stop rule {stop!r}")
    profile = full_power_profile(scenario, observation) if init is None else init
    check_dimensions(profile, scenario, observation)
    acts = scenario.actions.actions
    value = expected_weighted_utility(profile, scenario, observation, spec)
    trace, update_trace = [value], [value]
    seconds, ops = [], []
    tensor = _weighted_tensor(scenario, observation, spec) if engine == "naive" else None
    converged = False
    sweeps = 0
    while sweeps < iter_max:
        t0 = time.perf_counter()
        changed = 0
        counter = [0]
        norms = []
        for i in range(scenario.K):
            if engine == "naive":
                omega = naive_scores(i, profile, scenario, observation, spec, counter, tensor)
            elif engine == "vectorized":
                omega = best_response_scores(i, profile, scenario, observation, spec)
                counter[0] += len(observation.states) * int(np.prod(observation.n_signals)) * len(acts)
            else:
                raise ValueError(f"unknown engine {engine!r}")
            old = profile.tables[i]
            best = np.argmax(omega, axis=1)
            rows = np.arange(len(old))
            current = omega[rows, old].sum()
            table = old.copy()
            for s in np.flatnonzero(best != old):
                current += omega[s, best[s]] - omega[s, table[s]]
                table[s] = best[s]
                changed += 1
                update_trace.append(float(current))
                if on_update is not None:
                    on_update(profile.replace(i, table))
            norms.append(np.linalg.norm(acts[old] - acts[best]))
            profile = profile.replace(i, best)
        sweeps += 1
        trace.append(expected_weighted_utility(profile, scenario, observation, spec))
        seconds.append(time.perf_counter() - t0)
        ops.append(counter[0])
        if changed == 0 or (stop == "norm" and max(norms) < eps):
            converged = True
            break
    return SynthReport(profile, trace, update_trace, sweeps, converged, seconds, ops)


def multistart_synthesize(scenario, observation, spec, init=None, n_starts=20, seed=0, **kwargs):
    """Best of ``n_starts`` runs: the first from ``init`` (full power by
    default), the rest from uniformly random profiles drawn with ``seed``."""
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    rng = np.random.default_rng(seed)
    first = full_power_profile(scenario, observation) if init is None else init
    best = None
    values = []
    for k in range(n_starts):
        start = first if k == 0 else random_profile(scenario, observation, rng)
        rep = synthesize(scenario, observation, spec, init=start, **kwargs)
        values.append(rep.value)
        if best is None or rep.value > best.value:
            best = rep
    best.start_values = values
    return best
