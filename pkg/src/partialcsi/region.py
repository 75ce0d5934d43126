"""Long-term utility region at desk scale.

Points of the region are represented through deterministic profiles
(vertices) and finite mixtures of them selected by a shared lottery ``V``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import utility_array
from .simplex import linprog_max
from .synth import DecisionProfile, multistart_synthesize, per_user_utilities

DEFAULT_BUDGET = 1_000_000


class BudgetExceeded(RuntimeError):
    """Exhaustive enumeration would visit more candidates than allowed."""


@dataclass(frozen=True, eq=False)
class VertexPayoff:
    profile: DecisionProfile
    payoff: np.ndarray


@dataclass(frozen=True, eq=False)
class AuxiliaryMix:
    """Finite lottery over deterministic profiles: ``(P_V(v), profile_v)``."""

    support: tuple

    def __post_init__(self):
        probs = np.array([p for p, _ in self.support], dtype=float)
        if len(probs) == 0 or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("lottery probabilities must be nonnegative and sum to one")

    @property
    def probs(self):
        return np.array([p for p, _ in self.support])

    @property
    def profiles(self):
        return [f for _, f in self.support]

    @classmethod
    def single(cls, profile):
        return cls(((1.0, profile),))


@dataclass(frozen=True, eq=False)
class FrontierPoint:
    weights: tuple
    payoff: np.ndarray
    achiever: object   # DecisionProfile or AuxiliaryMix


@dataclass(frozen=True, eq=False)
class RegionFrontier:
    points: tuple

    def payoffs(self):
        return np.array([p.payoff for p in self.points])


def per_user_expected_utilities(achiever, scenario, observation, spec):
    """Exact ``(U_1, ..., U_K)`` of a profile or of a lottery over profiles."""
    if isinstance(achiever, AuxiliaryMix):
        return sum(p * per_user_utilities(f, scenario, observation, spec) for p, f in achiever.support)
    return per_user_utilities(achiever, scenario, observation, spec)


def cardinality_bound(scenario, observation):
    """``|A| * |S| - 1`` with ``|A| = prod_k |A_k|`` and ``|S| = prod_l |S_l|``."""
    n_act = len(scenario.actions)
    return int(n_act ** scenario.K * np.prod(observation.n_signals, dtype=object) - 1)


def lambda_grid(K, n=101, seed=0):
    """Weights to sweep: uniform on the simplex edge for two users, simplex
    vertices plus Dirichlet samples otherwise."""
    if K == 1:
        return np.ones((1, 1))
    if K == 2:
        t = np.linspace(0.0, 1.0, n)
        return np.stack([t, 1 - t], axis=1)
    rng = np.random.default_rng(seed)
    pts = np.vstack([np.eye(K), np.full((1, K), 1.0 / K), rng.dirichlet(np.ones(K), size=max(0, n - K - 1))])
    return pts


def pareto_filter(points):
    """Drop points strictly dominated by another point."""
    pay = np.array([p.payoff for p in points])
    keep = []
    for k in range(len(points)):
        dominated = np.any(np.all(pay >= pay[k], axis=1) & np.any(pay > pay[k], axis=1))
        if not dominated:
            keep.append(points[k])
    return tuple(keep)


# -- exhaustive enumeration ----------------------------------------------------

def _utility_tensor(scenario, observation, spec):
    """``u[z, a_1, ..., a_K, k]`` over every state and joint action."""
    acts = scenario.actions.actions
    n_act, K = len(acts), scenario.K
    joint = np.indices((n_act,) * K).reshape(K, -1).T
    u = utility_array(spec, scenario, observation.states.gains[:, None], acts[joint][None])
    return u.reshape((len(observation.states),) + (n_act,) * K + (K,))


def profile_count(scenario, observation):
    n_act = len(scenario.actions)
    return int(np.prod([n_act ** n for n in observation.n_signals], dtype=object))


def _player_tables(n_act, n_signals):
    return np.indices((n_act,) * n_signals).reshape(n_signals, -1).T if n_signals else np.zeros((1, 0), int)


def all_profile_payoffs(scenario, observation, spec, budget=DEFAULT_BUDGET):
    """Payoff vector of every deterministic profile.

    Returns ``(tables, payoffs)`` where ``tables[i]`` lists the candidate
    tables of transmitter ``i`` and ``payoffs`` has shape
    ``(n_1, ..., n_K, K)``.
    """
    total = profile_count(scenario, observation)
    if total > budget:
        raise BudgetExceeded(f"{total} deterministic profiles exceed the budget of {budget}")
    K = scenario.K
    n_act = len(scenario.actions)
    rho = observation.states.probs
    u = _utility_tensor(scenario, observation, spec)
    tables = [_player_tables(n_act, n) for n in observation.n_signals]
    letters = "abcdefgh"[:K]
    plet = "pqrstuvw"[:K]
    expr = ",".join(f"z{p}{a}" for p, a in zip(plet, letters)) + f",z{letters}k->{plet}k"
    sizes = [len(t) for t in tables]
    out = np.zeros(tuple(sizes) + (K,))
    per_state = int(np.prod(sizes)) * n_act * K
    step = max(1, 20_000_000 // max(1, per_state))
    dense = [observation.table(i) for i in range(K)]
    for start in range(0, len(rho), step):
        sl = slice(start, min(len(rho), start + step))
        laws = []
        for i in range(K):
            # P_i[z, p, a] = sum_s T_i(s | z) [table_p(s) == a]
            onehot = (tables[i][:, :, None] == np.arange(n_act)).astype(float)  # (p, s, a)
            laws.append(np.einsum("sz,psa->zpa", dense[i][:, sl], onehot))
        weighted = u[sl] * rho[sl].reshape((-1,) + (1,) * (K + 1))
        out += np.einsum(expr, *laws, weighted, optimize="greedy")
    return tables, out


def _pick(scores, tiebreak, rel_tol=1e-12):
    """Index of the max score; near-ties go to the max ``tiebreak``."""
    best = scores.max()
    near = np.flatnonzero(scores >= best - rel_tol * max(1.0, abs(best)))
    return near[np.argmax(tiebreak[near])]


def _common_signal_payoffs(scenario, observation, spec):
    """``c[s, joint, k]``: contribution of each (common signal, joint action)."""
    u = _utility_tensor(scenario, observation, spec)
    n_states = u.shape[0]
    u = u.reshape(n_states, -1, scenario.K) * observation.states.probs[:, None, None]
    c = np.zeros((observation.n_signals[0],) + u.shape[1:])
    np.add.at(c, observation.index_maps[0], u)
    return c


def exhaustive_frontier(scenario, observation, spec, weights_grid=None, budget=DEFAULT_BUDGET):
    """Pareto frontier traced by the exact maximizers of ``W_lambda``.

    When all transmitters observe the same deterministic signal the team
    problem decouples across signals and the search visits
    ``|S| * prod_i |A_i|`` (signal, joint action) pairs; otherwise every
    deterministic profile is enumerated. Either count is checked against
    ``budget``. Among maximizers of a given ``lambda`` the one with the
    largest unweighted sum wins.
    """
    K = scenario.K
    grid = lambda_grid(K) if weights_grid is None else np.atleast_2d(weights_grid)
    n_act = len(scenario.actions)
    points = []
    if observation.is_common() and K > 1:
        count = observation.n_signals[0] * n_act ** K
        if count > budget:
            raise BudgetExceeded(f"{count} signal/joint-action pairs exceed the budget of {budget}")
        c = _common_signal_payoffs(scenario, observation, spec)
        joint = np.indices((n_act,) * K).reshape(K, -1).T
        tot = c.sum(axis=2)
        for lam in grid:
            best = [_pick(c[s] @ lam, tot[s]) for s in range(len(c))]
            payoff = sum(c[s, j] for s, j in enumerate(best))
            tables = tuple(joint[best, i] for i in range(K))
            points.append(FrontierPoint(tuple(lam), np.asarray(payoff), DecisionProfile(tables)))
    else:
        tables, pay = all_profile_payoffs(scenario, observation, spec, budget)
        flat = pay.reshape(-1, K)
        tot = flat.sum(axis=1)
        shape = pay.shape[:-1]
        for lam in grid:
            k = _pick(flat @ lam, tot)
            idx = np.unravel_index(k, shape)
            prof = DecisionProfile(tuple(tables[i][idx[i]] for i in range(K)))
            points.append(FrontierPoint(tuple(lam), flat[k].copy(), prof))
    return RegionFrontier(pareto_filter(points))


def exhaustive_optimum(scenario, observation, spec, budget=DEFAULT_BUDGET):
    """``(max W_lambda, maximizing profile)`` for ``spec.weights``."""
    front = exhaustive_frontier(scenario, observation, spec, [spec.weights], budget)
    pt = front.points[0]
    return float(pt.payoff @ np.asarray(spec.weights)), pt.achiever


def enumerate_vertices(scenario, observation, spec, budget=DEFAULT_BUDGET, n_weights=21,
                       n_starts=5, seed=0):
    """Vertex payoffs for the QoS program.

    Every deterministic profile when the count fits ``budget``; otherwise
    the distinct profiles returned by multistart synthesis over a weight
    grid, which is only an inner approximation of the region.
    """
    try:
        tables, pay = all_profile_payoffs(scenario, observation, spec, budget)
    except BudgetExceeded:
        seen = {}
        for lam in lambda_grid(scenario.K, n_weights, seed):
            rep = multistart_synthesize(scenario, observation, spec.with_weights(lam),
                                        n_starts=n_starts, seed=seed)
            seen.setdefault(rep.profile, None)
        return [VertexPayoff(f, per_user_utilities(f, scenario, observation, spec)) for f in seen]
    K = scenario.K
    out = []
    for idx in np.ndindex(*pay.shape[:-1]):
        prof = DecisionProfile(tuple(tables[i][idx[i]] for i in range(K)))
        out.append(VertexPayoff(prof, pay[idx].copy()))
    return out


# -- QoS-constrained lottery ----------------------------------------------------------

@dataclass
class MixtureSolution:
    status: str                 # "optimal" or "infeasible"
    mix: AuxiliaryMix | None
    value: float | None         # optimal lambda-weighted utility
    payoff: np.ndarray | None   # expected per-user utilities of the mix


def qos_mixture_lp(vertices, weights, qos):
    """Best lottery over vertex profiles under per-user utility floors.

    Solves ``max sum_v P_V(v) lambda . U(v)`` s.t. ``sum_v P_V(v) U_i(v) >=
    qos_i`` over the probability simplex. The optimum is often a whole face;
    among optimal lotteries the one maximizing the smallest user utility is
    kept, then the support is reduced to at most ``K + 1`` atoms with the
    same payoff.
    """
    if not vertices:
        raise ValueError("need at least one vertex")
    U = np.array([v.payoff for v in vertices], dtype=float)   # (n, K)
    lam = np.asarray(weights, dtype=float)
    qos = np.asarray(qos, dtype=float)
    n, K = U.shape
    scale = max(np.abs(U).max(), 1e-300)
    Us, qs = U / scale, qos / scale
    obj = Us @ lam

    first = linprog_max(obj, A_ub=-Us.T, b_ub=-qs, A_eq=np.ones((1, n)), b_eq=[1.0])
    if first.status == "infeasible":
        return MixtureSolution("infeasible", None, None, None)
    best = first.value
    slack = 1e-12 * max(1.0, abs(best))

    # variables (p_1..p_n, t >= 0); maximize t <= U_i . p among optimal
    # lotteries (utilities here are nonnegative)
    A_ub = np.vstack([
        np.hstack([-Us.T, np.zeros((K, 1))]),
        np.hstack([-obj[None, :], np.zeros((1, 1))]),
        np.hstack([-Us.T, np.ones((K, 1))]),
    ])
    b_ub = np.concatenate([-qs, [-(best - slack)], np.zeros(K)])
    second = linprog_max(np.r_[np.zeros(n), 1.0], A_ub=A_ub, b_ub=b_ub,
                         A_eq=np.r_[np.ones(n), 0.0][None, :], b_eq=[1.0])
    p = second.x[:n] if second.status == "optimal" else first.x
    if obj @ p < best - slack:
        p = first.x

    # basic solution with the same payoff: at most K + 1 atoms
    target = Us.T @ p
    sup = np.flatnonzero(p > 1e-12)
    third = linprog_max(np.zeros(len(sup)), A_ub=-Us[sup].T, b_ub=-(target - 1e-12),
                        A_eq=np.ones((1, len(sup))), b_eq=[1.0])
    if third.status == "optimal" and obj[sup] @ third.x >= best - slack:
        p = np.zeros(n)
        p[sup] = third.x
    p[p < 1e-12] = 0.0
    p /= p.sum()
    atoms = np.flatnonzero(p)
    mix = AuxiliaryMix(tuple((float(p[k]), vertices[k].profile) for k in atoms))
    payoff = U.T @ p
    return MixtureSolution("optimal", mix, float(payoff @ lam), payoff)


# -- empirical check of the factorized joint law ----------------------------------------

@dataclass
class FactorizationResult:
    tv_distance: float
    empirical_utilities: np.ndarray
    standard_errors: np.ndarray
    analytic_utilities: np.ndarray
    n_blocks: int


def joint_law(achiever, scenario, observation):
    """Analytic ``Q(z, a_1..a_K)`` induced by a profile or lottery, flattened
    to ``(n_states, n_act**K)``."""
    mix = achiever if isinstance(achiever, AuxiliaryMix) else AuxiliaryMix.single(achiever)
    n_act, K = len(scenario.actions), scenario.K
    rho = observation.states.probs
    q = np.zeros((len(rho),) + (n_act,) * K)
    for pv, prof in mix.support:
        term = rho * pv
        laws = []
        for i in range(K):
            onehot = (prof.tables[i][:, None] == np.arange(n_act)).astype(float)  # (s, a)
            laws.append(observation.table(i).T @ onehot)  # (z, a)
        joint = term.reshape((-1,) + (1,) * K)
        for i, law in enumerate(laws):
            shape = [len(rho)] + [1] * K
            shape[1 + i] = n_act
            joint = joint * law.reshape(shape)
        q += joint
    return q.reshape(len(rho), -1)


def factorization_check(achiever, scenario, observation, spec, n_blocks=100_000, seed=0):
    """Simulate i.i.d. blocks of the discrete model and compare the empirical
    joint frequency of (state, actions) with the analytic factorized law.

    Also returns the time-averaged utilities with their standard errors next
    to the exact expectation ``sum_a Q(a) u_i(a)``.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be positive")
    mix = achiever if isinstance(achiever, AuxiliaryMix) else AuxiliaryMix.single(achiever)
    rng = np.random.default_rng(seed)
    states = observation.states
    n_act, K = len(scenario.actions), scenario.K
    z = rng.choice(len(states), size=n_blocks, p=states.probs)
    v = rng.choice(len(mix.support), size=n_blocks, p=mix.probs)
    s = observation.sample_signals(z, rng)
    stacked = [np.stack([f.tables[i] for f in mix.profiles]) for i in range(K)]
    a = np.stack([stacked[i][v, s[:, i]] for i in range(K)], axis=1)
    joint = np.ravel_multi_index(tuple(a.T), (n_act,) * K) if K else np.zeros(n_blocks, int)
    q = joint_law(mix, scenario, observation)
    counts = np.bincount(z * q.shape[1] + joint, minlength=q.size).reshape(q.shape)
    tv = 0.5 * np.abs(counts / n_blocks - q).sum()
    u = utility_array(spec, scenario, states.gains[z], scenario.actions.actions[a])
    return FactorizationResult(
        tv_distance=float(tv),
        empirical_utilities=u.mean(axis=0),
        standard_errors=u.std(axis=0, ddof=1) / np.sqrt(n_blocks) if n_blocks > 1 else np.zeros(K),
        analytic_utilities=per_user_expected_utilities(mix, scenario, observation, spec),
        n_blocks=n_blocks,
    )
