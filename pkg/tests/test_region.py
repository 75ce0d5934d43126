import itertools

import numpy as np
import pytest

from partialcsi.model import Psi, Scenario, energy_efficiency, interference_scenario, shannon_rate
from partialcsi.observe import (ObservationModel, build_observation, build_state_alphabet,
                                discrete_state_alphabet)
from partialcsi.presets import mac_qos_problem
from partialcsi.region import (AuxiliaryMix, BudgetExceeded, VertexPayoff, all_profile_payoffs,
                               cardinality_bound, enumerate_vertices, exhaustive_frontier,
                               exhaustive_optimum, factorization_check, joint_law, lambda_grid,
                               per_user_expected_utilities, qos_mixture_lp)
from partialcsi.synth import DecisionProfile, multistart_synthesize, random_profile


def random_stochastic(rng, rows, cols):
    t = rng.random((rows, cols)) ** 2
    return t / t.sum(axis=0)


@pytest.fixture(scope="module")
def small():
    sc = interference_scenario(2, 1, cross_mean=0.5, noise=0.01, p_max=0.1, n_levels=2)
    st = build_state_alphabet(sc, 2, fading=[True, False, False, True])
    return sc, st


@pytest.fixture(scope="module")
def noisy(small):
    sc, st = small
    rng = np.random.default_rng(21)
    ob = ObservationModel.from_tables(st, [random_stochastic(rng, 2, len(st))] * 2)
    return sc, ob, energy_efficiency(Psi("outage", 1.0), 2)


def nested_loop_payoff(mix, scenario, observation, spec):
    """Sum over (a0, s, v) of rho * T(s|a0) * P_V(v) * u(a0, f^v(s))."""
    from partialcsi.model import instantaneous_utility
    st = observation.states
    acts = scenario.actions.actions
    out = np.zeros(scenario.K)
    for z in range(len(st)):
        for s in itertools.product(*(range(n) for n in observation.n_signals)):
            ps = np.prod([observation.table(i)[s[i], z] for i in range(scenario.K)])
            for pv, prof in mix.support:
                a = [acts[prof.tables[i][s[i]]] for i in range(scenario.K)]
                w = st.probs[z] * ps * pv
                out += w * np.array([instantaneous_utility(spec, scenario, st.gains[z], a, i)
                                     for i in range(scenario.K)])
    return out


class TestPayoffs:
    def test_single_atom(self, noisy):
        sc, ob, spec = noisy
        prof = random_profile(sc, ob, np.random.default_rng(0))
        np.testing.assert_allclose(per_user_expected_utilities(AuxiliaryMix.single(prof), sc, ob, spec),
                                   per_user_expected_utilities(prof, sc, ob, spec), rtol=1e-15)

    def test_half_half(self, noisy):
        sc, ob, spec = noisy
        rng = np.random.default_rng(1)
        f, g = random_profile(sc, ob, rng), random_profile(sc, ob, rng)
        mix = AuxiliaryMix(((0.5, f), (0.5, g)))
        expect = 0.5 * per_user_expected_utilities(f, sc, ob, spec) + \
            0.5 * per_user_expected_utilities(g, sc, ob, spec)
        np.testing.assert_allclose(per_user_expected_utilities(mix, sc, ob, spec), expect, rtol=1e-14)

    def test_factorized_oracle(self, noisy):
        sc, ob, spec = noisy
        rng = np.random.default_rng(2)
        mix = AuxiliaryMix(((0.3, random_profile(sc, ob, rng)), (0.7, random_profile(sc, ob, rng))))
        np.testing.assert_allclose(per_user_expected_utilities(mix, sc, ob, spec),
                                   nested_loop_payoff(mix, sc, ob, spec), rtol=1e-12)

    def test_joint_law_is_distribution(self, noisy):
        sc, ob, spec = noisy
        q = joint_law(random_profile(sc, ob, np.random.default_rng(3)), sc, ob)
        assert q.min() >= 0 and q.sum() == pytest.approx(1.0, abs=1e-12)

    def test_bad_lottery(self, noisy):
        sc, ob, _ = noisy
        f = DecisionProfile.constant(ob, 0)
        with pytest.raises(ValueError):
            AuxiliaryMix(((0.6, f), (0.6, f)))


class TestCardinality:
    def test_binary_binary(self):
        sc = Scenario(2, 1, 1.0, 1.0, 0.01, 0.0, 1.0, np.ones((2, 2, 1)), np.array([0.0, 1.0]))
        ob = build_observation("individual", sc, discrete_state_alphabet(sc, [0.5, 1.0]))
        assert cardinality_bound(sc, ob) == 15

    def test_no_csi(self):
        sc = Scenario(2, 1, 1.0, 1.0, 0.01, 0.0, 1.0, np.ones((2, 2, 1)), np.array([0.0, 1.0]))
        ob = build_observation("constant", sc, discrete_state_alphabet(sc, [0.5, 1.0]))
        assert cardinality_bound(sc, ob) == 3


class TestFrontier:
    def test_single_action_single_point(self, small):
        sc0, st = small
        sc = Scenario(2, 1, 0.1, 0.1, 0.01, 0.0, 1.0, sc0.gain_means, np.array([0.0]))
        st = build_state_alphabet(sc, 2)
        front = exhaustive_frontier(sc, build_observation("individual", sc, st),
                                    energy_efficiency(Psi("outage", 1.0), 2))
        assert len({tuple(p.payoff) for p in front.points}) == 1

    def test_endpoint_maximizes_user_one(self, noisy):
        sc, ob, spec = noisy
        tables, pay = all_profile_payoffs(sc, ob, spec)
        front = exhaustive_frontier(sc, ob, spec, [[1.0, 0.0]])
        assert front.points[0].payoff[0] == pytest.approx(pay[..., 0].max(), rel=1e-14)

    def test_no_csi_sum_rate_matches_multistart(self):
        sc = Scenario(2, 1, 0.1, 0.1, 0.01, 0.0, 1.0,
                      np.array([[[1.0], [0.6]], [[0.6], [1.0]]]), np.array([0.0, 0.1]))
        st = build_state_alphabet(sc, 2)
        ob = build_observation("constant", sc, st)
        spec = shannon_rate(2)
        value, _ = exhaustive_optimum(sc, ob, spec)
        assert multistart_synthesize(sc, ob, spec, n_starts=20).value == pytest.approx(value, rel=1e-12)

    def test_points_are_achievable_and_undominated(self, noisy):
        sc, ob, spec = noisy
        front = exhaustive_frontier(sc, ob, spec)
        pay = front.payoffs()
        for p in front.points:
            np.testing.assert_allclose(per_user_expected_utilities(p.achiever, sc, ob, spec),
                                       p.payoff, rtol=1e-12)
            assert not np.any(np.all(pay >= p.payoff, axis=1) & np.any(pay > p.payoff, axis=1))

    def test_common_signal_shortcut_matches_enumeration(self, small):
        sc, st = small
        ob = build_observation("direct", sc, st)
        spec = energy_efficiency(Psi("outage", 1.0), 2)
        _, pay = all_profile_payoffs(sc, ob, spec)
        for lam in lambda_grid(2, 11):
            value = exhaustive_frontier(sc, ob, spec, [lam]).points[0].payoff @ lam
            assert value == pytest.approx((pay @ lam).max(), rel=1e-12)

    def test_budget(self, noisy):
        with pytest.raises(BudgetExceeded):
            exhaustive_frontier(*noisy, budget=3)

    def test_information_ordering(self):
        sc = interference_scenario(2, 1, cross_mean=0.5, noise=0.01, p_max=0.1, n_levels=2)
        st = build_state_alphabet(sc, 2)
        spec = shannon_rate(2)
        grid = lambda_grid(2, 11)
        best = {}
        for label in ("individual", "local", "direct", "global"):
            front = exhaustive_frontier(sc, build_observation(label, sc, st), spec, grid,
                                        budget=10**7)
            pay = front.payoffs()
            best[label] = np.array([(pay @ lam).max() for lam in grid])
        tol = 1e-12
        assert np.all(best["individual"] <= best["local"] * (1 + tol))
        assert np.all(best["local"] <= best["global"] * (1 + tol))
        assert np.all(best["individual"] <= best["direct"] * (1 + tol))
        assert np.all(best["direct"] <= best["global"] * (1 + tol))


class TestQosLottery:
    def test_zero_qos_is_best_vertex(self, noisy):
        sc, ob, spec = noisy
        verts = enumerate_vertices(sc, ob, spec)
        sol = qos_mixture_lp(verts, spec.weights, np.zeros(2))
        best = max(v.payoff @ np.asarray(spec.weights) for v in verts)
        assert sol.status == "optimal" and sol.value == pytest.approx(best, rel=1e-12)

    def test_mac_reproduction(self):
        pb, qos = mac_qos_problem(20.0)
        verts = enumerate_vertices(pb.scenario, pb.observation, pb.spec)
        sol = qos_mixture_lp(verts, pb.spec.weights, qos)
        assert sol.status == "optimal"
        probs = sorted(sol.mix.probs, reverse=True)
        assert probs[0] == pytest.approx(0.516, abs=0.02)
        assert probs[1] == pytest.approx(0.484, abs=0.02)
        for p, prof in sol.mix.support:
            active = [bool(np.any(t > 0)) for t in prof.tables]
            assert sum(active) == 1
        assert np.all(sol.payoff >= qos - 1e-9)

    def test_infeasible(self, noisy):
        sc, ob, spec = noisy
        verts = enumerate_vertices(sc, ob, spec)
        top = np.max([v.payoff for v in verts], axis=0)
        sol = qos_mixture_lp(verts, spec.weights, top * 1.01)
        assert sol.status == "infeasible" and sol.mix is None

    def test_support_bounds(self, noisy):
        sc, ob, spec = noisy
        verts = enumerate_vertices(sc, ob, spec)
        top = np.max([v.payoff for v in verts], axis=0)
        for frac in (0.2, 0.4, 0.45):
            sol = qos_mixture_lp(verts, spec.weights, top * frac)
            if sol.status == "optimal":
                assert len(sol.mix.support) <= min(cardinality_bound(sc, ob), sc.K + 1)
                mixed = per_user_expected_utilities(sol.mix, sc, ob, spec)
                np.testing.assert_allclose(mixed, sol.payoff, rtol=1e-9)

    def test_needs_vertices(self):
        with pytest.raises(ValueError):
            qos_mixture_lp([], (0.5, 0.5), [0, 0])

    def test_lp_agrees_with_scipy(self, noisy):
        from scipy.optimize import linprog
        sc, ob, spec = noisy
        verts = enumerate_vertices(sc, ob, spec)
        U = np.array([v.payoff for v in verts])
        qos = U.max(axis=0) * 0.4
        sol = qos_mixture_lp(verts, spec.weights, qos)
        ref = linprog(-(U @ spec.weights), A_ub=-U.T, b_ub=-qos, A_eq=np.ones((1, len(U))),
                      b_eq=[1], method="highs")
        assert sol.value == pytest.approx(-ref.fun, rel=1e-9)


class TestFactorization:
    def test_deterministic_zero_tv(self):
        sc = interference_scenario(2, 1, noise=0.01, p_max=0.1, n_levels=2)
        st = discrete_state_alphabet(sc, [1.0])
        ob = build_observation("constant", sc, st)
        res = factorization_check(DecisionProfile.constant(ob, 1), sc, ob,
                                  energy_efficiency(Psi("outage", 1.0), 2), n_blocks=10_000)
        assert res.tv_distance == 0.0

    def test_time_average_consistent(self, noisy):
        sc, ob, spec = noisy
        rng = np.random.default_rng(4)
        mix = AuxiliaryMix(((0.4, random_profile(sc, ob, rng)), (0.6, random_profile(sc, ob, rng))))
        res = factorization_check(mix, sc, ob, spec, n_blocks=100_000, seed=3)
        assert np.all(np.abs(res.empirical_utilities - res.analytic_utilities)
                      <= 3 * res.standard_errors + 1e-9)

    def test_tv_shrinks(self, noisy):
        sc, ob, spec = noisy
        prof = random_profile(sc, ob, np.random.default_rng(5))
        small = np.mean([factorization_check(prof, sc, ob, spec, 10_000, s).tv_distance for s in range(5)])
        big = np.mean([factorization_check(prof, sc, ob, spec, 160_000, s).tv_distance for s in range(5)])
        assert big < small / 2
