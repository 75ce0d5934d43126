import math

import numpy as np
import pytest
from scipy import stats

from partialcsi.model import interference_scenario, mac_scenario
from partialcsi.observe import (GainQuantizer, ObservationModel, build_noisy_individual,
                                build_observation, build_state_alphabet, calibrate_noise,
                                confusion_matrix, discrete_state_alphabet,
                                exponential_gain_law, max_entropy_quantize, realized_esnr)


@pytest.fixture(scope="module")
def setup():
    sc = interference_scenario(2, 1, n_levels=3)
    return sc, build_state_alphabet(sc, 3)


@pytest.fixture(scope="module")
def reference():
    sc = interference_scenario(2, 1, n_levels=3)
    return sc, build_state_alphabet(sc, 15)


class TestQuantizer:
    def test_uniform_quartiles(self):
        q = max_entropy_quantize(stats.uniform(0, 1), 4)
        np.testing.assert_allclose(q.boundaries, [0.25, 0.5, 0.75], atol=1e-12)
        np.testing.assert_allclose(q.representatives, [0.125, 0.375, 0.625, 0.875], atol=1e-9)

    def test_exponential_two_cells(self):
        q = max_entropy_quantize(exponential_gain_law(1.0), 2)
        ln2 = math.log(2)
        assert q.boundaries[0] == pytest.approx(ln2, rel=1e-12)
        np.testing.assert_allclose(q.representatives, [1 - ln2, 1 + ln2], rtol=1e-8)

    def test_single_cell(self):
        q = max_entropy_quantize(exponential_gain_law(2.5), 1)
        assert len(q.boundaries) == 0
        assert q.representatives[0] == pytest.approx(2.5)

    def test_rejects_zero_cells(self):
        with pytest.raises(ValueError):
            max_entropy_quantize(exponential_gain_law(1.0), 0)

    @pytest.mark.parametrize("n", [2, 5, 15])
    def test_cells_equiprobable(self, n):
        law = exponential_gain_law(1.0)
        q = max_entropy_quantize(law, n)
        np.testing.assert_allclose(q.cell_probs, 1.0 / n, atol=1e-9)
        x = law.rvs(size=1_000_000, random_state=np.random.default_rng(11))
        counts = np.bincount(q.cell_of(x), minlength=n)
        assert stats.chisquare(counts).pvalue > 0.01

    def test_representatives_inside_cells(self):
        q = max_entropy_quantize(exponential_gain_law(0.7), 9)
        edges = np.concatenate(([0.0], q.boundaries, [np.inf]))
        assert np.all(np.diff(q.representatives) > 0)
        assert np.all((q.representatives > edges[:-1]) & (q.representatives < edges[1:]))

    def test_negative_values_to_lowest_cell(self):
        q = max_entropy_quantize(exponential_gain_law(1.0), 3)
        assert q.cell_of(np.array([-3.0]))[0] == 0

    def test_invalid_quantizer(self):
        with pytest.raises(ValueError):
            GainQuantizer(np.array([0.5]), np.array([0.6, 0.4]), np.array([0.5, 0.5]))


class TestStateAlphabet:
    def test_probabilities_and_shapes(self):
        sc = interference_scenario(2, 1, n_levels=3)
        st = build_state_alphabet(sc, 3)
        assert len(st) == 3**4
        assert st.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert st.gains.shape == (81, 2, 2, 1)
        assert st.states.shape == (81, 4)

    def test_mac_shares_rows(self):
        sc = mac_scenario(2, 2, gain_mean=1.0)
        st = build_state_alphabet(sc, 2)
        assert len(st) == 2**4
        g = st.gains
        np.testing.assert_array_equal(g[:, 0, 0], g[:, 0, 1])

    def test_discrete_levels(self):
        sc = mac_scenario(2, 1)
        st = discrete_state_alphabet(sc, [0.3, 1.0])
        assert sorted(set(st.values.ravel())) == [0.3, 1.0]
        np.testing.assert_allclose(st.probs, 0.25)


class TestDeterministicStructures:
    def test_global_is_identity(self, setup):
        sc, st = setup
        ob = build_observation("global", sc, st)
        for i in range(2):
            np.testing.assert_array_equal(ob.table(i), np.eye(len(st)))

    def test_individual_projects_direct_gain(self, setup):
        sc, st = setup
        ob = build_observation("individual", sc, st)
        assert ob.n_signals == (3, 3)
        q = st.quantizers[0]
        np.testing.assert_array_equal(q.representatives[ob.index_maps[0]], st.gains[:, 0, 0, 0])
        np.testing.assert_array_equal(
            st.quantizers[3].representatives[ob.index_maps[1]], st.gains[:, 1, 1, 0])

    def test_constant(self, setup):
        sc, st = setup
        ob = build_observation("constant", sc, st)
        assert ob.n_signals == (1, 1)
        np.testing.assert_array_equal(ob.table(0), np.ones((1, len(st))))

    def test_unknown_label(self, setup):
        with pytest.raises(ValueError):
            build_observation("telepathy", *setup)

    @pytest.mark.parametrize("label", ["global", "direct", "local", "individual", "constant"])
    def test_column_stochastic(self, setup, label):
        ob = build_observation(label, *setup)
        for i in range(2):
            t = ob.table(i)
            np.testing.assert_allclose(t.sum(axis=0), 1.0)
            assert set(np.unique(t)) <= {0.0, 1.0}

    @pytest.mark.parametrize("fine,coarse", [("local", "individual"), ("global", "direct"),
                                             ("global", "local"), ("direct", "individual")])
    def test_garbling(self, setup, fine, coarse):
        """The coarse table is a deterministic projection of the fine one."""
        sc, st = setup
        F, C = build_observation(fine, sc, st), build_observation(coarse, sc, st)
        for i in range(2):
            proj = np.zeros((C.n_signals[i], F.n_signals[i]))
            for z in range(len(st)):
                proj[C.index_maps[i][z], F.index_maps[i][z]] = 1.0
            assert np.all(proj.sum(axis=0) <= 1)
            np.testing.assert_array_equal(proj @ F.table(i), C.table(i))


class TestNoisyIndividual:
    def test_infinite_esnr_is_identity(self, reference):
        sc, st = reference
        noisy = build_noisy_individual(sc, st, math.inf, mc_samples=1000)
        exact = build_observation("individual", sc, st)
        for i in range(2):
            np.testing.assert_array_equal(noisy.table(i), exact.table(i))

    def test_columns_stochastic(self, reference):
        sc, st = reference
        ob = build_noisy_individual(sc, st, 6.0, mc_samples=100_000, calib_samples=200_000)
        for i in range(2):
            np.testing.assert_allclose(ob.table(i).sum(axis=0), 1.0, atol=1e-3)
        assert not ob.is_deterministic(0)

    def test_zero_db_remeasured(self):
        law = exponential_gain_law(1.0)
        q = max_entropy_quantize(law, 15)
        std = calibrate_noise(law, q, 0.0, n_samples=1_000_000, seed=0)
        fresh = realized_esnr(law, q, std, 1_000_000, np.random.default_rng(12345))
        assert abs(10 * np.log10(fresh)) < 0.1

    def test_unreachable_target(self):
        law = exponential_gain_law(1.0)
        q = max_entropy_quantize(law, 2)
        with pytest.raises(ValueError):
            calibrate_noise(law, q, 40.0, n_samples=100_000)

    def test_confusion_converges(self):
        law = exponential_gain_law(1.0)
        q = max_entropy_quantize(law, 5)
        a = confusion_matrix(law, q, 0.5, 100_000, np.random.default_rng(1))
        b = confusion_matrix(law, q, 0.5, 200_000, np.random.default_rng(2))
        se = np.sqrt(np.maximum(a * (1 - a), 1e-12) / 100_000)
        assert np.all(np.abs(a - b) <= 3 * se + 1e-12)

    def test_sampled_signals_follow_table(self, reference):
        sc, st = reference
        ob = build_noisy_individual(sc, st, 0.0, mc_samples=20_000, calib_samples=200_000)
        z = np.full(200_000, 7 * 15**3 + 3)
        s = ob.sample_signals(z, np.random.default_rng(4))
        emp = np.bincount(s[:, 0], minlength=15) / len(z)
        np.testing.assert_allclose(emp, ob.table(0)[:, z[0]], atol=5e-3)

    def test_from_tables_validation(self, reference):
        _, st = reference
        with pytest.raises(ValueError):
            ObservationModel.from_tables(st, [np.full((2, len(st)), 0.4)] * 2)
