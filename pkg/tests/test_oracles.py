import math

import numpy as np
import pytest
from scipy import stats

from dataval import (
    DataError,
    KnnConfig,
    KnnUtilityOracle,
    LabeledDataset,
    McConfig,
    SplitMix64,
    TabulatedOracle,
    exact_loo,
    exact_shapley,
    mc_shapley,
    rank_correlation,
)
from conftest import random_tabulated, symmetric_tabulated


def additive_oracle(weights):
    n = len(weights)
    table = np.empty(1 << n)
    for mask in range(1 << n):
        table[mask] = sum(weights[i] for i in range(n) if mask >> i & 1)
    return TabulatedOracle(table, n)


def knn_fixture_oracle():
    train = LabeledDataset(np.array([[0.0], [1.0], [2.0]]), np.array([0, 1, 0]))
    val = LabeledDataset(np.array([[-0.5]]), np.array([0]))
    return KnnUtilityOracle(train, val, KnnConfig(k=2))


class TestExactLoo:
    def test_constant_oracle_all_zero(self):
        oracle = TabulatedOracle(np.full(8, 0.7), 3)
        np.testing.assert_array_equal(exact_loo(oracle, 3), np.zeros(3))

    def test_additive_oracle_returns_weights(self):
        w = [0.3, -0.2, 1.5, 0.0]
        np.testing.assert_allclose(exact_loo(additive_oracle(w), 4), w, atol=1e-15)

    def test_knn_fixture(self):
        np.testing.assert_array_equal(exact_loo(knn_fixture_oracle(), 3), [0.0, -0.5, 0.0])

    def test_oracle_failure_names_subset(self):
        class Broken(TabulatedOracle):
            def u(self, mask):
                if mask == 0b101:
                    raise RuntimeError("boom")
                return super().u(mask)

        oracle = Broken(np.zeros(8), 3)
        with pytest.raises(DataError, match="subset 0x5"):
            exact_loo(oracle, 3)


class TestExactShapley:
    def test_additive_oracle_returns_weights(self):
        w = [0.3, -0.2, 1.5, 0.0]
        np.testing.assert_allclose(exact_shapley(additive_oracle(w), 4), w, atol=1e-12)

    def test_constant_oracle_all_zero(self):
        oracle = TabulatedOracle(np.full(16, 0.7), 4)
        values = exact_shapley(oracle, 4)
        np.testing.assert_allclose(values, np.zeros(4), atol=1e-15)
        assert abs(values.sum()) <= 1e-15

    def test_knn_fixture(self):
        values = exact_shapley(knn_fixture_oracle(), 3)
        np.testing.assert_allclose(values, [1 / 3, -1 / 6, 1 / 3], atol=1e-12)

    def test_cap_refusal_names_cap(self):
        oracle = TabulatedOracle(np.zeros(2), 1)
        oracle.n_players = 25  # simulate an oversized game
        with pytest.raises(DataError, match="cap is 20"):
            exact_shapley(oracle, 25)

    def test_memoization_is_bit_exact(self, rng):
        oracle = random_tabulated(rng, 8)
        a = exact_shapley(oracle, 8, memoize=True)
        b = exact_shapley(oracle, 8, memoize=False)
        assert np.array_equal(a.view(np.uint64), b.view(np.uint64))

    def test_group_rationality_random_games(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 11))
            oracle = random_tabulated(rng, n)
            values = exact_shapley(oracle, n)
            total = oracle.u((1 << n) - 1) - oracle.u(0)
            assert abs(values.sum() - total) <= 1e-9

    def test_symmetric_players_get_equal_values(self, rng):
        for _ in range(5):
            n = int(rng.integers(3, 9))
            i, j = sorted(rng.choice(n, size=2, replace=False))
            oracle = symmetric_tabulated(rng, n, int(i), int(j))
            values = exact_shapley(oracle, n)
            assert abs(values[i] - values[j]) <= 1e-12

    def test_additivity_across_summed_games(self, rng):
        for _ in range(5):
            n = int(rng.integers(2, 9))
            g1 = random_tabulated(rng, n)
            g2 = random_tabulated(rng, n)
            summed = TabulatedOracle(g1.table + g2.table, n)
            lhs = exact_shapley(g1, n) + exact_shapley(g2, n)
            rhs = exact_shapley(summed, n)
            np.testing.assert_allclose(lhs, rhs, atol=1e-9)


class TestTabulatedFile:
    def test_round_trip(self, tmp_path, rng):
        oracle = random_tabulated(rng, 4)
        path = tmp_path / "game.txt"
        oracle.to_file(path)
        back = TabulatedOracle.from_file(path, 4)
        assert np.array_equal(oracle.table, back.table)

    def test_missing_subset(self, tmp_path):
        path = tmp_path / "game.txt"
        path.write_text("0 0.0\n1 1.0\n", encoding="utf-8")
        with pytest.raises(DataError, match="missing utility"):
            TabulatedOracle.from_file(path, 2)

    def test_bad_line(self, tmp_path):
        path = tmp_path / "game.txt"
        path.write_text("0 0.0 junk\n", encoding="utf-8")
        with pytest.raises(DataError, match="line 1"):
            TabulatedOracle.from_file(path, 1)

    def test_mask_out_of_range(self, tmp_path):
        path = tmp_path / "game.txt"
        path.write_text("ff 0.0\n", encoding="utf-8")
        with pytest.raises(DataError, match="out of range"):
            TabulatedOracle.from_file(path, 2)


class TestSplitMix64:
    def test_published_reference_stream(self):
        # first outputs of the reference SplitMix64 at seed 0
        gen = SplitMix64(0)
        assert [gen.next_u64() for _ in range(3)] == [
            0xE220A8397B1DCDAF,
            0x6E789E6AA1B965F4,
            0x06C45D188009454F,
        ]

    def test_shuffle_uniformity_chi_square(self):
        n, trials = 6, 30_000
        gen = SplitMix64(99)
        counts = np.zeros((n, n))
        for _ in range(trials):
            perm = list(range(n))
            gen.shuffle(perm)
            for pos, point in enumerate(perm):
                counts[point, pos] += 1
        expected = trials / n
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        # (n-1)^2 degrees of freedom; generous 1e-6 quantile guard
        assert chi2 < stats.chi2.ppf(1 - 1e-6, (n - 1) ** 2)


class TestMcShapley:
    def test_same_seed_reproduces_bitwise(self, rng):
        oracle = random_tabulated(rng, 6)
        cfg = McConfig(permutations=500, seed=123)
        a, _ = mc_shapley(oracle, 6, cfg)
        b, _ = mc_shapley(oracle, 6, cfg)
        assert np.array_equal(a.view(np.uint64), b.view(np.uint64))

    def test_two_seeds_differ_but_agree_loosely(self, rng):
        oracle = random_tabulated(rng, 6, zero_empty=True)
        exact = exact_shapley(oracle, 6)
        a, _ = mc_shapley(oracle, 6, McConfig(permutations=20_000, seed=1))
        b, _ = mc_shapley(oracle, 6, McConfig(permutations=20_000, seed=2))
        assert not np.array_equal(a, b)
        assert np.max(np.abs(a - exact)) < 0.05
        assert np.max(np.abs(b - exact)) < 0.05

    def test_no_truncation_with_zero_tolerance(self, rng):
        oracle = random_tabulated(rng, 5)
        _, diag = mc_shapley(oracle, 5, McConfig(permutations=50, seed=0))
        assert diag.mean_truncation_position == 5.0
        assert diag.permutations_used == 50

    def test_infinite_tolerance_credits_first_point_only(self, rng):
        oracle = random_tabulated(rng, 5)
        cfg = McConfig(permutations=400, seed=7,
                       truncation_tolerance=float("inf"))
        est, diag = mc_shapley(oracle, 5, cfg)
        assert diag.mean_truncation_position == 1.0
        # replay the documented permutation stream, first points only
        gen = SplitMix64(7)
        sums = np.zeros(5)
        u0 = oracle.u(0)
        for _ in range(400):
            perm = list(range(5))
            gen.shuffle(perm)
            first = perm[0]
            sums[first] += oracle.u(1 << first) - u0
        np.testing.assert_array_equal(est, sums / 400)

    def test_truncation_shortens_scans_without_breaking_estimate(self, rng):
        oracle = random_tabulated(rng, 6, zero_empty=True)
        exact = exact_shapley(oracle, 6)
        est, diag = mc_shapley(oracle, 6, McConfig(
            permutations=20_000, seed=3, truncation_tolerance=0.05))
        assert diag.mean_truncation_position < 6.0
        assert np.max(np.abs(est - exact)) < 0.1

    def test_early_stopping_halts_on_constant_oracle(self):
        oracle = TabulatedOracle(np.full(32, 2.0), 5)
        cfg = McConfig(permutations=10_000, seed=0,
                       early_stop_window=50, early_stop_threshold=1e-12)
        est, diag = mc_shapley(oracle, 5, cfg)
        assert diag.permutations_used < 200
        np.testing.assert_array_equal(est, np.zeros(5))

    def test_unbiased_over_seeds(self, rng):
        oracle = random_tabulated(rng, 6, zero_empty=True)
        exact = exact_shapley(oracle, 6)
        seeds = range(40, 60)
        ests = np.array([
            mc_shapley(oracle, 6, McConfig(permutations=500, seed=s))[0]
            for s in seeds
        ])
        mean = ests.mean(axis=0)
        se = ests.std(axis=0, ddof=1) / math.sqrt(len(ests))
        assert np.all(np.abs(mean - exact) <= 3 * se + 1e-12)

    def test_config_validation(self):
        with pytest.raises(DataError):
            McConfig(permutations=0)
        with pytest.raises(DataError):
            McConfig(truncation_tolerance=-1.0)


class TestRankCorrelation:
    def test_identical_vectors(self, rng):
        a = rng.normal(size=10)
        rho, p = rank_correlation(a, a.copy())
        assert rho == 1.0 and p == 0.0

    def test_reversed_ranking(self, rng):
        a = rng.normal(size=10)
        rho, p = rank_correlation(a, -a)
        assert rho == -1.0 and p == 0.0

    def test_tied_ranks_hand_computed(self):
        # ranks of a: (1, 2.5, 2.5, 4); ranks of b: (1, 3, 2, 4)
        a = [1.0, 2.0, 2.0, 3.0]
        b = [10.0, 30.0, 20.0, 40.0]
        rho, _ = rank_correlation(a, b)
        assert rho == pytest.approx(math.sqrt(0.9), abs=1e-15)

    def test_matches_scipy(self, rng):
        a = rng.normal(size=25)
        b = a + rng.normal(size=25)
        rho, p = rank_correlation(a, b)
        ref = stats.spearmanr(a, b)
        assert rho == pytest.approx(ref.statistic, abs=1e-12)
        assert p == pytest.approx(ref.pvalue, abs=1e-12)

    def test_constant_vector_rejected(self):
        with pytest.raises(DataError, match="constant"):
            rank_correlation([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_length_mismatch(self):
        with pytest.raises(DataError, match="equal-length"):
            rank_correlation([1.0, 2.0, 3.0], [1.0, 2.0])

    def test_too_short(self):
        with pytest.raises(DataError, match="length >= 3"):
            rank_correlation([1.0, 2.0], [2.0, 1.0])
