import math

import numpy as np
import pytest

from dataval import (
    DataError,
    DistanceMetric,
    KnnConfig,
    LabeledDataset,
    PrivacyParams,
    compute_ordering,
    dp_value_gap_bounds,
    gaussian_blobs,
    knn_loo_single,
    knn_shapley_single,
    order_preserving_test,
    pool_utility_samples,
    privacy_loss,
    stability_value_gap_bounds,
)


def separated_instance(seed=5, n=20, pool_n=200):
    """Gaussian train/pool around one validation point, mixed labels."""
    rng = np.random.default_rng(seed)
    val_feature = np.zeros(2)
    train = LabeledDataset(rng.normal(scale=1.5, size=(n, 2)),
                           rng.integers(0, 2, n).astype(np.int64))
    pool = LabeledDataset(rng.normal(scale=1.5, size=(pool_n, 2)),
                          rng.integers(0, 2, pool_n).astype(np.int64))
    return train, val_feature, 0, pool


class TestOrderPreservingTest:
    def test_duplicated_point_is_inconclusive(self):
        train = LabeledDataset(np.array([[1.0, 0.0], [1.0, 0.0], [3.0, 0.0]]),
                               np.array([0, 0, 1]))
        pool = gaussian_blobs(100, d=2, seed=3)
        report = order_preserving_test(
            train, np.zeros(2), 0, "knn-shapley", KnnConfig(k=2), (0, 1), pool,
            samples=500, seed=1)
        assert report.value_gap == 0.0
        assert report.expected_diff == 0.0
        assert report.verdict == "inconclusive"

    def test_reproducible_given_seed(self):
        train, val_feature, val_label, pool = separated_instance()
        kwargs = dict(samples=400, seed=11)
        a = order_preserving_test(train, val_feature, val_label, "knn-shapley",
                                  KnnConfig(k=3), (0, 1), pool, **kwargs)
        b = order_preserving_test(train, val_feature, val_label, "knn-shapley",
                                  KnnConfig(k=3), (0, 1), pool, **kwargs)
        assert a == b

    def test_ci_shrinks_with_samples(self):
        train, val_feature, val_label, pool = separated_instance()
        small = order_preserving_test(train, val_feature, val_label,
                                      "knn-shapley", KnnConfig(k=3), (0, 1),
                                      pool, samples=400, seed=2)
        large = order_preserving_test(train, val_feature, val_label,
                                      "knn-shapley", KnnConfig(k=3), (0, 1),
                                      pool, samples=10_000, seed=2)
        ratio = (small.ci_high - small.ci_low) / (large.ci_high - large.ci_low)
        # widths scale like 1/sqrt(samples): expect about 5
        assert 3.0 < ratio < 8.0

    def test_near_pair_with_differing_labels_agrees_for_both_measures(self):
        train, val_feature, val_label, pool = separated_instance(seed=8, n=30)
        config = KnnConfig(k=5)
        order = np.argsort(
            np.einsum("ij,ij->i", train.features - val_feature,
                      train.features - val_feature), kind="stable")
        matches = train.labels == val_label
        # two of the K nearest neighbors with different labels
        head = [i for i in order[:5]]
        pos = [i for i in head if matches[i]]
        neg = [i for i in head if not matches[i]]
        if not pos or not neg:
            pytest.skip("instance lacks a mixed-label pair inside K")
        pair = (pos[0], neg[0])
        for measure in ("knn-shapley", "knn-loo"):
            report = order_preserving_test(train, val_feature, val_label,
                                           measure, config, pair, pool,
                                           samples=20_000, seed=4)
            assert report.verdict == "agrees", (measure, report)

    def test_far_pair_shows_loo_blindness(self):
        # differing labels beyond the K nearest: leave-one-out sees no gap,
        # but the expected utility difference is real
        train, val_feature, val_label, pool = separated_instance(seed=9, n=30)
        config = KnnConfig(k=3)
        dist = np.einsum("ij,ij->i", train.features - val_feature,
                         train.features - val_feature)
        order = np.argsort(dist, kind="stable")
        matches = train.labels == val_label
        tail = list(order[3:])
        pos = [i for i in tail if matches[i]]
        neg = [i for i in tail if not matches[i]]
        pair = (pos[0], neg[0])
        loo = order_preserving_test(train, val_feature, val_label, "knn-loo",
                                    config, pair, pool, samples=30_000, seed=5)
        assert loo.value_gap == 0.0
        assert not (loo.ci_low <= 0.0 <= loo.ci_high)
        assert loo.verdict == "disagrees"
        shap = order_preserving_test(train, val_feature, val_label,
                                     "knn-shapley", config, pair, pool,
                                     samples=30_000, seed=5)
        assert shap.verdict == "agrees"

    def test_shared_samples_match_fresh_draws(self):
        train, val_feature, val_label, pool = separated_instance()
        config = KnnConfig(k=3)
        shared = pool_utility_samples(train, val_feature, val_label, config,
                                      pool, samples=300, seed=6)
        a = order_preserving_test(train, val_feature, val_label, "knn-shapley",
                                  config, (2, 3), pool, samples=300, seed=6)
        b = order_preserving_test(train, val_feature, val_label, "knn-shapley",
                                  config, (2, 3), pool, samples=300, seed=6,
                                  utility_samples=shared)
        assert a == b

    def test_identical_pair_rejected(self):
        train, val_feature, val_label, pool = separated_instance()
        with pytest.raises(DataError, match="distinct"):
            order_preserving_test(train, val_feature, val_label, "knn-shapley",
                                  KnnConfig(k=3), (2, 2), pool, samples=200, seed=0)

    def test_small_sample_count_rejected(self):
        train, val_feature, val_label, pool = separated_instance()
        with pytest.raises(DataError, match="samples >= 100"):
            order_preserving_test(train, val_feature, val_label, "knn-shapley",
                                  KnnConfig(k=3), (0, 1), pool, samples=50, seed=0)

    def test_unknown_measure_rejected(self):
        train, val_feature, val_label, pool = separated_instance()
        with pytest.raises(DataError, match="measure"):
            order_preserving_test(train, val_feature, val_label, "influence",
                                  KnnConfig(k=3), (0, 1), pool, samples=200, seed=0)


class TestPoolUtilitySamples:
    def test_matches_direct_utility_evaluation(self, rng):
        # cross-check the incremental formula against a direct KNN utility
        # computed on the combined set, for a handful of draws
        train = LabeledDataset(rng.normal(size=(6, 2)),
                               rng.integers(0, 2, 6).astype(np.int64))
        pool = LabeledDataset(rng.normal(size=(30, 2)),
                              rng.integers(0, 2, 30).astype(np.int64))
        val_feature = rng.normal(size=2)
        k = 3
        samples = pool_utility_samples(train, val_feature, 1, KnnConfig(k=k),
                                       pool, samples=120, seed=42)
        # replay the same draws
        rng2 = np.random.default_rng(42)
        pool_dist = np.einsum("ij,ij->i", pool.features - val_feature,
                              pool.features - val_feature)
        pool_sorted = np.argsort(pool_dist, kind="stable")
        for t in range(120):
            s = int(rng2.integers(0, pool.n + 1))
            members = np.sort(rng2.choice(pool.n, size=s, replace=False))
            member_ids = pool_sorted[members]
            for p in range(train.n):
                feats = np.vstack([pool.features[member_ids], train.features[p]])
                labels = np.concatenate([pool.labels[member_ids], [train.labels[p]]])
                dist = np.einsum("ij,ij->i", feats - val_feature, feats - val_feature)
                order = np.argsort(dist, kind="stable")
                hits = sum(int(labels[idx] == 1) for idx in order[: min(k, len(order))])
                assert samples[t, p] == pytest.approx(hits / k, abs=1e-12)

    def test_size_range_respected(self, rng):
        train = LabeledDataset(rng.normal(size=(4, 2)),
                               rng.integers(0, 2, 4).astype(np.int64))
        pool = LabeledDataset(rng.normal(size=(50, 2)),
                              rng.integers(0, 2, 50).astype(np.int64))
        # all-empty companion sets: utility is match/k exactly
        samples = pool_utility_samples(train, np.zeros(2), 0, KnnConfig(k=2),
                                       pool, samples=100, seed=0, size_range=(0, 0))
        expected = (train.labels == 0).astype(float) / 2
        for t in range(100):
            np.testing.assert_array_equal(samples[t], expected)


class TestDpBounds:
    def test_zero_schedules_give_zero_bounds(self):
        params = PrivacyParams(n=5, eps_schedule=[0.0] * 4,
                               delta_schedule=[0.0] * 4)
        assert dp_value_gap_bounds(params) == (0.0, 0.0)

    def test_ln2_single_step(self):
        params = PrivacyParams(n=2, eps_schedule=[math.log(2.0)],
                               delta_schedule=[0.0])
        loo, shap = dp_value_gap_bounds(params)
        assert loo == pytest.approx(1.0, abs=1e-15)
        assert shap == pytest.approx(1.0, abs=1e-15)

    def test_decreasing_schedule_puts_loo_below_shapley(self):
        eps = [1.0 / (i + 1) for i in range(9)]
        params = PrivacyParams(n=10, eps_schedule=eps, delta_schedule=[0.0] * 9)
        loo, shap = dp_value_gap_bounds(params)
        assert loo < shap

    def test_schedule_too_short(self):
        with pytest.raises(DataError, match="schedules must cover"):
            PrivacyParams(n=5, eps_schedule=[0.1], delta_schedule=[0.0])

    def test_monotone_in_parameters(self):
        base = privacy_loss(0.5, 0.01, c=1)
        assert privacy_loss(0.6, 0.01, c=1) >= base
        assert privacy_loss(0.5, 0.02, c=1) >= base
        assert privacy_loss(0.5, 0.01, c=2) >= base

    def test_group_size_scales_bounds(self):
        eps, delta = [0.2] * 4, [0.001] * 4
        small = dp_value_gap_bounds(PrivacyParams(n=5, eps_schedule=eps,
                                                  delta_schedule=delta, c=1))
        large = dp_value_gap_bounds(PrivacyParams(n=5, eps_schedule=eps,
                                                  delta_schedule=delta, c=3))
        assert large[0] >= small[0] and large[1] >= small[1]


class TestStabilityBounds:
    def test_n2_unit_constant(self):
        assert stability_value_gap_bounds(1.0, 2) == (1.0, 1.0)

    def test_formula_values(self):
        loo, shap = stability_value_gap_bounds(2.0, 11)
        assert loo == pytest.approx(0.2, abs=1e-15)
        assert shap == pytest.approx(0.2 * (1.0 + math.log(10.0)), abs=1e-15)

    def test_shapley_bound_dominates(self, rng):
        for _ in range(20):
            c = float(rng.uniform(0.01, 10.0))
            n = int(rng.integers(2, 1000))
            loo, shap = stability_value_gap_bounds(c, n)
            assert shap >= loo

    def test_monotone_in_constant(self):
        a = stability_value_gap_bounds(1.0, 30)
        b = stability_value_gap_bounds(2.0, 30)
        assert b[0] >= a[0] and b[1] >= a[1]

    def test_small_n_rejected(self):
        with pytest.raises(DataError):
            stability_value_gap_bounds(1.0, 1)

    def test_nonpositive_constant_rejected(self):
        with pytest.raises(DataError):
            stability_value_gap_bounds(0.0, 5)
