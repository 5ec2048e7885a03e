"""Predictive-power and bound analyses for value measures.

The order-preservingness tester asks whether the sign of a value gap between
two training points predicts the sign of the expected utility change from
adding one point versus the other to a random companion set.  Companion sets
are drawn from a held-out pool disjoint from the training data (by default
uniformly: size uniform on [0, pool size], members without replacement), the
paired utility differences are averaged, and a normal-approximation
confidence interval decides the verdict.

The bound evaluators turn privacy and stability parameters of a learning
algorithm into upper bounds on value gaps; they are closed-form formula
evaluations, no training is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .dataset import DataError, LabeledDataset, point_distances
from .knn_values import KnnConfig, knn_loo_single, knn_shapley_single

# two-sided 99% normal quantile
_Z99 = 2.5758293035489004

_MEASURES = ("knn-shapley", "knn-loo")


@dataclass
class OrderPreservingReport:
    """Outcome of one pairwise order-preservingness test.

    ``verdict`` is ``inconclusive`` when the confidence interval contains 0,
    ``agrees`` when the interval and the value gap share a strict sign, and
    ``disagrees`` otherwise (including a zero gap against a nonzero
    interval).
    """

    pair: Tuple[int, int]
    measure: str
    value_gap: float
    expected_diff: float
    ci_low: float
    ci_high: float
    samples: int
    verdict: str


def _verdict(gap: float, lo: float, hi: float) -> str:
    if lo <= 0.0 <= hi:
        return "inconclusive"
    if (gap > 0 and lo > 0) or (gap < 0 and hi < 0):
        return "agrees"
    return "disagrees"


def pool_utility_samples(train: LabeledDataset, val_feature: np.ndarray,
                         val_label: int, config: KnnConfig,
                         pool: LabeledDataset, samples: int, seed: int,
                         size_range: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Sampled utilities U(T + {p}) for every training point p.

    Draws ``samples`` companion sets T from ``pool`` (sizes uniform on
    [0, pool size] unless ``size_range`` narrows it) and returns a
    (samples, n_train) matrix whose column p holds U(T + {p}) for the KNN
    utility at the given validation point.  Sharing the draws across columns
    makes pairwise comparisons paired, which both reduces variance and keeps
    a single pass reusable for every pair.
    """
    if samples < 100:
        raise DataError("order-preserving testing needs samples >= 100")
    if pool.n < 1:
        raise DataError("companion pool is empty")
    k = config.k

    pool_dist = point_distances(pool.features, val_feature, config.metric)
    pool_order = np.argsort(pool_dist, kind="stable")
    sorted_dist = pool_dist[pool_order]
    sorted_match = (pool.labels[pool_order] == val_label).astype(np.int64)

    train_dist = point_distances(train.features, val_feature, config.metric)
    train_match = (train.labels == val_label).astype(np.int64)

    lo, hi = size_range if size_range is not None else (0, pool.n)
    if not (0 <= lo <= hi <= pool.n):
        raise DataError(f"invalid companion size range ({lo}, {hi})")

    rng = np.random.default_rng(seed)
    out = np.empty((samples, train.n))
    for t in range(samples):
        s = int(rng.integers(lo, hi + 1))
        members = np.sort(rng.choice(pool.n, size=s, replace=False))
        m_dist = sorted_dist[members]
        m_match = sorted_match[members]
        cum = np.concatenate(([0], np.cumsum(m_match)))
        # insertion rank of each train point among the drawn members
        # (a member at the exact same distance counts as farther)
        r = np.searchsorted(m_dist, train_dist, side="left")
        if s < k:
            out[t] = (cum[s] + train_match) / k
        else:
            inside = (cum[k - 1] + train_match) / k
            outside = cum[k] / k
            out[t] = np.where(r < k, inside, outside)
    return out


def order_preserving_test(train: LabeledDataset, val_feature: np.ndarray,
                          val_label: int, measure: str, config: KnnConfig,
                          pair: Tuple[int, int], pool: LabeledDataset,
                          samples: int = 10_000, seed: int = 0,
                          utility_samples: Optional[np.ndarray] = None
                          ) -> OrderPreservingReport:
    """Check sign agreement between a value gap and expected utility gaps.

    ``measure`` selects the value gap (``knn-shapley`` or ``knn-loo``)
    computed on the training set for this one validation point.  The
    expected difference E[U(T + {z_i}) - U(T + {z_j})] is estimated over
    random companion sets from ``pool`` with a 99% normal confidence
    interval; pass ``utility_samples`` (from :func:`pool_utility_samples`)
    to reuse one set of draws across many pairs.
    """
    i, j = pair
    if i == j:
        raise DataError("order-preserving test needs two distinct points")
    if measure not in _MEASURES:
        raise DataError(f"unknown value measure {measure!r}")

    dist = point_distances(train.features, val_feature, config.metric)
    order = np.argsort(dist, kind="stable")
    single = knn_shapley_single if measure == "knn-shapley" else knn_loo_single
    values = single(order, train.labels, val_label, config)
    gap = float(values[i] - values[j])

    if utility_samples is None:
        utility_samples = pool_utility_samples(
            train, val_feature, val_label, config, pool, samples, seed)
    diffs = utility_samples[:, i] - utility_samples[:, j]
    n = diffs.shape[0]
    mean = float(np.mean(diffs))
    se = float(np.std(diffs, ddof=1)) / math.sqrt(n) if n > 1 else float("inf")
    lo, hi = mean - _Z99 * se, mean + _Z99 * se
    return OrderPreservingReport(
        pair=(i, j),
        measure=measure,
        value_gap=gap,
        expected_diff=mean,
        ci_low=lo,
        ci_high=hi,
        samples=n,
        verdict=_verdict(gap, lo, hi),
    )


@dataclass
class PrivacyParams:
    """Group size and per-size privacy schedules for the gap bounds.

    ``eps_schedule[i]`` and ``delta_schedule[i]`` give the privacy loss of
    the algorithm when trained on ``i+1`` points; the schedules must cover
    sizes 1..n-1.
    """

    n: int
    eps_schedule: Sequence[float]
    delta_schedule: Sequence[float]
    c: int = 1

    def __post_init__(self):
        if self.c < 1:
            raise DataError("group size c must be a positive integer")
        if self.n < 2:
            raise DataError("need n >= 2 for value-gap bounds")
        if len(self.eps_schedule) < self.n - 1 or len(self.delta_schedule) < self.n - 1:
            raise DataError(
                f"privacy schedules must cover sizes 1..{self.n - 1}"
            )
        if any(e < 0 for e in self.eps_schedule[: self.n - 1]):
            raise DataError("eps schedule must be nonnegative")
        if any(not 0 <= d <= 1 for d in self.delta_schedule[: self.n - 1]):
            raise DataError("delta schedule must lie in [0, 1]")


def privacy_loss(eps: float, delta: float, c: int = 1) -> float:
    """One-record distinguishability after a c-record group change."""
    return math.exp(c * eps) - 1.0 + c * math.exp(c * eps) * delta


def dp_value_gap_bounds(params: PrivacyParams) -> Tuple[float, float]:
    """Value-gap bounds for a differentially private learner.

    The leave-one-out gap is bounded by the privacy loss at size n-1; the
    Shapley gap by the average privacy loss over sizes 1..n-1.  With
    shrinking privacy budgets at larger sizes the average dominates, which
    is why Shapley gaps fade more slowly than leave-one-out gaps.
    """
    losses = [
        privacy_loss(params.eps_schedule[i], params.delta_schedule[i], params.c)
        for i in range(params.n - 1)
    ]
    loo_bound = losses[-1]
    shapley_bound = sum(losses) / (params.n - 1)
    return loo_bound, shapley_bound


def stability_value_gap_bounds(c_stab: float, n: int) -> Tuple[float, float]:
    """Value-gap bounds for a uniformly stable learner.

    Stability constant ``c_stab`` means the loss moves at most c_stab/|S|
    when one training point is dropped.  Bounds: c_stab/(n-1) for
    leave-one-out and c_stab*(1 + log(n-1))/(n-1) for Shapley (natural log).
    """
    if c_stab <= 0:
        raise DataError("stability constant must be positive")
    if n < 2:
        raise DataError("need n >= 2 for value-gap bounds")
    loo_bound = c_stab / (n - 1)
    shapley_bound = c_stab * (1.0 + math.log(n - 1)) / (n - 1)
    return loo_bound, shapley_bound
