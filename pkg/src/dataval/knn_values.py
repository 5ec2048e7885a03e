"""Exact per-point values under the K-nearest-neighbor utility.

The utility of a training subset S for one validation point is the fraction
of the K nearest members of S that carry the validation label (divided by K,
and 0 for the empty set).  Under this utility both the Shapley value and the
leave-one-out value of every training point have closed forms computable in
O(N log N) per validation point: sort once, then one linear pass.

The Shapley pass runs from the farthest point inward: the farthest point is
worth ``match * min(K, N)/(N*K)`` (which is ``match/N`` whenever K <= N), and
each closer point differs from its outward neighbor by
``(match_i - match_{i+1})/K * min(K, i)/i`` where ``i`` is the 1-based
distance rank.  The leave-one-out value is ``(match_i - match_{K+1})/K`` for
the K nearest points and 0 beyond them.

Multi-validation values are aggregated in fixed validation-index order, so
results are bit-identical at any thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import (
    DataError,
    DistanceMetric,
    LabeledDataset,
    NeighborOrdering,
    compute_ordering,
)

AGGREGATIONS = ("mean", "max", "per-val")


@dataclass
class KnnConfig:
    """Neighbor count and metric for the KNN utility.

    ``k`` may exceed the training size; the formulas use ``min(K, |S|)``.
    """

    k: int = 5
    metric: DistanceMetric = DistanceMetric.SQEUCLIDEAN

    def __post_init__(self):
        if self.k < 1:
            raise DataError(f"k must be >= 1, got {self.k}")


@dataclass
class ValueVector:
    """Per-training-point values for one value measure.

    ``values`` aggregates across validation points: the fixed-order
    arithmetic mean for ``mean`` and ``per-val`` aggregation, the running
    maximum for ``max``.  ``per_validation`` (N x M) is retained only when
    requested (``per-val``) since it costs N*M memory.  Provenance fields
    record how the values were produced.
    """

    values: np.ndarray
    aggregation: str
    measure: str
    k: Optional[int] = None
    metric: Optional[str] = None
    seed: Optional[int] = None
    per_validation: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.aggregation not in AGGREGATIONS:
            raise DataError(f"unknown aggregation {self.aggregation!r}")
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise DataError("value vector contains non-finite entries")

    @property
    def n(self) -> int:
        return self.values.shape[0]


def knn_utility(subset, order: np.ndarray, matches: np.ndarray, k: int) -> float:
    """KNN utility of a training subset for one validation point.

    ``subset`` holds training indices, ``order`` is the full distance-sorted
    permutation for the validation point, and ``matches[i]`` says whether
    training point ``i`` carries the validation label.  The empty subset has
    utility 0.
    """
    member = np.zeros(len(order), dtype=bool)
    subset = np.asarray(list(subset), dtype=np.int64)
    if subset.size == 0:
        return 0.0
    member[subset] = True
    picked = 0
    hits = 0
    for idx in order:
        if member[idx]:
            picked += 1
            hits += bool(matches[idx])
            if picked == k:
                break
    return hits / k


def knn_shapley_single(order: np.ndarray, labels: np.ndarray, val_label: int,
                       config: KnnConfig) -> np.ndarray:
    """Exact Shapley values for one validation point, original index order.

    One linear pass over the distance-sorted points, accumulating in the
    same order as the defining recursion (farthest inward) so results are
    reproducible bit for bit.
    """
    n = len(order)
    k = config.k
    m = (labels[order] == val_label).astype(np.float64)
    steps = np.empty(n)
    # The farthest point only contributes to subsets with a vacant neighbor
    # slot; min(k, n)/(n*k) reduces to 1/n whenever k <= n.
    steps[0] = m[n - 1] * (min(k, n) / (k * n))
    if n > 1:
        i = np.arange(1, n, dtype=np.float64)
        coef = np.minimum(k, i) / (k * i)
        # steps[t] for t>=1 carries the recursion increment from rank n-t to n-t-1
        steps[1:] = ((m[:-1] - m[1:]) * coef)[::-1]
    sorted_values = np.cumsum(steps)[::-1]
    out = np.empty(n)
    out[order] = sorted_values
    return out


def knn_loo_single(order: np.ndarray, labels: np.ndarray, val_label: int,
                   config: KnnConfig) -> np.ndarray:
    """Exact leave-one-out values for one validation point.

    Only the K nearest points have nonzero value: removing one promotes the
    (K+1)-th neighbor, so the value is the match difference over K.  When
    the training set has at most K points nothing is displaced and the
    promoted-neighbor term is 0.
    """
    n = len(order)
    k = config.k
    m = (labels[order] == val_label).astype(np.float64)
    out_sorted = np.zeros(n)
    head = min(k, n)
    displaced = m[k] if n > k else 0.0
    out_sorted[:head] = (m[:head] - displaced) / k
    out = np.empty(n)
    out[order] = out_sorted
    return out


def _aggregate(single_fn, ordering: NeighborOrdering, labels: np.ndarray,
               val_labels: np.ndarray, config: KnnConfig, aggregation: str,
               measure: str, threads: int = 1) -> ValueVector:
    n = ordering.n_train
    n_val = ordering.n_val
    rows = [None] * n_val

    def fill(m: int) -> None:
        rows[m] = single_fn(ordering.orders[m], labels, int(val_labels[m]), config)

    if threads <= 1 or n_val == 1:
        for m in range(n_val):
            fill(m)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(n_val)))

    # sequential combine in validation-index order, independent of threads
    if aggregation == "max":
        acc = rows[0].copy()
        for m in range(1, n_val):
            np.maximum(acc, rows[m], out=acc)
        values = acc
        per_val = None
    else:
        acc = rows[0].copy()
        for m in range(1, n_val):
            acc += rows[m]
        values = acc / n_val
        per_val = np.stack(rows, axis=1) if aggregation == "per-val" else None

    return ValueVector(
        values=values,
        aggregation=aggregation,
        measure=measure,
        k=config.k,
        metric=config.metric.value,
        per_validation=per_val,
    )


def knn_shapley(train: LabeledDataset, val: LabeledDataset,
                config: KnnConfig = None, aggregation: str = "mean",
                threads: int = 1,
                ordering: NeighborOrdering = None) -> ValueVector:
    """Shapley values of all training points under the KNN utility.

    Computes one value vector per validation point and aggregates rows in
    fixed validation-index order (``mean``, ``max``, or ``per-val`` which
    keeps the per-validation matrix alongside the mean).
    """
    config = config or KnnConfig()
    if aggregation not in AGGREGATIONS:
        raise DataError(f"unknown aggregation {aggregation!r}")
    if ordering is None:
        ordering = compute_ordering(train, val, config.metric, threads=threads)
    return _aggregate(knn_shapley_single, ordering, train.labels, val.labels,
                      config, aggregation, "knn-shapley", threads)


def knn_loo(train: LabeledDataset, val: LabeledDataset,
            config: KnnConfig = None, aggregation: str = "mean",
            threads: int = 1,
            ordering: NeighborOrdering = None) -> ValueVector:
    """Leave-one-out values of all training points under the KNN utility."""
    config = config or KnnConfig()
    if aggregation not in AGGREGATIONS:
        raise DataError(f"unknown aggregation {aggregation!r}")
    if ordering is None:
        ordering = compute_ordering(train, val, config.metric, threads=threads)
    return _aggregate(knn_loo_single, ordering, train.labels, val.labels,
                      config, aggregation, "knn-loo", threads)


def knn_predict(train: LabeledDataset, val: LabeledDataset, k: int,
                metric: DistanceMetric = DistanceMetric.SQEUCLIDEAN,
                ordering: NeighborOrdering = None) -> np.ndarray:
    """Majority-vote KNN predictions; label-count ties go to the smallest id."""
    if ordering is None:
        ordering = compute_ordering(train, val, metric)
    n_classes = train.n_classes
    preds = np.empty(val.n, dtype=np.int64)
    head = min(k, train.n)
    for m in range(val.n):
        top = train.labels[ordering.orders[m][:head]]
        counts = np.bincount(top, minlength=n_classes)
        preds[m] = int(np.argmax(counts))  # argmax takes the smallest id on ties
    return preds


def calibrate_k(train: LabeledDataset, val: LabeledDataset, k_grid,
                metric: DistanceMetric = DistanceMetric.SQEUCLIDEAN):
    """Pick the K whose majority-vote classifier is most accurate on ``val``.

    Returns ``(best_k, table)`` where ``table`` is a list of ``(k, accuracy)``
    in grid order.  Ties on accuracy go to the smallest K.
    """
    ks = sorted(set(int(k) for k in k_grid))
    if not ks:
        raise DataError("k grid is empty")
    if any(k < 1 for k in ks):
        raise DataError("k grid entries must be >= 1")
    ordering = compute_ordering(train, val, metric)
    table = []
    best_k, best_acc = None, -1.0
    for k in ks:
        preds = knn_predict(train, val, k, metric, ordering=ordering)
        acc = float(np.mean(preds == val.labels))
        table.append((k, acc))
        if acc > best_acc:
            best_k, best_acc = k, acc
    return best_k, table
