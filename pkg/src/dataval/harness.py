"""Application pipelines over computed values, at desk scale.

Everything here consumes a value vector plus datasets: ranking corrupted
points for inspection, dropping low- or high-value points before
re-evaluation, selecting positive-value points, and ranking acquisition
candidates by predicted value.  Synthetic corruption generators (label
flips, feature noise, out-of-distribution watermark clusters) make the
pipelines reproducible without external data.

All ranking ties break by ascending index, so every curve is deterministic
given its inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .dataset import DataError, DistanceMetric, LabeledDataset, point_distances
from .knn_values import calibrate_k, knn_predict

RECALL_LANDMARKS = (0.05, 0.10, 0.20, 0.50)


@dataclass
class DetectionCurve:
    """Prefix recall of flagged points along the ascending-value ranking.

    ``fraction_checked[j]`` = j/N and ``fraction_detected[j]`` = share of
    flagged points among the j lowest-value points; both coordinates are
    nondecreasing and the curve ends at (1, 1).  ``recall_at`` keys the
    standard checked-fraction landmarks.
    """

    fraction_checked: np.ndarray
    fraction_detected: np.ndarray
    recall_at: dict


def validate_flags(flags, n: int) -> np.ndarray:
    flags = np.asarray(flags, dtype=bool)
    if flags.shape != (n,):
        raise DataError(f"flag vector shape {flags.shape} does not match n={n}")
    return flags


def detection_curve(values, flags) -> DetectionCurve:
    """Recall curve from inspecting points in ascending value order.

    Corrupted points are expected to sit at the bottom of the ranking, so
    the curve of a useful value measure rises steeply ahead of the
    uninformative diagonal.  Requires at least one flagged and one clean
    point.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    flags = validate_flags(flags, n)
    total = int(flags.sum())
    if total == 0:
        raise DataError("no flagged points: detection curve undefined")
    if total == n:
        raise DataError("all points flagged: detection curve undefined")

    order = np.argsort(values, kind="stable")  # ties by ascending index
    found = np.concatenate(([0], np.cumsum(flags[order])))
    checked = np.arange(n + 1) / n
    detected = found / total
    recall_at = {
        f: float(detected[int(math_floor(f * n))]) for f in RECALL_LANDMARKS
    }
    return DetectionCurve(
        fraction_checked=checked,
        fraction_detected=detected,
        recall_at=recall_at,
    )


def math_floor(x: float) -> int:
    # floor with a nudge so 0.2 * 1000 -> 200 despite binary rounding
    return int(np.floor(x + 1e-9))


def summarization_curve(train: LabeledDataset, val: LabeledDataset,
                        heldout: LabeledDataset, values,
                        drop_fractions: Sequence[float],
                        end: str = "low",
                        k: int = None,
                        metric: DistanceMetric = DistanceMetric.SQEUCLIDEAN,
                        k_grid=range(1, 11)) -> List[Tuple[float, float]]:
    """Held-out KNN accuracy after dropping a slice of the value ranking.

    ``end="low"`` drops the lowest-value points first (summarization);
    ``end="high"`` drops the highest first (value sanity check).  K is
    calibrated on (train, val) unless given.  Fraction 0 reproduces the
    direct evaluation bit for bit.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (train.n,):
        raise DataError("value vector does not match training size")
    if end not in ("low", "high"):
        raise DataError(f"end must be 'low' or 'high', got {end!r}")
    fractions = list(drop_fractions)
    if any(not 0 <= f < 1 for f in fractions):
        raise DataError("drop fractions must lie in [0, 1)")
    if k is None:
        k, _ = calibrate_k(train, val, k_grid, metric)

    order = np.argsort(values, kind="stable")
    if end == "high":
        order = order[::-1]

    out = []
    for f in fractions:
        n_drop = math_floor(f * train.n)
        keep = np.sort(order[n_drop:])
        if keep.size == 0:
            raise DataError(f"drop fraction {f} removes every training point")
        kept = train.subset(keep)
        preds = knn_predict(kept, heldout, k, metric)
        acc = float(np.mean(preds == heldout.labels))
        out.append((float(f), acc))
    return out


def select_positive(values) -> np.ndarray:
    """Indices of strictly positive-value points (may be empty, with a warning)."""
    values = np.asarray(values, dtype=np.float64)
    picked = np.flatnonzero(values > 0)
    if picked.size == 0:
        warnings.warn("no training point has positive value", stacklevel=2)
    return picked


def acquisition_rank(seed_train: LabeledDataset, seed_values,
                     candidates: LabeledDataset, r: int = 5,
                     metric: DistanceMetric = DistanceMetric.SQEUCLIDEAN):
    """Rank unlabeled candidates by predicted value, best first.

    Each candidate's value is predicted as the mean value of its r nearest
    seed points (a deliberately simple pluggable regressor).  Returns
    ``(ranked_candidate_indices, predicted_values)`` with prediction ties
    broken by ascending candidate index.
    """
    seed_values = np.asarray(seed_values, dtype=np.float64)
    if seed_values.shape != (seed_train.n,):
        raise DataError("seed value vector does not match seed training size")
    if r < 1 or r > seed_train.n:
        raise DataError(f"r={r} must lie in [1, seed size {seed_train.n}]")
    if candidates.d != seed_train.d:
        raise DataError("candidate feature width does not match seed data")

    predicted = np.empty(candidates.n)
    for c in range(candidates.n):
        dist = point_distances(seed_train.features, candidates.features[c], metric)
        # averaging in ascending seed-index order keeps the prediction
        # independent of which neighbor happened to sort first
        nearest = np.sort(np.argsort(dist, kind="stable")[:r])
        predicted[c] = float(np.mean(seed_values[nearest]))
    # stable sort on negated values: descending value, ties by index
    ranked = np.argsort(-predicted, kind="stable")
    return ranked, predicted


# ---------------------------------------------------------------------------
# Synthetic data and corruption generators


def gaussian_blobs(n: int, d: int = 2, n_classes: int = 2, spread: float = 1.0,
                   center_distance: float = 4.0, seed: int = 0) -> LabeledDataset:
    """Equal-size Gaussian class clusters on a simplex-ish center layout."""
    rng = np.random.default_rng(seed)
    centers = np.zeros((n_classes, d))
    for c in range(n_classes):
        centers[c, c % d] = c * center_distance
    labels = np.arange(n) % n_classes
    feats = centers[labels] + rng.normal(scale=spread, size=(n, d))
    return LabeledDataset(feats, labels.astype(np.int64))


def flip_labels(ds: LabeledDataset, rate: float, seed: int = 0):
    """Flip a fraction of labels to a different class; returns (dataset, flags)."""
    if not 0 < rate < 1:
        raise DataError("flip rate must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n_flip = max(1, math_floor(rate * ds.n))
    picks = rng.choice(ds.n, size=n_flip, replace=False)
    labels = ds.labels.copy()
    n_classes = ds.n_classes
    if n_classes < 2:
        raise DataError("need at least two classes to flip labels")
    for i in picks:
        shift = int(rng.integers(1, n_classes))
        labels[i] = (labels[i] + shift) % n_classes
    flags = np.zeros(ds.n, dtype=bool)
    flags[picks] = True
    return LabeledDataset(ds.features.copy(), labels), flags


def add_feature_noise(ds: LabeledDataset, rate: float, scale: float,
                      seed: int = 0):
    """Add Gaussian noise to a fraction of rows; returns (dataset, flags)."""
    if not 0 < rate < 1:
        raise DataError("noise rate must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n_noisy = max(1, math_floor(rate * ds.n))
    picks = rng.choice(ds.n, size=n_noisy, replace=False)
    feats = ds.features.copy()
    feats[picks] += rng.normal(scale=scale, size=(n_noisy, ds.d))
    flags = np.zeros(ds.n, dtype=bool)
    flags[picks] = True
    return LabeledDataset(feats, ds.labels.copy()), flags


def inject_watermark(ds: LabeledDataset, rate: float, offset: float = 10.0,
                     forced_label: int = 0, seed: int = 0):
    """Replace a fraction of rows with an out-of-distribution cluster.

    The replaced rows move to a far-away blob and all take ``forced_label``,
    mimicking ownership watermarks; returns (dataset, flags).
    """
    if not 0 < rate < 1:
        raise DataError("watermark rate must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n_marked = max(1, math_floor(rate * ds.n))
    picks = rng.choice(ds.n, size=n_marked, replace=False)
    feats = ds.features.copy()
    labels = ds.labels.copy()
    center = feats.mean(axis=0) + offset
    feats[picks] = center + rng.normal(scale=0.5, size=(n_marked, ds.d))
    labels[picks] = forced_label
    flags = np.zeros(ds.n, dtype=bool)
    flags[picks] = True
    return LabeledDataset(feats, labels), flags


# FlagSet file I/O: single-column CSV of 0/1 with optional 'flag' header


def load_flags(path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            cell = line.strip()
            if not cell:
                continue
            if lineno == 1 and cell.lower() == "flag":
                continue
            if cell not in ("0", "1"):
                raise DataError(f"{path}: line {lineno}: flag must be 0 or 1, got {cell!r}")
            rows.append(cell == "1")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=bool)


def save_flags(flags, path) -> None:
    flags = np.asarray(flags, dtype=bool)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("flag\n")
        for f in flags:
            fh.write(f"{int(f)}\n")
