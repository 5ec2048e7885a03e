"""Datasets, distance metrics, and neighbor orderings.

A dataset is a feature matrix of 64-bit reals plus one integer class label
per row.  Two on-disk formats are supported:

* CSV: a header row with exactly one column named ``label`` (integer); every
  other column is a numeric feature, kept in file order.  UTF-8, ``.`` as
  the decimal point.
* Binary: magic bytes ``DVAL1``, then N and d as unsigned 64-bit
  little-endian integers, then the N x d feature matrix as row-major IEEE-754
  little-endian doubles, then N unsigned 32-bit little-endian labels.

Both formats round-trip exactly: saving and re-loading reproduces features
bit for bit and labels identically.
"""

from __future__ import annotations

import csv
import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_MAGIC = b"DVAL1"


class DataError(Exception):
    """A dataset or input file violates its format or invariants."""


class DistanceMetric(enum.Enum):
    """Feature-space distance used to order training points.

    ``SQEUCLIDEAN`` is the squared Euclidean distance (same ordering as
    Euclidean, cheaper).  ``COSINE`` is ``1 - cos(angle)`` and is only
    defined for nonzero vectors.
    """

    SQEUCLIDEAN = "sqeuclidean"
    COSINE = "cosine"

    @classmethod
    def parse(cls, name: str) -> "DistanceMetric":
        aliases = {
            "sqeuclidean": cls.SQEUCLIDEAN,
            "squared-euclidean": cls.SQEUCLIDEAN,
            "cosine": cls.COSINE,
            "cosine-distance": cls.COSINE,
        }
        try:
            return aliases[name.lower()]
        except KeyError:
            raise DataError(f"unknown distance metric {name!r}") from None


@dataclass
class LabeledDataset:
    """Feature matrix plus integer class labels.

    Invariants (enforced on construction): at least one row and one feature
    column, all feature entries finite, labels nonnegative integers, one
    label per feature row.
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {feats.shape}")
        if feats.shape[0] < 1 or feats.shape[1] < 1:
            raise DataError(f"dataset must have N >= 1 and d >= 1, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            bad = np.argwhere(~np.isfinite(feats))[0]
            raise DataError(f"non-finite feature at row {bad[0]}, column {bad[1]}")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != feats.shape[0]:
            raise DataError(
                f"label count {labels.shape} does not match feature row count {feats.shape[0]}"
            )
        if not np.issubdtype(labels.dtype, np.integer):
            raise DataError(f"labels must be integers, got dtype {labels.dtype}")
        if labels.min() < 0:
            bad = int(np.argmin(labels))
            raise DataError(f"negative label at row {bad}")
        self.features = feats
        self.labels = labels.astype(np.int64)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def subset(self, indices) -> "LabeledDataset":
        """Dataset restricted to the given row indices, order preserved."""
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx])


@dataclass
class NeighborOrdering:
    """Per-validation-point permutations of training indices by distance.

    ``orders[m]`` is a permutation of ``0..n_train-1`` along which distances
    to validation point ``m`` are nondecreasing; exact distance ties are
    broken by ascending training index, so orderings are deterministic.
    """

    orders: np.ndarray  # (n_val, n_train) int64
    metric: DistanceMetric

    @property
    def n_val(self) -> int:
        return self.orders.shape[0]

    @property
    def n_train(self) -> int:
        return self.orders.shape[1]


def point_distances(train_features: np.ndarray, point: np.ndarray,
                    metric: DistanceMetric, _chunk: int = 8192) -> np.ndarray:
    """Distances from every training row to one query point.

    Rows are processed in fixed-size chunks through one reused scratch
    buffer; each row's reduction depends only on the feature width, so the
    results are bit-identical for any chunk size.
    """
    n, d = train_features.shape
    out = np.empty(n)
    rows = min(_chunk, n)
    scratch = np.empty((rows, d))
    if metric is DistanceMetric.SQEUCLIDEAN:
        for start in range(0, n, _chunk):
            stop = min(start + _chunk, n)
            blk = scratch[: stop - start]
            np.subtract(train_features[start:stop], point, out=blk)
            np.multiply(blk, blk, out=blk)
            np.sum(blk, axis=1, out=out[start:stop])
        return out
    # cosine
    point_norm = math.sqrt(float(np.dot(point, point)))
    if point_norm == 0.0:
        raise DataError("cosine distance undefined for zero query vector")
    dots = np.empty(n)
    for start in range(0, n, _chunk):
        stop = min(start + _chunk, n)
        blk = scratch[: stop - start]
        np.multiply(train_features[start:stop], point, out=blk)
        np.sum(blk, axis=1, out=dots[start:stop])
        np.multiply(train_features[start:stop], train_features[start:stop], out=blk)
        np.sum(blk, axis=1, out=out[start:stop])
    if np.any(out == 0.0):
        bad = int(np.argmin(out))
        raise DataError(f"cosine distance undefined for zero training vector at row {bad}")
    np.sqrt(out, out=out)
    out *= point_norm
    return 1.0 - dots / out


def compute_ordering(train: LabeledDataset, val: LabeledDataset,
                     metric: DistanceMetric = DistanceMetric.SQEUCLIDEAN,
                     threads: int = 1) -> NeighborOrdering:
    """Sort all training indices by distance to each validation point.

    Returns the full sorted permutation per validation point (the value
    recursions need every position, not just the top K).  Ties are broken
    by ascending training index via a stable sort.  With ``threads > 1``
    validation points are processed concurrently; results are identical at
    any thread count because each point's computation is independent.
    """
    if train.d != val.d:
        raise DataError(f"dimension mismatch: train d={train.d}, val d={val.d}")

    orders = np.empty((val.n, train.n), dtype=np.int64)

    def fill(m: int) -> None:
        dist = point_distances(train.features, val.features[m], metric)
        orders[m] = np.argsort(dist, kind="stable")

    if threads <= 1 or val.n == 1:
        for m in range(val.n):
            fill(m)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(val.n)))
    return NeighborOrdering(orders=orders, metric=metric)


# ---------------------------------------------------------------------------
# File I/O


def load_dataset(path, format: str = "auto") -> LabeledDataset:
    """Load a dataset from ``path`` in ``csv``, ``binary``, or ``auto`` format.

    ``auto`` sniffs the binary magic bytes and otherwise parses CSV.  Format
    violations raise :class:`DataError` naming the offending row/column or
    byte position.
    """
    path = Path(path)
    if format == "auto":
        with open(path, "rb") as fh:
            format = "binary" if fh.read(len(_MAGIC)) == _MAGIC else "csv"
    if format == "csv":
        return _load_csv(path)
    if format == "binary":
        return _load_binary(path)
    raise DataError(f"unknown dataset format {format!r}")


def save_dataset(ds: LabeledDataset, path, format: str = "csv") -> None:
    """Write a dataset to disk; the inverse of :func:`load_dataset`."""
    path = Path(path)
    if format == "csv":
        _save_csv(ds, path)
    elif format == "binary":
        _save_binary(ds, path)
    else:
        raise DataError(f"unknown dataset format {format!r}")


def _load_csv(path: Path) -> LabeledDataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: no data rows (empty file)") from None
        header = [h.strip() for h in header]
        if any(not h for h in header):
            raise DataError(f"{path}: malformed header: empty column name")
        if len(set(header)) != len(header):
            raise DataError(f"{path}: malformed header: duplicate column names")
        try:
            label_col = header.index("label")
        except ValueError:
            raise DataError(f"{path}: missing 'label' column") from None
        feature_cols = [i for i in range(len(header)) if i != label_col]
        if not feature_cols:
            raise DataError(f"{path}: no feature columns")

        rows = []
        labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno}: expected {len(header)} cells, got {len(row)}"
                )
            feats = np.empty(len(feature_cols))
            for j, col in enumerate(feature_cols):
                cell = row[col].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {header[col]!r}: "
                        f"non-numeric feature {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        f"{path}: row {lineno}, column {header[col]!r}: "
                        f"non-finite feature {cell!r}"
                    )
                feats[j] = value
            cell = row[label_col].strip()
            try:
                label = int(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {lineno}, column 'label': non-integer label {cell!r}"
                ) from None
            rows.append(feats)
            labels.append(label)

    if not rows:
        raise DataError(f"{path}: no data rows")
    try:
        return LabeledDataset(np.vstack(rows), np.array(labels, dtype=np.int64))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def _save_csv(ds: LabeledDataset, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(ds.d)] + ["label"])
        for i in range(ds.n):
            # repr() round-trips doubles exactly
            writer.writerow([repr(float(v)) for v in ds.features[i]] + [int(ds.labels[i])])


def _load_binary(path: Path) -> LabeledDataset:
    raw = Path(path).read_bytes()
    if len(raw) < len(_MAGIC) + 16:
        raise DataError(f"{path}: truncated file (no header)")
    if raw[: len(_MAGIC)] != _MAGIC:
        raise DataError(f"{path}: bad magic bytes, not a binary dataset")
    n, d = struct.unpack_from("<QQ", raw, len(_MAGIC))
    offset = len(_MAGIC) + 16
    expect = offset + n * d * 8 + n * 4
    if len(raw) != expect:
        raise DataError(f"{path}: expected {expect} bytes for N={n}, d={d}, got {len(raw)}")
    feats = np.frombuffer(raw, dtype="<f8", count=n * d, offset=offset).reshape(n, d)
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=offset + n * d * 8)
    try:
        return LabeledDataset(feats.copy(), labels.astype(np.int64))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def _save_binary(ds: LabeledDataset, path: Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", ds.n, ds.d))
        fh.write(np.ascontiguousarray(ds.features, dtype="<f8").tobytes())
        fh.write(ds.labels.astype("<u4").tobytes())
