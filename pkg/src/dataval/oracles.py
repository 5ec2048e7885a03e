"""Model-agnostic value oracles: exact enumeration and Monte Carlo sampling.

These operate on an abstract utility that maps any subset of the training
indices to a score.  Subsets are encoded as Python int bitmasks (bit ``i``
set means training point ``i`` is in the subset), which keeps memoization
cheap and matches the on-disk tabulated-oracle format of one
``<hex bitmask> <utility>`` pair per line.

The permutation sampler is pinned down so runs reproduce across platforms
and across independent implementations:

* stream: SplitMix64 seeded with the user's 64-bit seed, i.e. repeatedly
  ``state += 0x9E3779B97F4A7C15`` and mix ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
  z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31``;
* shuffles: Fisher-Yates from the top, ``j = next() % (i + 1)`` for
  ``i = n-1 .. 1`` (the modulo bias is below 2**-50 for desk-scale n);
* permutations are drawn one after another from the single stream and their
  marginal contributions accumulated in draw order, so any parallel
  evaluation must preserve that accumulation order (this implementation is
  sequential).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from .dataset import DataError, LabeledDataset, compute_ordering
from .knn_values import KnnConfig

EXACT_SHAPLEY_CAP = 20


class UtilityOracle:
    """Deterministic utility over subsets of ``n_players`` training points.

    Subclasses implement :meth:`u` on a bitmask.  ``__call__`` accepts either
    a bitmask or an iterable of indices.
    """

    n_players: int

    def u(self, mask: int) -> float:
        raise NotImplementedError

    def __call__(self, subset) -> float:
        if isinstance(subset, (int, np.integer)):
            return self.u(int(subset))
        return self.u(mask_from_indices(subset))

    def full_mask(self) -> int:
        return (1 << self.n_players) - 1

    def iter_prefix_utilities(self, perm: Iterable[int]) -> Iterator[float]:
        """Utilities of the growing prefix of ``perm``, one per added point."""
        mask = 0
        for p in perm:
            mask |= 1 << int(p)
            yield self.u(mask)


def mask_from_indices(indices) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << int(i)
    return mask


def indices_from_mask(mask: int) -> list:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


class TabulatedOracle(UtilityOracle):
    """Utility read from an explicit subset table (testing / tiny games).

    The text format is one line per subset: the subset bitmask in lowercase
    hex (no ``0x`` prefix required) and the utility as a decimal, separated
    by whitespace.  All ``2**n`` subsets must be present.
    """

    def __init__(self, table, n_players: int):
        if n_players < 1:
            raise DataError("tabulated oracle needs at least one player")
        size = 1 << n_players
        values = np.asarray(table, dtype=np.float64)
        if values.shape != (size,):
            raise DataError(f"tabulated oracle needs {size} entries, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("tabulated oracle contains non-finite utilities")
        self.n_players = n_players
        self.table = values

    def u(self, mask: int) -> float:
        return float(self.table[mask])

    @classmethod
    def from_file(cls, path, n_players: int) -> "TabulatedOracle":
        size = 1 << n_players
        table = np.full(size, np.nan)
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise DataError(f"{path}: line {lineno}: expected '<hex> <value>'")
                try:
                    mask = int(parts[0], 16)
                    value = float(parts[1])
                except ValueError:
                    raise DataError(f"{path}: line {lineno}: cannot parse {line!r}") from None
                if not 0 <= mask < size:
                    raise DataError(f"{path}: line {lineno}: mask {parts[0]} out of range")
                table[mask] = value
        if np.any(np.isnan(table)):
            missing = int(np.flatnonzero(np.isnan(table))[0])
            raise DataError(f"{path}: missing utility for subset {missing:x}")
        return cls(table, n_players)

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for mask, value in enumerate(self.table):
                fh.write(f"{mask:x} {float(value)!r}\n")


class KnnUtilityOracle(UtilityOracle):
    """KNN utility averaged over validation points, as a subset oracle.

    For each validation point, the utility of a subset is the fraction of
    its K nearest members carrying the validation label (over K); the empty
    subset scores 0.  Averaging over validation points runs in fixed
    validation-index order.
    """

    def __init__(self, train: LabeledDataset, val: LabeledDataset,
                 config: KnnConfig = None):
        config = config or KnnConfig()
        ordering = compute_ordering(train, val, config.metric)
        self.n_players = train.n
        self.k = config.k
        self.orders = ordering.orders
        # matches[m][i]: does train point i carry val label m
        self.matches = train.labels[None, :] == val.labels[:, None]

    def u(self, mask: int) -> float:
        if mask == 0:
            return 0.0
        k = self.k
        total = 0.0
        for m in range(self.orders.shape[0]):
            order = self.orders[m]
            match = self.matches[m]
            picked = 0
            hits = 0
            for idx in order:
                if (mask >> int(idx)) & 1:
                    picked += 1
                    if match[idx]:
                        hits += 1
                    if picked == k:
                        break
            total += hits / k
        return total / self.orders.shape[0]

    def iter_prefix_utilities(self, perm) -> Iterator[float]:
        # Incremental top-K maintenance: O(K) per added point per validation
        # point instead of a full O(N) rescan.
        from bisect import insort

        k = self.k
        n_val = self.orders.shape[0]
        ranks = [np.empty(self.n_players, dtype=np.int64) for _ in range(n_val)]
        for m in range(n_val):
            ranks[m][self.orders[m]] = np.arange(self.n_players)
        match_at_rank = [self.matches[m][self.orders[m]] for m in range(n_val)]
        chosen = [[] for _ in range(n_val)]
        for p in perm:
            total = 0.0
            for m in range(n_val):
                insort(chosen[m], int(ranks[m][int(p)]))
                head = chosen[m][:k]
                total += sum(1 for r in head if match_at_rank[m][r]) / k
            yield total / n_val


class SplitMix64:
    """The SplitMix64 stream; see the module docstring for the exact mixing."""

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = int(seed) & self._MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates using ``next_u64() % (i + 1)``."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass
class McConfig:
    """Budget and truncation knobs for the permutation sampler."""

    permutations: int = 1000
    truncation_tolerance: float = 0.0
    seed: int = 0
    early_stop_window: Optional[int] = None
    early_stop_threshold: Optional[float] = None

    def __post_init__(self):
        if self.permutations < 1:
            raise DataError(f"permutations must be >= 1, got {self.permutations}")
        if self.truncation_tolerance < 0:
            raise DataError("truncation tolerance must be >= 0")
        if self.early_stop_threshold is not None and self.early_stop_window is None:
            self.early_stop_window = 100


@dataclass
class McDiagnostics:
    permutations_used: int
    mean_truncation_position: float
    full_utility: float
    empty_utility: float


def exact_loo(oracle: UtilityOracle, n: int) -> np.ndarray:
    """Leave-one-out values by direct evaluation: exactly n+1 oracle calls.

    An oracle failure is re-raised naming the subset that triggered it.
    """
    full = (1 << n) - 1

    def query(mask: int) -> float:
        try:
            return oracle.u(mask)
        except DataError:
            raise
        except Exception as exc:
            raise DataError(f"utility oracle failed on subset {mask:#x}: {exc}") from exc

    u_full = query(full)
    out = np.empty(n)
    for i in range(n):
        out[i] = u_full - query(full & ~(1 << i))
    return out


def _shapley_weights(n: int) -> np.ndarray:
    # weight of a marginal contribution to a subset of size s
    return np.array([1.0 / (n * math.comb(n - 1, s)) for s in range(n)])


def exact_shapley(oracle: UtilityOracle, n: int, cap: int = EXACT_SHAPLEY_CAP,
                  memoize: bool = True) -> np.ndarray:
    """Exact Shapley values by full subset enumeration.

    Walks all ``2**n`` subsets, weighting each marginal contribution by the
    inverse count of same-size subsets.  With ``memoize`` every subset
    utility is evaluated once; disabling memoization re-queries the oracle
    but enumerates in the same order, so results agree bit for bit.
    Refuses ``n`` above ``cap`` (default 20) since the table grows as 2**n.
    """
    if n < 1:
        raise DataError("exact_shapley needs n >= 1")
    if n > cap:
        raise DataError(
            f"exact_shapley refuses n={n}: enumeration is 2^n utility calls "
            f"and the cap is {cap}; use mc_shapley for larger n"
        )
    if memoize:
        table = np.empty(1 << n)
        for mask in range(1 << n):
            table[mask] = oracle.u(mask)
        get = table.__getitem__
    else:
        get = oracle.u
    weights = _shapley_weights(n)
    out = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        acc = 0.0
        for mask in range(1 << n):
            if mask & bit:
                continue
            acc += weights[(mask).bit_count()] * (get(mask | bit) - get(mask))
        out[i] = acc
    return out


def mc_shapley(oracle: UtilityOracle, n: int, config: McConfig):
    """Permutation-sampling Shapley estimate with prefix truncation.

    Each sampled permutation is scanned front to back, crediting every point
    with its marginal contribution to the prefix before it.  Once the prefix
    utility is within ``truncation_tolerance`` of the full-set utility the
    remaining points are credited zero and the scan stops (the default
    tolerance 0 never truncates).  With ``truncation_tolerance=inf`` only
    the first point of each permutation is ever credited, so the estimate
    degenerates to the expected single-point gain; this is documented
    behavior, not an error.

    Returns ``(estimates, diagnostics)``; deterministic given the seed.
    """
    if n < 1:
        raise DataError("mc_shapley needs n >= 1")
    rng = SplitMix64(config.seed)
    u_empty = oracle.u(0)
    u_full = oracle.u((1 << n) - 1)
    tol = config.truncation_tolerance

    sums = np.zeros(n)
    window = []
    trunc_positions = 0
    t_done = 0
    for t in range(config.permutations):
        perm = list(range(n))  # each draw shuffles a fresh identity array
        rng.shuffle(perm)
        u_prev = u_empty
        position = n
        for idx, u_cur in enumerate(oracle.iter_prefix_utilities(perm)):
            sums[perm[idx]] += u_cur - u_prev
            u_prev = u_cur
            if abs(u_full - u_cur) < tol:
                position = idx + 1
                break
        trunc_positions += position
        t_done = t + 1
        if config.early_stop_window and config.early_stop_threshold is not None:
            est = sums / t_done
            window.append(est)
            if len(window) > config.early_stop_window:
                window.pop(0)
                drift = max(
                    float(np.max(np.abs(est - past))) for past in window[:-1]
                )
                if drift < config.early_stop_threshold:
                    break

    estimates = sums / t_done
    diag = McDiagnostics(
        permutations_used=t_done,
        mean_truncation_position=trunc_positions / t_done,
        full_utility=u_full,
        empty_utility=u_empty,
    )
    return estimates, diag


def rank_correlation(a, b):
    """Spearman rank correlation between two value vectors.

    Ranks with ties averaged, then the Pearson correlation of the ranks;
    the p-value uses the t approximation with n-2 degrees of freedom.
    Constant vectors have no defined rank correlation and are rejected.
    """
    from scipy import stats  # deferred: keeps CLI startup light

    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"rank_correlation needs equal-length vectors, got {a.shape} vs {b.shape}")
    n = a.shape[0]
    if n < 3:
        raise DataError("rank_correlation needs length >= 3")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise DataError("rank correlation undefined for a constant vector")
    ra = stats.rankdata(a, method="average")
    rb = stats.rankdata(b, method="average")
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    rho = float(np.dot(ra, rb) / math.sqrt(np.dot(ra, ra) * np.dot(rb, rb)))
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stats.t.sf(abs(t), n - 2))
    return rho, p
