import numpy as np
import pytest

from dataval import KnnConfig, LabeledDataset, TabulatedOracle


def random_instance(rng, n, k, n_classes=2, d=2, n_val=1):
    """Random Gaussian instance: (train, val, config)."""
    train = LabeledDataset(
        rng.normal(size=(n, d)),
        rng.integers(0, n_classes, size=n).astype(np.int64),
    )
    val = LabeledDataset(
        rng.normal(size=(n_val, d)),
        rng.integers(0, n_classes, size=n_val).astype(np.int64),
    )
    return train, val, KnnConfig(k=k)


def random_tabulated(rng, n, *, zero_empty=False):
    """Random utility table over all 2**n subsets."""
    table = rng.uniform(-1.0, 1.0, size=1 << n)
    if zero_empty:
        table[0] = 0.0
    return TabulatedOracle(table, n)


def symmetric_tabulated(rng, n, i, j):
    """Random table in which players i and j are interchangeable."""
    bits = (1 << i) | (1 << j)
    groups = {}
    table = np.empty(1 << n)
    for mask in range(1 << n):
        key = (mask & ~bits, bin(mask & bits).count("1"))
        if key not in groups:
            groups[key] = rng.uniform(-1.0, 1.0)
        table[mask] = groups[key]
    return TabulatedOracle(table, n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
