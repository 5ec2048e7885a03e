"""dataval: per-training-point data values from KNN surrogates.

Exact Shapley and leave-one-out values under the K-nearest-neighbor utility
in O(N log N) per validation point, brute-force and Monte Carlo oracles for
arbitrary utilities, order-preservingness and value-gap-bound analyses, and
application pipelines (noisy-label detection, summarization, selection,
acquisition).
"""

__version__ = "0.1.0"

from .analysis import (
    OrderPreservingReport,
    PrivacyParams,
    dp_value_gap_bounds,
    order_preserving_test,
    pool_utility_samples,
    privacy_loss,
    stability_value_gap_bounds,
)
from .dataset import (
    DataError,
    DistanceMetric,
    LabeledDataset,
    NeighborOrdering,
    compute_ordering,
    load_dataset,
    point_distances,
    save_dataset,
)
from .harness import (
    DetectionCurve,
    acquisition_rank,
    add_feature_noise,
    detection_curve,
    flip_labels,
    gaussian_blobs,
    inject_watermark,
    load_flags,
    save_flags,
    select_positive,
    summarization_curve,
)
from .knn_values import (
    KnnConfig,
    ValueVector,
    calibrate_k,
    knn_loo,
    knn_loo_single,
    knn_predict,
    knn_shapley,
    knn_shapley_single,
    knn_utility,
)
from .oracles import (
    KnnUtilityOracle,
    McConfig,
    McDiagnostics,
    SplitMix64,
    TabulatedOracle,
    UtilityOracle,
    exact_loo,
    exact_shapley,
    mc_shapley,
    rank_correlation,
)

__all__ = [
    "__version__",
    "DataError",
    "DistanceMetric",
    "LabeledDataset",
    "NeighborOrdering",
    "compute_ordering",
    "load_dataset",
    "save_dataset",
    "point_distances",
    "KnnConfig",
    "ValueVector",
    "knn_utility",
    "knn_shapley",
    "knn_shapley_single",
    "knn_loo",
    "knn_loo_single",
    "knn_predict",
    "calibrate_k",
    "UtilityOracle",
    "KnnUtilityOracle",
    "TabulatedOracle",
    "McConfig",
    "McDiagnostics",
    "SplitMix64",
    "exact_loo",
    "exact_shapley",
    "mc_shapley",
    "rank_correlation",
    "OrderPreservingReport",
    "PrivacyParams",
    "order_preserving_test",
    "pool_utility_samples",
    "privacy_loss",
    "dp_value_gap_bounds",
    "stability_value_gap_bounds",
    "DetectionCurve",
    "detection_curve",
    "summarization_curve",
    "select_positive",
    "acquisition_rank",
    "gaussian_blobs",
    "flip_labels",
    "add_feature_noise",
    "inject_watermark",
    "load_flags",
    "save_flags",
]
