"""Using values to pick training data: positive selection and acquisition.

Two small pipelines: keep only the points whose value is positive (useful
when transferring to a new validation domain), and rank unlabeled
candidates by the mean value of their nearest valued neighbors to decide
what to label next.
"""

import numpy as np

from dataval import (
    KnnConfig,
    LabeledDataset,
    acquisition_rank,
    flip_labels,
    gaussian_blobs,
    knn_predict,
    knn_shapley,
    select_positive,
)

seed_train = gaussian_blobs(200, d=2, center_distance=5.0, seed=30)
seed_train, flags = flip_labels(seed_train, rate=0.15, seed=31)
val = gaussian_blobs(100, d=2, center_distance=5.0, seed=32)
heldout = gaussian_blobs(200, d=2, center_distance=5.0, seed=33)

values = knn_shapley(seed_train, val, KnnConfig(k=5)).values
picked = select_positive(values)
flipped_kept = int(flags[picked].sum())
print(f"positive-value selection keeps {picked.size}/{seed_train.n} points; "
      f"{flipped_kept} of {int(flags.sum())} flipped labels survive")

base_preds = knn_predict(seed_train, heldout, 5)
kept = seed_train.subset(picked)
sel_preds = knn_predict(kept, heldout, 5)
print(f"held-out accuracy: all points {np.mean(base_preds == heldout.labels):.3f}, "
      f"positive-value subset {np.mean(sel_preds == heldout.labels):.3f}")

# acquisition: candidates near the clusters should outrank displaced ones
rng = np.random.default_rng(34)
clean = gaussian_blobs(15, d=2, center_distance=5.0, seed=35)
noisy_features = clean.features + rng.normal(scale=8.0, size=clean.features.shape)
candidates = LabeledDataset(np.vstack([clean.features, noisy_features]),
                            np.concatenate([clean.labels, clean.labels]))
ranked, predicted = acquisition_rank(seed_train, values, candidates, r=3)
top = [int(i) for i in ranked[:15]]
print(f"\nacquisition: {sum(1 for i in top if i < 15)}/15 of the top-ranked "
      f"candidates are the in-distribution ones")
print("first five picks (index, predicted value):",
      [(int(i), round(float(predicted[i]), 4)) for i in ranked[:5]])
