import numpy as np
import pytest

from somspike import data

TABLE1_COUNTS = [945, 985, 891, 5325, 769, 1050, 865, 1977, 697, 775]
TABLE1_NAMES = [
    "battery", "biological", "cardboard", "clothes", "metal",
    "paper", "plastic", "shoes", "trash", "white-glass",
]

# Published test-set confusion matrix (rows = true class).
TABLE3_CONFUSION = np.array([
    [137, 0, 0, 0, 1, 0, 0, 0, 0, 0],
    [1, 145, 0, 0, 0, 0, 0, 0, 0, 0],
    [2, 0, 132, 0, 1, 1, 1, 0, 0, 0],
    [0, 1, 1, 807, 0, 3, 2, 9, 1, 0],
    [2, 0, 0, 0, 106, 0, 3, 0, 0, 1],
    [1, 0, 1, 0, 2, 159, 3, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 112, 0, 0, 4],
    [0, 0, 0, 0, 0, 0, 0, 289, 0, 0],
    [0, 2, 0, 0, 0, 0, 2, 1, 114, 3],
    [0, 0, 0, 0, 1, 0, 6, 0, 0, 86],
])

# Six-run accuracy series for the baseline and the hybrid model.
BASELINE_RUNS = [92.93, 92.75, 93.10, 92.85, 92.40, 93.00]
HYBRID_RUNS = [97.39, 97.45, 97.60, 97.25, 97.80, 97.55]


def make_store(features, labels, class_names=None):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels)
    if class_names is None:
        class_names = [f"class{i}" for i in range(counts.size)]
    manifest = data.DatasetManifest(
        class_names=list(class_names),
        class_counts=[int(c) for c in counts],
        n=features.shape[0],
        d=features.shape[1],
    )
    return data.FeatureStore(features=features, labels=labels, manifest=manifest)


def make_blob_store(seed=42, dim=16, per_class=200, num_classes=4, center_scale=3.0, noise=0.5):
    """Well-separated Gaussian blobs; a linear model already separates them."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, center_scale, size=(num_classes, dim))
    features = np.concatenate([
        centers[c] + rng.normal(0.0, noise, size=(per_class, dim))
        for c in range(num_classes)
    ]).astype(np.float32)
    labels = np.repeat(np.arange(num_classes), per_class)
    perm = rng.permutation(labels.size)
    return make_store(features[perm].astype(np.float64), labels[perm])


def make_table1_labels():
    return np.repeat(np.arange(10), TABLE1_COUNTS)


@pytest.fixture
def blob_store():
    return make_blob_store()


@pytest.fixture
def tiny_store():
    # n=4, d=2, two classes with histogram {2, 2}
    return make_store(
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        [0, 1, 0, 1],
    )
