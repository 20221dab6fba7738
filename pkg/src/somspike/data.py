"""Feature-store loading, stratified splitting and mini-batch iteration.

A feature store on disk is three files in one directory:

* ``manifest.json`` -- class_names, class_counts, n, d, format_version and a
  crc32 per binary file,
* ``features.f32`` -- n*d row-major little-endian float32 values,
* ``labels.u16``   -- n little-endian uint16 class indices.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
DEFAULT_RATIOS = (0.70, 0.15, 0.15)
SUBSETS = ("train", "val", "test")


class StoreError(ValueError):
    """Raised for missing, inconsistent or corrupt feature stores."""


@dataclass
class DatasetManifest:
    class_names: list[str]
    class_counts: list[int]
    n: int
    d: int
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if len(self.class_names) != len(self.class_counts):
            raise StoreError("class_names and class_counts length mismatch")
        if len(self.class_names) < 2:
            raise StoreError("need at least 2 classes")
        if len(set(self.class_names)) != len(self.class_names):
            raise StoreError("class names must be unique")
        if any(c < 0 for c in self.class_counts):
            raise StoreError("negative class count")
        if sum(self.class_counts) != self.n:
            raise StoreError("class_counts do not sum to n")
        if self.d < 1:
            raise StoreError("feature dimension must be >= 1")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass
class FeatureStore:
    features: np.ndarray  # (n, d) float64, widened from the f32 file on load
    labels: np.ndarray  # (n,) int64
    manifest: DatasetManifest

    def __post_init__(self):
        if self.features.shape != (self.manifest.n, self.manifest.d):
            raise StoreError("dimension mismatch between features and manifest")
        if self.labels.shape != (self.manifest.n,):
            raise StoreError("dimension mismatch between labels and manifest")
        if not np.all(np.isfinite(self.features)):
            raise StoreError("non-finite feature")
        c = self.manifest.num_classes
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= c):
            raise StoreError("label out of range")
        hist = np.bincount(self.labels, minlength=c)
        if list(hist) != list(self.manifest.class_counts):
            raise StoreError("label histogram does not match manifest class_counts")


def save_feature_store(store: FeatureStore, path: str | Path) -> None:
    """Write the three-file store layout (used by fixtures and tooling)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    feat = np.ascontiguousarray(store.features, dtype="<f4").tobytes()
    lab = np.ascontiguousarray(store.labels, dtype="<u2").tobytes()
    (path / "features.f32").write_bytes(feat)
    (path / "labels.u16").write_bytes(lab)
    doc = {
        "class_names": store.manifest.class_names,
        "class_counts": [int(c) for c in store.manifest.class_counts],
        "n": store.manifest.n,
        "d": store.manifest.d,
        "format_version": store.manifest.format_version,
        "crc32": {
            "features.f32": zlib.crc32(feat),
            "labels.u16": zlib.crc32(lab),
        },
    }
    (path / "manifest.json").write_text(json.dumps(doc, indent=2))


def load_feature_store(path: str | Path) -> FeatureStore:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise StoreError(f"missing file: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise StoreError(f"malformed manifest: {exc}") from exc

    required = {"class_names", "class_counts", "n", "d", "format_version", "crc32"}
    missing = required - doc.keys()
    if missing:
        raise StoreError(f"manifest missing keys: {sorted(missing)}")
    if doc["format_version"] != FORMAT_VERSION:
        raise StoreError(f"unsupported format_version {doc['format_version']}")

    manifest = DatasetManifest(
        class_names=list(doc["class_names"]),
        class_counts=[int(c) for c in doc["class_counts"]],
        n=int(doc["n"]),
        d=int(doc["d"]),
        format_version=int(doc["format_version"]),
    )

    blobs = {}
    for name in ("features.f32", "labels.u16"):
        fpath = path / name
        if not fpath.is_file():
            raise StoreError(f"missing file: {fpath}")
        raw = fpath.read_bytes()
        if zlib.crc32(raw) != doc["crc32"].get(name):
            raise StoreError(f"checksum mismatch for {name}")
        blobs[name] = raw

    feat = np.frombuffer(blobs["features.f32"], dtype="<f4")
    if feat.size != manifest.n * manifest.d:
        raise StoreError("dimension mismatch: feature file size vs manifest")
    lab = np.frombuffer(blobs["labels.u16"], dtype="<u2")
    if lab.size != manifest.n:
        raise StoreError("dimension mismatch: label file size vs manifest")

    return FeatureStore(
        features=feat.astype(np.float64).reshape(manifest.n, manifest.d),
        labels=lab.astype(np.int64),
        manifest=manifest,
    )


@dataclass
class SplitAssignment:
    subset_tags: np.ndarray  # (n,) strings from SUBSETS
    seed: int
    ratios: tuple[float, float, float] = DEFAULT_RATIOS

    def indices(self, subset: str) -> np.ndarray:
        if subset not in SUBSETS:
            raise ValueError(f"unknown subset {subset!r}")
        return np.flatnonzero(self.subset_tags == subset)

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "tags": self.subset_tags.tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitAssignment":
        doc = json.loads(text)
        return cls(
            subset_tags=np.array(doc["tags"], dtype=object),
            seed=int(doc["seed"]),
            ratios=tuple(doc["ratios"]),
        )


def _per_class_counts(count: int, ratios) -> tuple[int, int, int]:
    """Two-stage apportionment: train vs holdout, then holdout into val/test.

    Banker's rounding at both stages; this reproduces published subset totals
    on the reference class distribution and keeps every subset within one
    record of its real-valued target.
    """
    r_train, r_val, r_test = ratios
    holdout = round((r_val + r_test) * count)
    n_test = round(holdout * r_test / (r_val + r_test)) if holdout else 0
    n_val = holdout - n_test
    return count - holdout, n_val, n_test


def stratified_split(labels: np.ndarray, ratios=DEFAULT_RATIOS, seed: int = 0) -> SplitAssignment:
    """Per-class split into train/val/test preserving class proportions."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    labels = np.asarray(labels)
    tags = np.empty(labels.shape[0], dtype=object)
    rng = np.random.Generator(np.random.Philox(key=seed))
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 3:
            raise ValueError(f"class {cls} has fewer than 3 records")
        n_train, n_val, _ = _per_class_counts(idx.size, ratios)
        idx = rng.permutation(idx)
        tags[idx[:n_train]] = "train"
        tags[idx[n_train : n_train + n_val]] = "val"
        tags[idx[n_train + n_val :]] = "test"
    return SplitAssignment(subset_tags=tags, seed=seed, ratios=tuple(ratios))


@dataclass
class Batch:
    features: np.ndarray
    labels: np.ndarray
    indices: np.ndarray = field(repr=False, default=None)


def batch_order(num_records: int, shuffle: bool, seed: int, epoch: int) -> np.ndarray:
    """Deterministic record order for one epoch; counter-based so epochs are
    independent of how many batches earlier epochs consumed."""
    if not shuffle:
        return np.arange(num_records)
    rng = np.random.Generator(np.random.Philox(key=[seed, epoch]))
    return rng.permutation(num_records)


def make_batches(
    store: FeatureStore,
    subset_indices: np.ndarray,
    batch_size: int,
    shuffle: bool = False,
    seed: int = 0,
    epoch: int = 0,
) -> list[Batch]:
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    subset_indices = np.asarray(subset_indices)
    if subset_indices.size == 0:
        raise ValueError("empty subset")
    order = subset_indices[batch_order(subset_indices.size, shuffle, seed, epoch)]
    return [
        Batch(
            features=store.features[chunk],
            labels=store.labels[chunk],
            indices=chunk,
        )
        for chunk in np.array_split(order, range(batch_size, order.size, batch_size))
    ]
