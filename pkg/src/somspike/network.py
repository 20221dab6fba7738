"""Model composition, ablation variants and checkpoint persistence.

Variants:
  full           backbone-features -> SSOL -> spiking head
  no_som_spiking features -> spiking head
  som_linear     features -> SSOL -> affine classifier
  no_som_linear  features -> affine classifier
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from somspike.backbone import ToyBackbone
from somspike.layers import Linear
from somspike.softsom import PrototypeBank, SomConfig, init_prototypes, ssol_backward, ssol_forward
from somspike.spikehead import SpikeHead

VARIANTS = ("full", "no_som_spiking", "som_linear", "no_som_linear")
CHECKPOINT_MAGIC = b"SOMSPIKE"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


class Model:
    def __init__(
        self,
        variant: str,
        input_dim: int,
        num_classes: int,
        som_config: SomConfig | None = None,
        hidden_dim: int = 256,
        time_steps: int = 4,
        bn_momentum: float = 0.1,
        bn_eps: float = 1e-5,
        backbone: ToyBackbone | None = None,
        seed: int = 0,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant
        self.input_dim = input_dim
        self.num_classes = num_classes
        self.backbone = backbone
        rng = np.random.default_rng(seed)

        feature_dim = backbone.output_dim if backbone is not None else input_dim
        if variant in ("full", "som_linear"):
            if som_config is None:
                som_config = SomConfig(dim=feature_dim)
            if som_config.dim != feature_dim:
                raise ValueError("SSOL dimension does not match feature dimension")
            self.som_config = som_config
            self.bank = init_prototypes(som_config, "gaussian", seed=rng.integers(2**63))
            head_in = som_config.num_prototypes
        else:
            self.som_config = None
            self.bank = None
            head_in = feature_dim

        if variant in ("full", "no_som_spiking"):
            self.head = SpikeHead(head_in, hidden_dim, num_classes, time_steps,
                                  bn_momentum, bn_eps, rng=rng)
        else:
            self.head = Linear(head_in, num_classes, rng)
        self.hidden_dim = hidden_dim
        self.time_steps = time_steps
        self.bn_momentum = bn_momentum
        self.bn_eps = bn_eps
        self._som_cache = None
        self._som_input = None

    @property
    def has_som(self) -> bool:
        return self.bank is not None

    @property
    def is_spiking(self) -> bool:
        return isinstance(self.head, SpikeHead)

    def forward(self, x: np.ndarray, mode: str = "eval", dropout_seed: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.input_dim:
            raise ValueError("dimension mismatch in model input")
        feats = self.backbone.forward(x) if self.backbone is not None else x
        if self.has_som:
            self._som_cache = ssol_forward(
                feats, self.bank, self.som_config,
                training=(mode == "train"), seed=dropout_seed,
            )
            self._som_input = feats
            feats = self._som_cache.assignments
        if self.is_spiking:
            logits = self.head.forward(feats, mode)
        else:
            logits = self.head.forward(feats)
        if not np.all(np.isfinite(logits)):
            raise FloatingPointError("non-finite logits")
        return logits

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        d = self.head.backward(np.asarray(upstream, dtype=np.float64))
        if self.has_som:
            if self._som_cache is None:
                raise RuntimeError("backward before forward")
            d = ssol_backward(self._som_cache, self._som_input, self.bank, d, self.som_config)
        if self.backbone is not None:
            d = self.backbone.backward(d)
        return d

    def zero_grad(self):
        self.head.zero_grad()
        if self.has_som:
            self.bank.zero_grad()
        if self.backbone is not None:
            self.backbone.zero_grad()

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        if self.backbone is not None:
            out.update(self.backbone.params("backbone"))
        if self.has_som:
            out["som.prototypes"] = self.bank.prototypes
        out.update(self.head.params("head"))
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        if self.backbone is not None:
            out.update(self.backbone.grads("backbone"))
        if self.has_som:
            out["som.prototypes"] = self.bank.grad
        out.update(self.head.grads("head"))
        return out

    def stats(self) -> dict[str, np.ndarray]:
        return self.head.stats("head") if self.is_spiking else {}

    def named_tensors(self) -> dict[str, np.ndarray]:
        return {**self.params(), **self.stats()}

    def param_count(self) -> tuple[int, int]:
        """(total, trainable): running statistics count as non-trainable."""
        trainable = sum(v.size for v in self.params().values())
        return trainable + sum(v.size for v in self.stats().values()), trainable

    def hyperparams(self) -> dict:
        doc = {
            "variant": self.variant,
            "input_dim": self.input_dim,
            "num_classes": self.num_classes,
            "hidden_dim": self.hidden_dim,
            "time_steps": self.time_steps,
            "bn_momentum": self.bn_momentum,
            "bn_eps": self.bn_eps,
            "som": asdict(self.som_config) if self.has_som else None,
            "backbone": (
                {"in_dim": self.backbone.in_dim,
                 "hidden_dim": self.backbone.fc1.bias.size,
                 "out_dim": self.backbone.output_dim}
                if self.backbone is not None else None
            ),
        }
        return doc


def model_from_hyperparams(doc: dict) -> Model:
    backbone = None
    if doc.get("backbone"):
        bb = doc["backbone"]
        backbone = ToyBackbone(bb["in_dim"], bb["hidden_dim"], bb["out_dim"])
    som_config = SomConfig(**doc["som"]) if doc.get("som") else None
    return Model(
        variant=doc["variant"],
        input_dim=doc["input_dim"],
        num_classes=doc["num_classes"],
        som_config=som_config,
        hidden_dim=doc["hidden_dim"],
        time_steps=doc["time_steps"],
        bn_momentum=doc["bn_momentum"],
        bn_eps=doc["bn_eps"],
        backbone=backbone,
    )


def save_checkpoint(model: Model, path: str | Path, epoch: int = 0, best_val_accuracy: float = 0.0):
    """Atomic write: magic, version, JSON metadata, float64 LE tensors."""
    path = Path(path)
    tensors = model.named_tensors()
    meta = {
        "hyperparams": model.hyperparams(),
        "epoch": epoch,
        "best_val_accuracy": best_val_accuracy,
        "tensors": [[name, list(arr.shape)] for name, arr in tensors.items()],
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", CHECKPOINT_VERSION))
            fh.write(struct.pack("<Q", len(meta_bytes)))
            fh.write(meta_bytes)
            for arr in tensors.values():
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | Path, expected_variant: str | None = None):
    """Returns (model, epoch, best_val_accuracy)."""
    raw = Path(path).read_bytes()
    if len(raw) < len(CHECKPOINT_MAGIC) + 12 or raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError("version mismatch: bad magic header")
    off = len(CHECKPOINT_MAGIC)
    (version,) = struct.unpack_from("<I", raw, off)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"version mismatch: {version}")
    off += 4
    (meta_len,) = struct.unpack_from("<Q", raw, off)
    off += 8
    if off + meta_len > len(raw):
        raise CheckpointError("truncated file")
    meta = json.loads(raw[off : off + meta_len])
    off += meta_len

    model = model_from_hyperparams(meta["hyperparams"])
    if expected_variant is not None and model.variant != expected_variant:
        raise CheckpointError(
            f"variant mismatch: checkpoint has {model.variant!r}, expected {expected_variant!r}"
        )
    tensors = model.named_tensors()
    stored = meta["tensors"]
    if [name for name, _ in stored] != list(tensors.keys()):
        raise CheckpointError("shape mismatch: tensor names differ")
    for name, shape in stored:
        arr = tensors[name]
        if list(arr.shape) != shape:
            raise CheckpointError(f"shape mismatch for {name}")
        nbytes = arr.size * 8
        if off + nbytes > len(raw):
            raise CheckpointError("truncated file")
        arr[...] = np.frombuffer(raw[off : off + nbytes], dtype="<f8").reshape(arr.shape)
        off += nbytes
    return model, meta["epoch"], meta["best_val_accuracy"]
