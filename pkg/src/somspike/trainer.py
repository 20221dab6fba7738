"""Epoch loop: train, validate, checkpoint the best model, halve the learning
rate on plateaus, stop early, then evaluate the best checkpoint on the test
subset. Also hosts the four-variant ablation harness."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from somspike import data, metrics
from somspike.network import VARIANTS, Model, load_checkpoint, save_checkpoint
from somspike.objective import (
    AdamState,
    EarlyStopState,
    SchedulerState,
    adam_step,
    smoothed_ce,
)
from somspike.softsom import SomConfig, init_prototypes


@dataclass
class TrainConfig:
    variant: str = "full"
    max_epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    learning_rate: float = 1e-3
    smoothing: float = 0.1
    num_prototypes: int = 128
    dropout_rate: float = 0.1
    temperature: float = 1.0
    gradient_mode: str = "full_jacobian"
    prototype_init: str = "sample"
    hidden_dim: int = 256
    time_steps: int = 4
    checkpoint_path: str = "model.ckpt"

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")


@dataclass
class TrainReport:
    config: dict
    epochs: list = field(default_factory=list)  # {epoch, train_loss, val_accuracy, lr}
    best_epoch: int = 0
    best_val_accuracy: float = 0.0
    stopped_early: bool = False
    test: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def evaluate(model: Model, features: np.ndarray, labels: np.ndarray,
             num_classes: int, class_names=None, batch_size: int = 256):
    """Eval-mode accuracy (percent) and confusion matrix; argmax ties break
    toward the lowest class index."""
    if features.shape[0] == 0:
        raise ValueError("empty subset")
    preds = np.concatenate([
        np.argmax(model.forward(features[i : i + batch_size], mode="eval"), axis=1)
        for i in range(0, features.shape[0], batch_size)
    ])
    cm = metrics.confusion(preds, labels, num_classes, class_names)
    return metrics.accuracy(cm), cm


def _build_model(config: TrainConfig, store: data.FeatureStore,
                 train_features: np.ndarray) -> Model:
    d = store.manifest.d
    som_config = None
    if config.variant in ("full", "som_linear"):
        som_config = SomConfig(
            num_prototypes=config.num_prototypes,
            dim=d,
            dropout_rate=config.dropout_rate,
            temperature=config.temperature,
            gradient_mode=config.gradient_mode,
        )
    model = Model(
        config.variant,
        input_dim=d,
        num_classes=store.manifest.num_classes,
        som_config=som_config,
        hidden_dim=config.hidden_dim,
        time_steps=config.time_steps,
        seed=config.seed,
    )
    if model.has_som and config.prototype_init == "sample":
        model.bank = init_prototypes(som_config, "sample", train_features, seed=config.seed)
    return model


def _dropout_seed(seed: int, epoch: int, batch_idx: int) -> int:
    return int(np.random.SeedSequence([seed, epoch, batch_idx]).generate_state(1)[0])


def train(config: TrainConfig, store: data.FeatureStore,
          split: data.SplitAssignment | None = None,
          val_eval_fn=None) -> TrainReport:
    """Run the full training protocol and return the report.

    `val_eval_fn(model, epoch) -> percent` replaces the validation evaluation
    when given (protocol replay tests)."""
    if split is None:
        split = data.stratified_split(store.labels, seed=config.seed)
    train_idx = split.indices("train")
    val_idx = split.indices("val")
    test_idx = split.indices("test")
    if min(train_idx.size, val_idx.size, test_idx.size) == 0:
        raise ValueError("empty subset")

    num_classes = store.manifest.num_classes
    class_names = store.manifest.class_names
    model = _build_model(config, store, store.features[train_idx])

    adam = AdamState(lr=config.learning_rate)
    scheduler = SchedulerState(lr=config.learning_rate)
    early_stop = EarlyStopState()
    report = TrainReport(config=asdict(config))
    best_acc = 0.0
    checkpoint_path = Path(config.checkpoint_path)
    saved = False

    for epoch in range(1, config.max_epochs + 1):
        batches = data.make_batches(store, train_idx, config.batch_size,
                                    shuffle=True, seed=config.seed, epoch=epoch)
        loss_sum = 0.0
        for batch_idx, batch in enumerate(batches):
            logits = model.forward(batch.features, mode="train",
                                   dropout_seed=_dropout_seed(config.seed, epoch, batch_idx))
            loss, dlogits = smoothed_ce(logits, batch.labels, config.smoothing)
            model.zero_grad()
            model.backward(dlogits)
            adam.lr = scheduler.lr
            adam_step(model.params(), model.grads(), adam)
            loss_sum += loss * batch.labels.size

        if val_eval_fn is not None:
            val_acc = float(val_eval_fn(model, epoch))
        else:
            val_acc, _ = evaluate(model, store.features[val_idx], store.labels[val_idx],
                                  num_classes, class_names)

        if val_acc > best_acc:
            save_checkpoint(model, checkpoint_path, epoch=epoch, best_val_accuracy=val_acc)
            best_acc = val_acc
            report.best_epoch = epoch
            saved = True
        scheduler.step(val_acc)
        report.epochs.append({
            "epoch": epoch,
            "train_loss": loss_sum / train_idx.size,
            "val_accuracy": val_acc,
            "lr": scheduler.lr,
        })
        if early_stop.check(epoch, val_acc):
            report.stopped_early = True
            break

    report.best_val_accuracy = best_acc
    if not saved:  # degenerate run where validation never beat zero
        save_checkpoint(model, checkpoint_path, epoch=report.epochs[-1]["epoch"],
                        best_val_accuracy=best_acc)

    best_model, _, _ = load_checkpoint(checkpoint_path)
    test_acc, cm = evaluate(best_model, store.features[test_idx], store.labels[test_idx],
                            num_classes, class_names)
    test_report = metrics.class_report(cm)
    report.test = {
        "accuracy": test_acc,
        "weighted_precision": test_report.weighted_precision,
        "weighted_recall": test_report.weighted_recall,
        "weighted_f1": test_report.weighted_f1,
        "confusion": cm.counts.tolist(),
    }
    return report


def ablate(config: TrainConfig, store: data.FeatureStore, out_dir: str | Path = ".") -> list[tuple[str, float]]:
    """Train every variant with the same seed and split; returns the table."""
    out_dir = Path(out_dir)
    split = data.stratified_split(store.labels, seed=config.seed)
    rows = []
    for variant in VARIANTS:
        cfg = TrainConfig(**{**asdict(config),
                             "variant": variant,
                             "checkpoint_path": str(out_dir / f"{variant}.ckpt")})
        report = train(cfg, store, split=split)
        rows.append((variant, report.test["accuracy"]))
    return rows


def ablation_csv(rows) -> str:
    lines = ["variant,test_accuracy"]
    lines += [f"{variant},{acc}" for variant, acc in rows]
    return "\n".join(lines) + "\n"
