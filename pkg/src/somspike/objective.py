"""Objective stack: label-smoothed cross-entropy, Adam, plateau LR halving
and early stopping on validation accuracy (in percent)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def smooth_labels(y: int, num_classes: int, smoothing: float) -> np.ndarray:
    """Soft target: 1 - eps on the true class, eps/(C-1) elsewhere."""
    if not 0 <= y < num_classes:
        raise ValueError("label out of range")
    if not 0.0 <= smoothing < 1.0:
        raise ValueError("smoothing must be in [0, 1)")
    target = np.full(num_classes, smoothing / (num_classes - 1))
    target[y] = 1.0 - smoothing
    return target


def smoothed_ce(logits: np.ndarray, labels: np.ndarray, smoothing: float):
    """Mean label-smoothed cross-entropy and its gradient wrt the logits.

    Returns (loss, grad) with grad = (softmax(logits) - soft_target) / N.
    """
    logits = np.asarray(logits, dtype=np.float64)
    n, c = logits.shape
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    targets = np.stack([smooth_labels(int(y), c, smoothing) for y in labels])
    loss = float(-(targets * log_probs).sum() / n)
    grad = (np.exp(log_probs) - targets) / n
    return loss, grad


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState):
    """One bias-corrected Adam update, in place on the parameter arrays."""
    if not params:
        raise ValueError("no parameters to update")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**state.t
    bias2 = 1.0 - b2**state.t
    for name, theta in params.items():
        g = grads[name]
        m = state.m.setdefault(name, np.zeros_like(theta))
        v = state.v.setdefault(name, np.zeros_like(theta))
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        theta -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)


@dataclass
class SchedulerState:
    """Halve the learning rate after `patience` consecutive epochs without a
    strict improvement of the best validation accuracy."""

    lr: float
    factor: float = 0.5
    patience: int = 2
    best: float = -np.inf
    stale_epochs: int = 0

    def step(self, val_accuracy: float) -> float:
        if val_accuracy > self.best:
            self.best = val_accuracy
            self.stale_epochs = 0
        else:
            self.stale_epochs += 1
            if self.stale_epochs >= self.patience:
                self.lr *= self.factor
                self.stale_epochs = 0
        return self.lr


@dataclass
class EarlyStopState:
    """Stop once the `window` epochs after the best one all fail to exceed the
    best accuracy by more than `tolerance` (percentage points)."""

    window: int = 5
    tolerance: float = 0.01
    best: float = -np.inf
    best_epoch: int = 0
    _last_epoch: int = 0

    def check(self, epoch: int, val_accuracy: float) -> bool:
        """Returns True when training should stop. Epochs are 1-based."""
        if epoch != self._last_epoch + 1:
            raise ValueError("epochs must be reported in order")
        self._last_epoch = epoch
        if val_accuracy > self.best:
            # A strict improvement relocates the best epoch; anything within
            # `tolerance` of the old best therefore restarts the window too,
            # which makes the tolerance a documentation knob rather than an
            # extra branch.
            self.best = val_accuracy
            self.best_epoch = epoch
        return epoch - self.best_epoch >= self.window
