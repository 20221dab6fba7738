"""Differentiable soft self-organizing layer.

Forward: pairwise Euclidean distances to K learnable prototypes, softmax over
the negative distances, optional inverted dropout on the assignment matrix.
Backward: analytic gradients through the softmax and the distance map, either
with the full softmax Jacobian (default, passes gradient checks) or with the
diagonal-only variant kept for fidelity experiments (known to be wrong for
K >= 2, see the expected-failure tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from somspike import _kernels

DIST_FLOOR = 1e-12


@dataclass
class SomConfig:
    num_prototypes: int = 128
    dim: int = 2048
    dropout_rate: float = 0.1
    temperature: float = 1.0
    distance_eps: float = 1e-8
    gradient_mode: str = "full_jacobian"  # or "paper_diagonal"

    def __post_init__(self):
        if self.num_prototypes < 1:
            raise ValueError("need at least one prototype")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.gradient_mode not in ("full_jacobian", "paper_diagonal"):
            raise ValueError(f"unknown gradient_mode {self.gradient_mode!r}")


@dataclass
class PrototypeBank:
    prototypes: np.ndarray  # (K, d)
    grad: np.ndarray = None

    def __post_init__(self):
        self.prototypes = np.asarray(self.prototypes, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.prototypes)

    def zero_grad(self):
        self.grad[:] = 0.0


def init_prototypes(config: SomConfig, strategy: str = "gaussian", source_batch=None, seed: int = 0) -> PrototypeBank:
    """Sample K rows from a batch without replacement, or draw N(0, 1/d)."""
    k, d = config.num_prototypes, config.dim
    rng = np.random.default_rng(seed)
    if strategy == "sample":
        batch = np.asarray(source_batch, dtype=np.float64)
        if batch.shape[0] < k:
            raise ValueError("source batch smaller than prototype count")
        rows = rng.choice(batch.shape[0], size=k, replace=False)
        return PrototypeBank(prototypes=batch[rows].copy())
    if strategy == "gaussian":
        return PrototypeBank(prototypes=rng.normal(0.0, 1.0 / np.sqrt(d), size=(k, d)))
    raise ValueError(f"unknown init strategy {strategy!r}")


def distances(x: np.ndarray, prototypes: np.ndarray, eps: float = 0.0) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    prototypes = np.asarray(prototypes, dtype=np.float64)
    if x.shape[1] != prototypes.shape[1]:
        raise ValueError("dimension mismatch between inputs and prototypes")
    return _kernels.pairwise_distances(x, prototypes, eps)


def soft_assign(dist: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-stochastic softmax over negative distances, max-shifted."""
    z = -np.asarray(dist, dtype=np.float64) / temperature
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class SoftAssignment:
    assignments: np.ndarray  # returned output (post-dropout when training)
    softmax: np.ndarray  # pre-dropout row-stochastic matrix
    distances: np.ndarray = field(repr=False, default=None)
    dropout_mask: np.ndarray = field(repr=False, default=None)  # None in eval mode


def ssol_forward(
    x: np.ndarray,
    bank: PrototypeBank,
    config: SomConfig,
    training: bool = False,
    seed: int = 0,
) -> SoftAssignment:
    dist = distances(x, bank.prototypes, config.distance_eps)
    softmax = soft_assign(dist, config.temperature)
    mask = None
    out = softmax
    if training and config.dropout_rate > 0.0:
        rng = np.random.default_rng(seed)
        keep = 1.0 - config.dropout_rate
        mask = (rng.random(softmax.shape) < keep) / keep
        out = softmax * mask
    return SoftAssignment(assignments=out, softmax=softmax, distances=dist, dropout_mask=mask)


def ssol_backward(
    cache: SoftAssignment,
    x: np.ndarray,
    bank: PrototypeBank,
    upstream: np.ndarray,
    config: SomConfig,
) -> np.ndarray:
    """Returns grad wrt x and accumulates the prototype gradient in the bank."""
    if cache.distances is None:
        raise ValueError("forward cache missing distances")
    s = cache.softmax
    delta = np.asarray(upstream, dtype=np.float64)
    if delta.shape != s.shape:
        raise ValueError("upstream gradient shape mismatch")
    if cache.dropout_mask is not None:
        delta = delta * cache.dropout_mask

    if config.gradient_mode == "full_jacobian":
        # dL/dD_ij = S_ij (sum_k delta_ik S_ik - delta_ij) / tau
        dldd = s * ((delta * s).sum(axis=1, keepdims=True) - delta) / config.temperature
    else:
        # Diagonal-only softmax Jacobian: ignores cross-prototype coupling.
        dldd = -delta * s * (1.0 - s) / config.temperature

    grad_x, grad_p = _kernels.distance_grads(dldd, x, bank.prototypes, cache.distances, DIST_FLOOR)
    bank.grad += grad_p
    return grad_x
