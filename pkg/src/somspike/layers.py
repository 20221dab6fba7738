"""Small dense building blocks shared by the head, backbone and classifiers.

Each layer caches what its backward pass needs and accumulates gradients in
`.grad`-suffixed buffers; `zero_grad` clears them between optimizer steps.
"""

from __future__ import annotations

import numpy as np


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    # Subgradient at exactly 0 is 0.
    return np.where(x > 0.0, upstream, 0.0)


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        if rng is None:
            self.weight = np.zeros((in_dim, out_dim))
        else:
            # He-style scaling; all layers feed rectifiers here.
            self.weight = rng.normal(0.0, np.sqrt(2.0 / in_dim), size=(in_dim, out_dim))
        self.bias = np.zeros(out_dim)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.weight.shape[0]:
            raise ValueError("dimension mismatch in linear layer")
        self._cache = x
        return x @ self.weight + self.bias

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward before forward")
        x = self._cache
        self.grad_weight += x.T @ upstream
        self.grad_bias += upstream.sum(axis=0)
        return upstream @ self.weight.T

    def zero_grad(self):
        self.grad_weight[:] = 0.0
        self.grad_bias[:] = 0.0

    def params(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.weight": self.weight, f"{prefix}.bias": self.bias}

    def grads(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.weight": self.grad_weight, f"{prefix}.bias": self.grad_bias}


class BatchNorm:
    """1-D batch normalization with biased batch variance.

    Train mode normalizes by batch statistics and blends them into the
    running estimates (running <- (1-momentum)*running + momentum*batch);
    eval mode normalizes by the running estimates.
    """

    def __init__(self, width: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = np.ones(width)
        self.beta = np.zeros(width)
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)
        self.momentum = momentum
        self.eps = eps
        self.grad_gamma = np.zeros_like(self.gamma)
        self.grad_beta = np.zeros_like(self.beta)
        self._cache = None

    @property
    def width(self) -> int:
        return self.gamma.size

    def forward(self, x: np.ndarray, mode: str, update_running: bool = True) -> np.ndarray:
        if x.shape[1] != self.width:
            raise ValueError("width mismatch in batch norm")
        if mode == "train":
            if x.shape[0] < 2:
                raise ValueError("train-mode batch norm needs at least 2 rows")
            mean = x.mean(axis=0)
            var = x.var(axis=0)  # biased
            if update_running:
                self.running_mean += self.momentum * (mean - self.running_mean)
                self.running_var += self.momentum * (var - self.running_var)
        elif mode == "eval":
            mean = self.running_mean
            var = self.running_var
        else:
            raise ValueError(f"unknown mode {mode!r}")
        inv_std = 1.0 / np.sqrt(var + self.eps)
        centered = x - mean
        xhat = centered * inv_std
        self._cache = (mode, centered, inv_std, xhat)
        return self.gamma * xhat + self.beta

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward before forward")
        mode, centered, inv_std, xhat = self._cache
        self.grad_gamma += (upstream * xhat).sum(axis=0)
        self.grad_beta += upstream.sum(axis=0)
        dxhat = upstream * self.gamma
        if mode == "eval":
            return dxhat * inv_std
        n = centered.shape[0]
        # Batch-statistics path: mean and variance depend on every row.
        dvar = (dxhat * centered).sum(axis=0) * (-0.5) * inv_std**3
        dmean = -(dxhat.sum(axis=0)) * inv_std
        return dxhat * inv_std + (2.0 / n) * dvar * centered + dmean / n

    def zero_grad(self):
        self.grad_gamma[:] = 0.0
        self.grad_beta[:] = 0.0

    def params(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.gamma": self.gamma, f"{prefix}.beta": self.beta}

    def grads(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.gamma": self.grad_gamma, f"{prefix}.beta": self.grad_beta}

    def stats(self, prefix: str) -> dict[str, np.ndarray]:
        return {
            f"{prefix}.running_mean": self.running_mean,
            f"{prefix}.running_var": self.running_var,
        }
