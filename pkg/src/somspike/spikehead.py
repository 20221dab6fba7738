"""Spiking head: two affine+batchnorm+rectifier stages evaluated over T time
steps, with the per-step outputs averaged into a membrane potential.

The sublayers are deterministic, so with noise disabled every step produces
the same output and the average equals the single-step response; the forward
pass exploits this so the result is bit-identical for every T. Optional
per-step Gaussian noise (forward only) is kept for experiments where the
temporal average is non-trivial.
"""

from __future__ import annotations

import numpy as np

from somspike.layers import BatchNorm, Linear, relu, relu_grad


class SpikeHead:
    def __init__(
        self,
        in_dim: int,
        hidden_dim: int,
        out_dim: int,
        time_steps: int = 4,
        momentum: float = 0.1,
        bn_eps: float = 1e-5,
        noise_std: float = 0.0,
        rng: np.random.Generator | None = None,
    ):
        if time_steps < 1:
            raise ValueError("time_steps must be >= 1")
        self.fc1 = Linear(in_dim, hidden_dim, rng)
        self.bn1 = BatchNorm(hidden_dim, momentum, bn_eps)
        self.fc2 = Linear(hidden_dim, out_dim, rng)
        self.bn2 = BatchNorm(out_dim, momentum, bn_eps)
        self.time_steps = time_steps
        self.noise_std = noise_std
        self._cache = None

    def _step(self, x, mode, update_running):
        z1 = self.bn1.forward(self.fc1.forward(x), mode, update_running)
        h = relu(z1)
        z2 = self.bn2.forward(self.fc2.forward(h), mode, update_running)
        return z1, h, z2, relu(z2)

    def forward(self, x: np.ndarray, mode: str, noise_rng: np.random.Generator | None = None) -> np.ndarray:
        """Membrane potential: the T-step average of the stage-two output."""
        x = np.asarray(x, dtype=np.float64)
        if self.noise_std > 0.0 and noise_rng is not None:
            # Running stats blend once per call, from the first step only.
            total = None
            for t in range(self.time_steps):
                noisy = x + noise_rng.normal(0.0, self.noise_std, size=x.shape)
                _, _, _, out = self._step(noisy, mode, update_running=(t == 0))
                total = out if total is None else total + out
            self._cache = None  # noisy multi-step backward unsupported
            return total / self.time_steps
        # Deterministic steps are identical, so the average is one step.
        z1, h, z2, out = self._step(x, mode, update_running=True)
        self._cache = (z1, z2)
        return out

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        """Gradient of the T-step average; equals the single-step gradient."""
        if self._cache is None:
            raise RuntimeError("backward before forward (or noisy forward)")
        z1, z2 = self._cache
        d = relu_grad(z2, np.asarray(upstream, dtype=np.float64))
        d = self.fc2.backward(self.bn2.backward(d))
        d = relu_grad(z1, d)
        return self.fc1.backward(self.bn1.backward(d))

    def zero_grad(self):
        for layer in (self.fc1, self.bn1, self.fc2, self.bn2):
            layer.zero_grad()

    def params(self, prefix: str = "head") -> dict[str, np.ndarray]:
        out = {}
        for name, layer in (("fc1", self.fc1), ("bn1", self.bn1), ("fc2", self.fc2), ("bn2", self.bn2)):
            out.update(layer.params(f"{prefix}.{name}"))
        return out

    def grads(self, prefix: str = "head") -> dict[str, np.ndarray]:
        out = {}
        for name, layer in (("fc1", self.fc1), ("bn1", self.bn1), ("fc2", self.fc2), ("bn2", self.bn2)):
            out.update(layer.grads(f"{prefix}.{name}"))
        return out

    def stats(self, prefix: str = "head") -> dict[str, np.ndarray]:
        out = {}
        out.update(self.bn1.stats(f"{prefix}.bn1"))
        out.update(self.bn2.stats(f"{prefix}.bn2"))
        return out
