"""Feature providers: verbatim replay from a feature store, or a small
trainable rectifier MLP standing in for the frozen CNN backbone so that
end-to-end gradient flow can be exercised."""

from __future__ import annotations

import numpy as np

from somspike.data import FeatureStore
from somspike.layers import Linear, relu, relu_grad


class StoreReplayProvider:
    """Bit-exact replay of stored embedding rows."""

    kind = "store_replay"

    def __init__(self, store: FeatureStore):
        self.store = store
        self.output_dim = store.manifest.d

    def provide(self, indices) -> np.ndarray:
        return self.store.features[np.asarray(indices, dtype=np.int64)]


class ToyBackbone:
    """Two-layer rectifier MLP used where a trainable feature extractor is
    needed; default dims keep desk tests at seconds scale."""

    kind = "toy_backbone"

    def __init__(self, in_dim: int = 32, hidden_dim: int = 64, out_dim: int = 16,
                 rng: np.random.Generator | None = None):
        self.fc1 = Linear(in_dim, hidden_dim, rng)
        self.fc2 = Linear(hidden_dim, out_dim, rng)
        self.in_dim = in_dim
        self.output_dim = out_dim
        self._cache = None

    def provide(self, x: np.ndarray) -> np.ndarray:
        return self.forward(np.asarray(x, dtype=np.float64))

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.in_dim:
            raise ValueError("dimension mismatch in toy backbone input")
        z1 = self.fc1.forward(x)
        self._cache = z1
        return self.fc2.forward(relu(z1))

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward before forward")
        d = self.fc2.backward(np.asarray(upstream, dtype=np.float64))
        return self.fc1.backward(relu_grad(self._cache, d))

    def zero_grad(self):
        self.fc1.zero_grad()
        self.fc2.zero_grad()

    def params(self, prefix: str = "backbone") -> dict[str, np.ndarray]:
        return {**self.fc1.params(f"{prefix}.fc1"), **self.fc2.params(f"{prefix}.fc2")}

    def grads(self, prefix: str = "backbone") -> dict[str, np.ndarray]:
        return {**self.fc1.grads(f"{prefix}.fc1"), **self.fc2.grads(f"{prefix}.fc2")}
