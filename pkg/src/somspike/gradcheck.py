"""Central finite-difference gradient checks for every differentiable piece.

Each check builds a seeded random instance, computes analytic gradients, and
compares them against central differences of a scalar probe loss. All checks
run in float64; the probe inputs are O(1) so relative errors are meaningful.
"""

from __future__ import annotations

import numpy as np

from somspike.backbone import ToyBackbone
from somspike.network import Model
from somspike.objective import smoothed_ce
from somspike.softsom import PrototypeBank, SomConfig, ssol_backward, ssol_forward
from somspike.spikehead import SpikeHead

DEFAULT_STEP = 1e-5


def numeric_grad(f, arr: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central finite differences of scalar f() wrt arr, perturbed in place."""
    grad = np.zeros_like(arr)
    flat, gflat = arr.ravel(), grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = f()
        flat[i] = orig - step
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # Denominator floored so exactly-zero gradients (e.g. a bias cancelled by
    # batch-norm mean subtraction) compare absolutely against FD noise.
    num = np.abs(analytic - numeric)
    den = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-4)
    return float(np.max(num / den)) if num.size else 0.0


def check_ssol(seed: int = 0, gradient_mode: str = "full_jacobian",
               n: int = 3, k: int = 4, d: int = 5) -> float:
    rng = np.random.default_rng(seed)
    config = SomConfig(num_prototypes=k, dim=d, dropout_rate=0.0,
                       gradient_mode=gradient_mode)
    x = rng.normal(size=(n, d))
    bank = PrototypeBank(prototypes=rng.normal(size=(k, d)))
    # Structured upstream gradient with cross-column variation.
    upstream = rng.normal(size=(n, k))

    def probe():
        return float((upstream * ssol_forward(x, bank, config).assignments).sum())

    cache = ssol_forward(x, bank, config)
    bank.zero_grad()
    grad_x = ssol_backward(cache, x, bank, upstream, config)
    err = max_rel_error(grad_x, numeric_grad(probe, x))
    return max(err, max_rel_error(bank.grad, numeric_grad(probe, bank.prototypes)))


def check_spikehead(seed: int = 0, mode: str = "train",
                    n_in: int = 6, hidden: int = 5, n_out: int = 4,
                    batch: int = 3, time_steps: int = 3) -> float:
    rng = np.random.default_rng(seed)
    head = SpikeHead(n_in, hidden, n_out, time_steps, rng=rng)
    head.bn1.running_mean = rng.normal(size=hidden)
    head.bn1.running_var = rng.uniform(0.5, 2.0, size=hidden)
    head.bn2.running_mean = rng.normal(size=n_out)
    head.bn2.running_var = rng.uniform(0.5, 2.0, size=n_out)
    x = rng.normal(size=(batch, n_in))
    upstream = rng.normal(size=(batch, n_out))

    def probe():
        return float((upstream * head.forward(x, mode)).sum())

    head.forward(x, mode)
    head.zero_grad()
    grad_x = head.backward(upstream)
    worst = max_rel_error(grad_x, numeric_grad(probe, x))
    analytic = dict(head.grads("head"))
    for name, param in head.params("head").items():
        worst = max(worst, max_rel_error(analytic[name], numeric_grad(probe, param)))
    return worst


def check_toy_backbone(seed: int = 0, batch: int = 4,
                       in_dim: int = 6, hidden: int = 8, out_dim: int = 5) -> float:
    rng = np.random.default_rng(seed)
    backbone = ToyBackbone(in_dim, hidden, out_dim, rng=rng)
    x = rng.normal(size=(batch, in_dim))
    upstream = rng.normal(size=(batch, out_dim))

    def probe():
        return float((upstream * backbone.forward(x)).sum())

    backbone.forward(x)
    backbone.zero_grad()
    grad_x = backbone.backward(upstream)
    worst = max_rel_error(grad_x, numeric_grad(probe, x))
    analytic = dict(backbone.grads())
    for name, param in backbone.params().items():
        worst = max(worst, max_rel_error(analytic[name], numeric_grad(probe, param)))
    return worst


def check_smoothed_ce(seed: int = 0, batch: int = 4, num_classes: int = 10,
                      smoothing: float = 0.1) -> float:
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(batch, num_classes))
    labels = rng.integers(num_classes, size=batch)

    def probe():
        return smoothed_ce(logits, labels, smoothing)[0]

    _, grad = smoothed_ce(logits, labels, smoothing)
    return max_rel_error(grad, numeric_grad(probe, logits))


def check_full_model(seed: int = 0, variant: str = "full",
                     input_dim: int = 6, num_classes: int = 3, batch: int = 4) -> float:
    rng = np.random.default_rng(seed)
    som_config = SomConfig(num_prototypes=5, dim=input_dim, dropout_rate=0.0)
    model = Model(variant, input_dim, num_classes,
                  som_config=som_config if variant in ("full", "som_linear") else None,
                  hidden_dim=7, time_steps=2, seed=seed)
    x = rng.normal(size=(batch, input_dim))
    labels = rng.integers(num_classes, size=batch)

    def probe():
        return smoothed_ce(model.forward(x, mode="train"), labels, 0.1)[0]

    logits = model.forward(x, mode="train")
    _, dlogits = smoothed_ce(logits, labels, 0.1)
    model.zero_grad()
    model.backward(dlogits)
    analytic = dict(model.grads())
    worst = 0.0
    for name, param in model.params().items():
        worst = max(worst, max_rel_error(analytic[name], numeric_grad(probe, param)))
    return worst


COMPONENT_CHECKS = {
    "ssol": lambda seed: check_ssol(seed),
    "spikehead": lambda seed: max(check_spikehead(seed, "train"), check_spikehead(seed, "eval")),
    "backbone": check_toy_backbone,
    "loss": check_smoothed_ce,
    "full": lambda seed: check_full_model(seed),
}
