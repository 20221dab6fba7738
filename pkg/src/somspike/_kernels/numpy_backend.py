"""Pure-numpy reference implementation of the hot kernels."""

import numpy as np


def pairwise_distances(x, protos, eps):
    """D[i, j] = sqrt(||x_i - p_j||^2 + eps^2), via expanded squared norms."""
    sq = (
        np.einsum("id,id->i", x, x)[:, None]
        - 2.0 * (x @ protos.T)
        + np.einsum("kd,kd->k", protos, protos)[None, :]
    )
    np.clip(sq, 0.0, None, out=sq)
    return np.sqrt(sq + eps * eps)


def distance_grads(dldd, x, protos, dist, dist_floor):
    """Push dL/dD through the Euclidean distance into (grad_x, grad_protos)."""
    weights = dldd / np.maximum(dist, dist_floor)
    # grad_x[i] = sum_j w_ij (x_i - p_j); grad_p[j] = -sum_i w_ij (x_i - p_j)
    grad_x = weights.sum(axis=1, keepdims=True) * x - weights @ protos
    grad_p = weights.sum(axis=0)[:, None] * protos - weights.T @ x
    return grad_x, grad_p
