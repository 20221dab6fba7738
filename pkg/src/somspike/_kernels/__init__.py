"""Kernel backend selection: compiled extension if available, numpy otherwise."""

from somspike._kernels import numpy_backend

try:
    from somspike._kernels import _core as _backend

    BACKEND = "compiled"
except ImportError:
    _backend = numpy_backend
    BACKEND = "numpy"

import numpy as _np


def pairwise_distances(x, protos, eps):
    x = _np.ascontiguousarray(x, dtype=_np.float64)
    protos = _np.ascontiguousarray(protos, dtype=_np.float64)
    return _backend.pairwise_distances(x, protos, float(eps))


def distance_grads(dldd, x, protos, dist, dist_floor):
    dldd = _np.ascontiguousarray(dldd, dtype=_np.float64)
    x = _np.ascontiguousarray(x, dtype=_np.float64)
    protos = _np.ascontiguousarray(protos, dtype=_np.float64)
    dist = _np.ascontiguousarray(dist, dtype=_np.float64)
    return _backend.distance_grads(dldd, x, protos, dist, float(dist_floor))
