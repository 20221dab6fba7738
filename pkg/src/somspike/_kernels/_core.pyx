# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the soft self-organizing layer.

The O(n*k*d) contractions go through BLAS (np.dot); the surrounding
element-wise work (squared norms, clamp + sqrt epilogue, weight scatter)
is fused into single C passes instead of the chain of full-size
temporaries the numpy backend allocates. ``numpy_backend.py`` is the
reference; both must agree to ~1e-12.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def pairwise_distances(double[:, ::1] x, double[:, ::1] protos, double eps):
    """D[i, j] = sqrt(||x_i - p_j||^2 + eps^2), expanded squared norms."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k = protos.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double acc
    cdef double eps2 = eps * eps

    xx_arr = np.empty(n, dtype=np.float64)
    pp_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] xx = xx_arr
    cdef double[::1] pp = pp_arr
    for i in range(n):
        acc = 0.0
        for c in range(d):
            acc += x[i, c] * x[i, c]
        xx[i] = acc
    for j in range(k):
        acc = 0.0
        for c in range(d):
            acc += protos[j, c] * protos[j, c]
        pp[j] = acc

    out = np.dot(np.asarray(x), np.asarray(protos).T)
    cdef double[:, ::1] dist = out
    for i in range(n):
        for j in range(k):
            acc = xx[i] + pp[j] - 2.0 * dist[i, j]
            if acc < 0.0:
                acc = 0.0
            dist[i, j] = sqrt(acc + eps2)
    return out


def distance_grads(double[:, ::1] dldd, double[:, ::1] x, double[:, ::1] protos,
                   double[:, ::1] dist, double dist_floor):
    """Push dL/dD through D[i,j] = ||x_i - p_j|| into (grad_x, grad_protos).

    grad_x[i] = sum_j w_ij (x_i - p_j), grad_p[j] = -sum_i w_ij (x_i - p_j)
    with w = dldd / max(dist, dist_floor); distances are clamped before the
    division so coincident points stay finite.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k = protos.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double dv, wv, rs

    w_arr = np.empty((n, k), dtype=np.float64)
    row_arr = np.zeros(n, dtype=np.float64)
    col_arr = np.zeros(k, dtype=np.float64)
    cdef double[:, ::1] w = w_arr
    cdef double[::1] row_sum = row_arr
    cdef double[::1] col_sum = col_arr
    for i in range(n):
        rs = 0.0
        for j in range(k):
            dv = dist[i, j]
            if dv < dist_floor:
                dv = dist_floor
            wv = dldd[i, j] / dv
            w[i, j] = wv
            rs += wv
            col_sum[j] += wv
        row_sum[i] = rs

    gx_arr = np.dot(w_arr, np.asarray(protos))
    gp_arr = np.dot(w_arr.T, np.asarray(x))
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, ::1] gp = gp_arr
    for i in range(n):
        for c in range(d):
            gx[i, c] = row_sum[i] * x[i, c] - gx[i, c]
    for j in range(k):
        for c in range(d):
            gp[j, c] = col_sum[j] * protos[j, c] - gp[j, c]
    return gx_arr, gp_arr
