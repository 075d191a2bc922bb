# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hull and pool-adjacent-violators kernels."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def lower_hull_indices(const double[::1] x, const double[::1] y):
    """Indices of the vertices of the lower convex hull of (x, y).

    ``x`` must be strictly increasing. Collinear interior points are dropped.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] out = np.empty(n, dtype=np.intp)
    cdef cnp.intp_t[::1] h = out
    cdef Py_ssize_t top = 0, i
    cdef cnp.intp_t o, a
    cdef double cross
    for i in range(n):
        while top >= 2:
            o = h[top - 2]
            a = h[top - 1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross <= 0.0:
                top -= 1
            else:
                break
        h[top] = i
        top += 1
    return out[:top].copy()


def pava(const double[::1] y, const double[::1] w):
    """Weighted least-squares nondecreasing fit of ``y``."""
    cdef Py_ssize_t n = y.shape[0]
    cdef cnp.ndarray[double, ndim=1] level = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] weight = np.empty(n)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] size = np.empty(n, dtype=np.intp)
    cdef double[::1] lv = level
    cdef double[::1] wt = weight
    cdef cnp.intp_t[::1] sz = size
    cdef Py_ssize_t nb = 0, i, j, pos
    cdef double ww
    for i in range(n):
        lv[nb] = y[i]
        wt[nb] = w[i]
        sz[nb] = 1
        nb += 1
        while nb >= 2 and lv[nb - 2] > lv[nb - 1]:
            ww = wt[nb - 2] + wt[nb - 1]
            lv[nb - 2] = (wt[nb - 2] * lv[nb - 2] + wt[nb - 1] * lv[nb - 1]) / ww
            wt[nb - 2] = ww
            sz[nb - 2] += sz[nb - 1]
            nb -= 1
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] o = out
    pos = 0
    for i in range(nb):
        for j in range(sz[i]):
            o[pos] = lv[i]
            pos += 1
    return out
