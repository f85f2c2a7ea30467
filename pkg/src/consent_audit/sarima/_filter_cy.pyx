# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled innovations-filter kernel.

Same contract and algorithm as _filter_py.kalman_filter_parts; this version
exists because the recursion sits inside every likelihood evaluation of the
simplex search, so it dominates model fitting time.
"""

from libc.math cimport log, isfinite, NAN

import numpy as np


def kalman_filter_parts(double[::1] tcol, double[::1] rvec, double[::1] y,
                        double[:, ::1] p0, double sigma2):
    cdef Py_ssize_t r = tcol.shape[0]
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t t, i, j

    a_arr = np.zeros(r)
    p_arr = np.array(p0, dtype=float, copy=True)
    tp_arr = np.empty((r, r))
    tpt_arr = np.empty((r, r))
    k_arr = np.empty(r)
    anext_arr = np.empty(r)
    rqr_arr = sigma2 * np.outer(rvec, rvec)

    cdef double[::1] a = a_arr
    cdef double[:, ::1] p = p_arr
    cdef double[:, ::1] tp = tp_arr
    cdef double[:, ::1] tpt = tpt_arr
    cdef double[::1] k = k_arr
    cdef double[::1] anext = anext_arr
    cdef double[:, ::1] rqr = rqr_arr

    cdef double sum_log_f = 0.0
    cdef double sum_v2f = 0.0
    cdef double f, v, a0, pij

    for t in range(n):
        f = p[0, 0]
        if not (f > 0.0) or not isfinite(f):
            return NAN, NAN, a_arr, p_arr, False
        v = y[t] - a[0]

        # tp = T @ p: row i is tcol[i] * p[0, :] plus p[i + 1, :].
        for i in range(r):
            for j in range(r):
                pij = tcol[i] * p[0, j]
                if i + 1 < r:
                    pij += p[i + 1, j]
                tp[i, j] = pij

        for i in range(r):
            k[i] = tp[i, 0] / f

        a0 = a[0]
        for i in range(r):
            anext[i] = tcol[i] * a0 + k[i] * v
            if i + 1 < r:
                anext[i] += a[i + 1]
        for i in range(r):
            a[i] = anext[i]

        # tpt = tp @ T.T: column j is tcol[j] * tp[:, 0] plus tp[:, j + 1].
        for i in range(r):
            for j in range(r):
                pij = tcol[j] * tp[i, 0]
                if j + 1 < r:
                    pij += tp[i, j + 1]
                tpt[i, j] = pij

        for i in range(r):
            for j in range(r):
                p[i, j] = tpt[i, j] - f * k[i] * k[j] + rqr[i, j]
        # Symmetrize to stop round-off drift over long series.
        for i in range(r):
            for j in range(i + 1, r):
                pij = 0.5 * (p[i, j] + p[j, i])
                p[i, j] = pij
                p[j, i] = pij

        sum_log_f += log(f)
        sum_v2f += v * v / f

    return sum_log_f, sum_v2f, a_arr, p_arr, True
