# cython: language_level=3
"""Compiled versions of the hot kernels in ``_pykernels``.

Same signatures and return conventions; one pass over the data per call.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, expm1, fabs, INFINITY

cnp.import_array()

cdef double SERIES_W = 1e-4


def gpd_nll_derivs(const double[::1] a, double xi, int order=2):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double ai, w, opw, opw2, L, ratio, s1, s2, ws
    cdef double nll = 0.0, g_x = 0.0, g_e = 0.0
    cdef double h_xx = 0.0, h_xe = 0.0, h_ee = 0.0
    cdef bint small
    with nogil:
        for i in range(n):
            if xi * a[i] <= -1.0:
                nll = INFINITY
                break
        if nll == INFINITY:
            pass
        else:
            for i in range(n):
                ai = a[i]
                w = xi * ai
                opw = 1.0 + w
                small = fabs(w) < SERIES_W
                if small:
                    ratio = 1.0 - w / 2.0 + w * w / 3.0 - w * w * w / 4.0
                else:
                    L = log1p(w)
                    ratio = L / w
                nll += ai * (1.0 + xi) * ratio
                if order >= 1:
                    if small:
                        s1 = 0.5 - 2.0 * w / 3.0 + 0.75 * w * w - 0.8 * w * w * w
                    else:
                        s1 = (L - w / opw) / (w * w)
                    g_x -= ai * ai * s1 - ai / opw
                    g_e -= (1.0 + xi) * ai / opw
                if order >= 2:
                    opw2 = opw * opw
                    if small:
                        s2 = -2.0 / 3.0 + 1.5 * w - 2.4 * w * w + (10.0 / 3.0) * w * w * w
                    else:
                        s2 = (2.0 * w / opw - 2.0 * L + w * w / opw2) / (w * w * w)
                    h_xx -= ai * ai * ai * s2 + ai * ai / opw2
                    h_xe -= ai * (1.0 - ai) / opw2
                    h_ee += (1.0 + xi) * ai / opw2
    if nll == INFINITY:
        return INFINITY, None, None
    if order < 1:
        return nll, None, None
    grad = np.array([g_x, g_e])
    if order < 2:
        return nll, grad, None
    hess = np.array([[h_xx, h_xe], [h_xe, h_ee]])
    return nll, grad, hess


def gpd_ad_statistic(const double[::1] a_sorted, double xi):
    cdef Py_ssize_t i, n = a_sorted.shape[0]
    cdef double s = 0.0, w, lsf, lcdf
    cdef bint expo = fabs(xi) < 1e-12
    lsf_arr = np.empty(n)
    cdef double[::1] l = lsf_arr
    with nogil:
        for i in range(n):
            w = xi * a_sorted[i]
            if expo:
                lsf = -a_sorted[i]
            elif w > -1.0:
                lsf = -log1p(w) / xi
            else:
                lsf = -INFINITY
            if lsf < -745.0:
                lsf = -745.0
            l[i] = lsf
        for i in range(n):
            lsf = l[i]
            if lsf > -1e-300:
                lsf = -1e-300
            lcdf = log(-expm1(lsf))
            if lcdf < -745.0:
                lcdf = -745.0
            s += (2.0 * (i + 1) - 1.0) * (lcdf + l[n - 1 - i])
    return -n - s / n


def acf(const double[::1] x, Py_ssize_t max_lag):
    cdef Py_ssize_t n = x.shape[0], i, k, m
    cdef double mean = 0.0, denom = 0.0, a0, a1, a2, a3
    out = np.empty(max_lag + 1)
    cdef double[::1] o = out
    d_arr = np.empty(n)
    cdef double[::1] d = d_arr
    with nogil:
        for i in range(n):
            mean += x[i]
        mean /= n
        for i in range(n):
            d[i] = x[i] - mean
            denom += d[i] * d[i]
        o[0] = 1.0
        for k in range(1, max_lag + 1):
            # four independent partial sums let the loop pipeline
            a0 = a1 = a2 = a3 = 0.0
            m = n - k
            i = 0
            while i + 4 <= m:
                a0 += d[i] * d[i + k]
                a1 += d[i + 1] * d[i + k + 1]
                a2 += d[i + 2] * d[i + k + 2]
                a3 += d[i + 3] * d[i + k + 3]
                i += 4
            while i < m:
                a0 += d[i] * d[i + k]
                i += 1
            o[k] = ((a0 + a1) + (a2 + a3)) / denom
    return out


def record_counts(const double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    out = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef double running
    cdef cnp.int64_t count = 0
    if n == 0:
        return out
    with nogil:
        running = x[0]
        count = 1
        o[0] = 1
        for i in range(1, n):
            if x[i] > running:
                running = x[i]
                count += 1
            o[i] = count
    return out
