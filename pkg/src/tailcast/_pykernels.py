"""Pure numpy implementations of the hot kernels.

Mirrors ``_ckernels.pyx`` function for function; the two are checked
against each other in the test suite.
"""

from __future__ import annotations

import math

import numpy as np

# Per-observation switch to the power series in w = xi * a.
SERIES_W = 1e-4


def gpd_nll_derivs(a, xi, order=2):
    """Negative log-likelihood of GPD excesses and its derivatives.

    ``a`` holds excesses already divided by the scale, ``a = (x - t)/beta``.
    The likelihood is parametrised by ``(xi, eta = log beta)``; returns
    ``(nll, grad, hess)`` where ``grad``/``hess`` are ``None`` below
    ``order``. ``nll`` is ``inf`` when ``1 + xi*a <= 0`` for any point.
    The caller adds ``n * eta`` to ``nll`` (and ``n`` to the eta gradient).
    """
    a = np.asarray(a, dtype=float)
    w = xi * a
    if np.any(w <= -1.0):
        return math.inf, None, None
    small = np.abs(w) < SERIES_W
    big = ~small
    opw = 1.0 + w
    # (1 + 1/xi) * log1p(w), written as a*(1+xi)*log1p(w)/w
    ratio = np.empty_like(a)
    ratio[small] = 1.0 - w[small] / 2.0 + w[small] ** 2 / 3.0 - w[small] ** 3 / 4.0
    ratio[big] = np.log1p(w[big]) / w[big]
    nll = float(np.sum(a * (1.0 + xi) * ratio))
    if order < 1:
        return nll, None, None

    # d/dxi of -(1+1/xi)log1p(w) = a^2 * S1(w) - a/(1+w), S1 = (L - w/(1+w))/w^2
    s1 = np.empty_like(a)
    ws = w[small]
    s1[small] = 0.5 - 2.0 * ws / 3.0 + 0.75 * ws**2 - 0.8 * ws**3
    wb = w[big]
    s1[big] = (np.log1p(wb) - wb / (1.0 + wb)) / wb**2
    dl_dxi = a * a * s1 - a / opw
    dl_deta = (1.0 + xi) * a / opw
    grad = np.array([-float(np.sum(dl_dxi)), -float(np.sum(dl_deta))])
    if order < 2:
        return nll, grad, None

    # d2l/dxi2 = a^3 * S2(w) + a^2/(1+w)^2, S2 = (2w/(1+w) - 2L + w^2/(1+w)^2)/w^3
    s2 = np.empty_like(a)
    s2[small] = -2.0 / 3.0 + 1.5 * ws - 2.4 * ws**2 + (10.0 / 3.0) * ws**3
    s2[big] = (2.0 * wb / (1.0 + wb) - 2.0 * np.log1p(wb) + wb**2 / (1.0 + wb) ** 2) / wb**3
    opw2 = opw * opw
    h_xx = -float(np.sum(a**3 * s2 + a * a / opw2))
    h_xe = -float(np.sum(a * (1.0 - a) / opw2))
    h_ee = float(np.sum((1.0 + xi) * a / opw2))
    hess = np.array([[h_xx, h_xe], [h_xe, h_ee]])
    return nll, grad, hess


def gpd_ad_statistic(a_sorted, xi):
    """Anderson-Darling A^2 of scaled excesses (ascending) against GPD(xi, 1, 0)."""
    a = np.asarray(a_sorted, dtype=float)
    n = a.size
    w = xi * a
    if abs(xi) < 1e-12:
        logsf = -a
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            logsf = np.where(w > -1.0, -np.log1p(np.maximum(w, -1.0)) / xi, -np.inf)
    logsf = np.maximum(logsf, -745.0)
    logcdf = np.log(-np.expm1(np.minimum(logsf, -1e-300)))
    logcdf = np.maximum(logcdf, -745.0)
    i = np.arange(1, n + 1, dtype=float)
    s = np.sum((2.0 * i - 1.0) * (logcdf + logsf[::-1]))
    return float(-n - s / n)


def acf(x, max_lag):
    x = np.asarray(x, dtype=float)
    n = x.size
    d = x - x.mean()
    denom = float(np.dot(d, d))
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(np.dot(d[: n - k], d[k:])) / denom
    return out


def record_counts(x):
    """Running number of strict records; the first observation is a record."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return np.zeros(0, dtype=np.int64)
    prev_max = np.maximum.accumulate(x)
    is_rec = np.empty(x.size, dtype=bool)
    is_rec[0] = True
    is_rec[1:] = x[1:] > prev_max[:-1]
    return np.cumsum(is_rec, dtype=np.int64)
