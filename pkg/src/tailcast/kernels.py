"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy fallback in ``_pykernels``. Set ``TAILCAST_PURE_PYTHON=1`` to
force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("TAILCAST_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def _c(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def gpd_nll_derivs(a, xi, order=2):
    return _impl.gpd_nll_derivs(_c(a), float(xi), int(order))


def gpd_ad_statistic(a_sorted, xi):
    return float(_impl.gpd_ad_statistic(_c(a_sorted), float(xi)))


def acf(x, max_lag):
    # BLAS dot products outrun the compiled scalar loop here
    return np.asarray(_pykernels.acf(_c(x), int(max_lag)))


def record_counts(x):
    return np.asarray(_impl.record_counts(_c(x)))
