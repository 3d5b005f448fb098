"""Nonparametric tail diagnostics.

Each curve comes back as a :class:`DiagnosticSeries`, a plain carrier of
plot data that serializes to CSV (``x,y[,low,high]``) and JSON.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import DegenerateInputError, EmptyTailError, InputError
from .jsonio import dumps

Z95 = 1.959963984540054


@dataclass(eq=False)
class DiagnosticSeries:
    name: str
    x: np.ndarray
    y: np.ndarray
    low: Optional[np.ndarray] = None
    high: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape:
            raise InputError("x and y must have the same length")
        if (self.low is None) != (self.high is None):
            raise InputError("bands need both low and high")
        if self.low is not None:
            self.low = np.asarray(self.low, dtype=float)
            self.high = np.asarray(self.high, dtype=float)
            if self.low.shape != self.x.shape or self.high.shape != self.x.shape:
                raise InputError("bands must align with points")

    def __len__(self):
        return self.x.size

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    @property
    def bands(self):
        if self.low is None:
            return None
        return list(zip(self.x.tolist(), self.low.tolist(), self.high.tolist()))

    def to_csv(self) -> str:
        if self.low is None:
            lines = ["x,y"]
            lines += [f"{a:.17g},{b:.17g}" for a, b in zip(self.x, self.y)]
        else:
            lines = ["x,y,low,high"]
            lines += [
                f"{a:.17g},{b:.17g},{c:.17g},{d:.17g}"
                for a, b, c, d in zip(self.x, self.y, self.low, self.high)
            ]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        out = {"name": self.name, "x": self.x.tolist(), "y": self.y.tolist()}
        if self.low is not None:
            out["low"] = self.low.tolist()
            out["high"] = self.high.tolist()
        if self.meta:
            out["meta"] = self.meta
        return out

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def window(self, lo: float, hi: float) -> "DiagnosticSeries":
        """Points with ``lo <= x <= hi``."""
        m = (self.x >= lo) & (self.x <= hi)
        sub = lambda a: None if a is None else a[m]  # noqa: E731
        return DiagnosticSeries(self.name, self.x[m], self.y[m], sub(self.low), sub(self.high))


def _array(xs, name="xs", min_len=1):
    a = np.asarray(xs, dtype=float).ravel()
    if a.size < min_len:
        raise InputError(f"{name} needs at least {min_len} values, got {a.size}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} must be finite")
    return a


# -- records ---------------------------------------------------------------


@dataclass(eq=False)
class RecordsResult:
    n: np.ndarray
    records: np.ndarray
    expected: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray

    @property
    def trajectory(self):
        return list(zip(self.n.tolist(), self.records.tolist()))

    @property
    def total(self) -> int:
        return int(self.records[-1])

    def outside_band(self) -> np.ndarray:
        return (self.records < self.band_low) | (self.records > self.band_high)

    def as_series(self) -> DiagnosticSeries:
        return DiagnosticSeries(
            "records", self.n, self.records, self.band_low, self.band_high,
            meta={"expected_final": float(self.expected[-1])},
        )


def expected_records(n: int):
    """Mean ``H_n`` and variance of the iid record count for ``1..n``."""
    i = np.arange(1, n + 1, dtype=float)
    mean = np.cumsum(1.0 / i)
    var = np.cumsum(1.0 / i - 1.0 / i**2)
    return mean, var


def records_analysis(xs) -> RecordsResult:
    """Running record count against its iid expectation.

    ``x_n`` is a record when it strictly exceeds every earlier value; the
    95% band is the normal approximation ``H_n +- 1.96 sd`` clipped at 1.
    """
    x = _array(xs)
    counts = kernels.record_counts(x)
    mean, var = expected_records(x.size)
    half = Z95 * np.sqrt(var)
    return RecordsResult(
        n=np.arange(1, x.size + 1),
        records=counts,
        expected=mean,
        band_low=np.maximum(mean - half, 1.0),
        band_high=mean + half,
    )


# -- moments ---------------------------------------------------------------


def max_sum_ratio(xs, p: float = 1.0) -> DiagnosticSeries:
    """``R_n(p) = max(x_i^p) / sum(x_i^p)`` over growing prefixes.

    Convergence to zero indicates a finite p-th moment. Prefixes whose sum
    is zero are undefined and left out.
    """
    if not p > 0:
        raise InputError("p must be > 0")
    x = _array(xs)
    if np.any(x < 0):
        raise InputError("max_sum_ratio needs nonnegative data")
    if not np.any(x > 0):
        raise DegenerateInputError("all values are zero")
    xp = x**p
    s = np.cumsum(xp)
    m = np.maximum.accumulate(xp)
    ok = s > 0
    n = np.arange(1, x.size + 1)[ok]
    return DiagnosticSeries(f"max_sum_ratio_p{p:g}", n, m[ok] / s[ok], meta={"p": p})


# -- distribution shape ----------------------------------------------------


def empirical_ccdf(xs) -> DiagnosticSeries:
    """Fraction of observations strictly above each distinct value.

    The last point (at the maximum) has ``y == 0``; it is kept and its index
    recorded in ``meta['zero_y_index']`` because log-log plots must drop it.
    """
    x = np.sort(_array(xs))
    v, first = np.unique(x, return_index=True)
    # number <= v equals index of the next distinct value's first position
    le = np.append(first[1:], x.size)
    y = (x.size - le) / x.size
    return DiagnosticSeries("ccdf", v, y, meta={"zero_y_index": int(v.size - 1)})


def default_mef_thresholds(xs, lo_q: float = 0.5, hi_q: float = 0.995) -> np.ndarray:
    """Distinct sample values between two percentiles (default 50th to 99.5th)."""
    x = _array(xs)
    lo, hi = np.quantile(x, [lo_q, hi_q])
    u = np.unique(x)
    return u[(u >= lo) & (u <= hi)]


def mean_excess(xs, thresholds=None) -> DiagnosticSeries:
    """Empirical mean excess ``e_n(t)`` = mean of ``x - t`` over ``x > t``.

    Thresholds with no exceedance are omitted. ``meta['n_exceed']`` holds
    the exceedance counts behind each point.
    """
    x = np.sort(_array(xs))
    if thresholds is None:
        thresholds = default_mef_thresholds(x)
    t = np.asarray(thresholds, dtype=float).ravel()
    if t.size == 0:
        raise InputError("threshold list is empty")
    t = np.sort(t)
    tail_sum = np.concatenate([np.cumsum(x[::-1])[::-1], [0.0]])
    idx = np.searchsorted(x, t, side="right")
    count = x.size - idx
    keep = count > 0
    t, idx, count = t[keep], idx[keep], count[keep]
    e = (tail_sum[idx] - t * count) / count
    return DiagnosticSeries("mean_excess", t, e, meta={"n_exceed": count.tolist()})


def _upper_order_stats(x):
    return np.sort(x)[::-1]


def hill_curve(xs) -> DiagnosticSeries:
    """Hill estimates of the tail index against the number ``tau`` of upper order statistics.

    ``tau`` runs over ``2..n-1``; tau=1 is identically zero.
    """
    x = _array(xs, min_len=2)
    if np.any(x <= 0):
        raise InputError("hill_curve needs strictly positive data")
    lx = np.log(_upper_order_stats(x))
    lx = lx - lx[0]  # centring keeps tied data exactly at zero
    tau = np.arange(1, x.size + 1)
    est = np.cumsum(lx) / tau - lx
    sel = slice(1, x.size - 1)
    return DiagnosticSeries("hill", tau[sel], est[sel])


def pickands_curve(xs) -> DiagnosticSeries:
    """Pickands estimates ``log((X_t - X_2t)/(X_2t - X_4t)) / ln 2`` for ``t <= n/4``.

    ``X_k`` is the k-th largest value. Values of ``tau`` where either spacing
    is zero are left out and listed in ``meta['omitted_tau']``.
    """
    x = _array(xs)
    if x.size < 4:
        raise InputError("pickands_curve needs at least 4 values")
    desc = _upper_order_stats(x)
    tau = np.arange(1, x.size // 4 + 1)
    x1, x2, x4 = desc[tau - 1], desc[2 * tau - 1], desc[4 * tau - 1]
    num, den = x1 - x2, x2 - x4
    ok = (num > 0) & (den > 0)
    est = np.log(num[ok] / den[ok]) / math.log(2.0)
    return DiagnosticSeries(
        "pickands", tau[ok], est, meta={"omitted_tau": tau[~ok].tolist()}
    )


# -- dependence and exponentiality -----------------------------------------


def default_max_lag(n: int) -> int:
    return max(1, min(n - 1, int(10 * math.log10(n))))


def acf(xs, max_lag: Optional[int] = None) -> DiagnosticSeries:
    """Sample autocorrelation for lags ``0..max_lag`` with white-noise bands ``+-1.96/sqrt(n)``."""
    x = _array(xs, min_len=2)
    n = x.size
    if max_lag is None:
        max_lag = default_max_lag(n)
    if not 0 <= max_lag < n:
        raise InputError(f"max_lag must be in [0, {n - 1}]")
    if np.ptp(x) == 0:
        raise DegenerateInputError("zero sample variance")
    r = kernels.acf(x, max_lag)
    r[0] = 1.0
    b = Z95 / math.sqrt(n)
    lags = np.arange(max_lag + 1)
    return DiagnosticSeries(
        "acf", lags, r, np.full(lags.size, -b), np.full(lags.size, b), meta={"n": n}
    )


def fraction_inside_bands(series: DiagnosticSeries, skip_lag0: bool = True) -> float:
    s = slice(1, None) if skip_lag0 else slice(None)
    y, lo, hi = series.y[s], series.low[s], series.high[s]
    return float(np.mean((y >= lo) & (y <= hi)))


def exponential_qq(interarrivals) -> DiagnosticSeries:
    """Sorted interarrivals against exponential quantiles ``-ln(1 - i/(n+1))``.

    ``meta['slope']`` is the least-squares slope through the origin of data
    on quantiles, an estimate of the mean interarrival ``1/rate``;
    ``meta['r2']`` is the uncentred R^2 of that fit. Constant input sets
    ``meta['degenerate']``.
    """
    z = _array(interarrivals, "interarrivals", min_len=2)
    if np.any(z < 0):
        raise InputError("interarrivals must be >= 0")
    n = z.size
    z = np.sort(z)
    i = np.arange(1, n + 1)
    q = -np.log1p(-i / (n + 1.0))
    slope = float(np.dot(z, q) / np.dot(q, q))
    zz = float(np.dot(z, z))
    r2 = 1.0 - float(np.sum((z - slope * q) ** 2)) / zz if zz > 0 else float("nan")
    degenerate = bool(np.ptp(z) == 0)
    return DiagnosticSeries(
        "exponential_qq", z, q,
        meta={"slope": slope, "r2": r2, "degenerate": degenerate},
    )


# -- conditional tail --------------------------------------------------------


@dataclass(frozen=True)
class TailMeanResult:
    threshold: float
    mean_excess_value: float
    tail_mean: float
    tail_mad: float
    n_exceed: int


def conditional_tail_stats(xs, t: float) -> TailMeanResult:
    """Mean of values above ``t`` and their mean absolute deviation around it."""
    x = _array(xs)
    tail = x[x > t]
    if tail.size == 0:
        raise EmptyTailError(f"no observation exceeds {t}")
    m = float(np.mean(tail))
    return TailMeanResult(
        threshold=float(t),
        mean_excess_value=m - float(t),
        tail_mean=m,
        tail_mad=float(np.mean(np.abs(tail - m))),
        n_exceed=int(tail.size),
    )


def mef_linear_onset(series: DiagnosticSeries, min_points: int = 10, r2: float = 0.9):
    """Smallest threshold from which the mean excess curve is close to linear.

    Candidates are 20 evenly spaced ranks of the curve; a candidate is
    accepted when a straight-line fit over the points at or above it has
    R^2 >= ``r2``. Returns ``None`` when no candidate qualifies.
    """
    t, e = series.x, series.y
    if t.size < min_points:
        return None
    for start in np.unique(np.linspace(0, t.size - min_points, 20).astype(int)):
        tt, ee = t[start:], e[start:]
        if np.ptp(tt) == 0:
            continue
        slope, icpt = np.polyfit(tt, ee, 1)
        resid = ee - (slope * tt + icpt)
        ss = float(np.sum((ee - ee.mean()) ** 2))
        fit = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 0.0
        if fit >= r2 and slope > 0:
            return {"threshold": float(tt[0]), "slope": float(slope), "r2": fit}
    return None

