"""Homogeneous Poisson process view of threshold exceedances."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .diagnostics import DiagnosticSeries, acf, default_max_lag, exponential_qq
from .errors import DegenerateInputError, InputError, InsufficientDataError
from .ingest import SECONDS_PER_DAY, EventSeries
from .jsonio import dumps

logger = logging.getLogger(__name__)

MIN_ACF_INTERARRIVALS = 10


@dataclass(frozen=True, eq=False)
class ExceedanceProcess:
    threshold: float
    event_times: np.ndarray
    interarrivals: np.ndarray  # days
    rate_hat: float  # events per day
    survival_hat: float  # mean interarrival in days

    @property
    def n_events(self) -> int:
        return int(self.event_times.size)

    @property
    def n_interarrivals(self) -> int:
        return int(self.interarrivals.size)

    @property
    def zero_interarrivals(self) -> int:
        """Number of simultaneous exceedances (interarrival exactly 0)."""
        return int(np.sum(self.interarrivals == 0))

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "n_events": self.n_events,
            "n_interarrivals": self.n_interarrivals,
            "zero_interarrivals": self.zero_interarrivals,
            "total_days": float(np.sum(self.interarrivals)),
            "survival_hat": self.survival_hat,
            "rate_hat": self.rate_hat,
            "interarrivals": self.interarrivals.tolist(),
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())


def process_from_interarrivals(interarrivals, threshold: float = math.nan, event_times=None):
    """Build an :class:`ExceedanceProcess` straight from interarrival days."""
    z = np.array(interarrivals, dtype=float).ravel()
    if z.size < 1:
        raise InsufficientDataError("need at least 2 exceedances (1 interarrival)")
    if np.any(z < 0) or not np.all(np.isfinite(z)):
        raise DegenerateInputError("interarrivals must be finite and >= 0")
    total = float(np.sum(z))
    if total <= 0:
        raise DegenerateInputError("all exceedances are simultaneous")
    if event_times is None:
        event_times = np.concatenate([[0.0], np.cumsum(z) * SECONDS_PER_DAY])
    z.setflags(write=False)
    times = np.array(event_times, dtype=float)
    times.setflags(write=False)
    return ExceedanceProcess(
        threshold=float(threshold),
        event_times=times,
        interarrivals=z,
        rate_hat=z.size / total,
        survival_hat=total / z.size,
    )


def build_process(series: EventSeries, t: float) -> ExceedanceProcess:
    """Exceedance times of ``t`` and their interarrivals in fractional days.

    The survival parameter is the mean interarrival and the rate its
    reciprocal ``n / sum(z)``. Simultaneous exceedances give zero
    interarrivals, which are kept and counted in ``zero_interarrivals``.
    """
    times = series.timestamps[series.magnitudes > t]
    if times.size < 2:
        raise InsufficientDataError(
            f"{times.size} event(s) exceed {t:g}; need at least 2"
        )
    z = np.diff(times) / SECONDS_PER_DAY
    proc = process_from_interarrivals(z, t, times)
    if proc.zero_interarrivals:
        logger.warning("%d simultaneous exceedances above %g", proc.zero_interarrivals, t)
    return proc


def expected_count(p: ExceedanceProcess, theta_days: float) -> float:
    """E[N(theta)] = rate * theta."""
    if not theta_days > 0:
        raise InputError("theta_days must be > 0")
    return p.rate_hat * theta_days


class IidChecks(NamedTuple):
    qq: DiagnosticSeries
    acf: Optional[DiagnosticSeries]


def iid_checks(p: ExceedanceProcess, max_lag: Optional[int] = None) -> IidChecks:
    """Exponential Q-Q and autocorrelogram of the interarrivals.

    The ACF is only computed with at least 10 interarrivals; below that
    ``acf`` is ``None``.
    """
    z = p.interarrivals
    qq = exponential_qq(z)
    if z.size < MIN_ACF_INTERARRIVALS:
        logger.info("acf skipped: %d interarrivals", z.size)
        return IidChecks(qq, None)
    return IidChecks(qq, acf(z, default_max_lag(z.size) if max_lag is None else max_lag))


def exceedance_counts(series: EventSeries, thresholds) -> np.ndarray:
    """Number of events above each threshold."""
    m = np.sort(series.magnitudes)
    return m.size - np.searchsorted(m, np.asarray(thresholds, dtype=float), side="right")
