"""Conjugate Gamma-Poisson forecasting of exceedance counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import DiagnosticSeries
from .distributions import (
    GammaParams,
    gamma_pdf,
    gamma_summary,
    negbinom_mean,
    negbinom_pmf,
    negbinom_var,
)
from .errors import InputError, InsufficientDataError
from .jsonio import dumps
from .process import ExceedanceProcess

PMF_COVERAGE = 1.0 - 1e-6
CAP_SD = 50.0
CREDIBLE = 0.90


@dataclass(frozen=True)
class GammaPosterior:
    params: GammaParams
    n_updates: int = 0
    provenance: str = "prior"

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def beta(self) -> float:
        return self.params.beta

    @property
    def mean(self) -> float:
        return gamma_summary(self.params)[0]

    @property
    def variance(self) -> float:
        return gamma_summary(self.params)[1]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "mean": self.mean,
            "variance": self.variance,
            "n_updates": self.n_updates,
            "provenance": self.provenance,
        }


def prior_from_interarrivals(interarrivals) -> GammaPosterior:
    """Gamma(n, sum z) so that the prior mean waiting time equals the sample mean."""
    z = np.asarray(interarrivals, dtype=float).ravel()
    if z.size < 2:
        raise InsufficientDataError(f"need at least 2 interarrivals, got {z.size}")
    return GammaPosterior(GammaParams(float(z.size), float(np.sum(z))), 0, "prior")


def prior_from_process(p: ExceedanceProcess) -> GammaPosterior:
    return prior_from_interarrivals(p.interarrivals)


def update(g: GammaPosterior, new_interarrivals) -> GammaPosterior:
    """Posterior Gamma(alpha + k, beta + sum z) after ``k`` new interarrivals."""
    z = np.asarray(new_interarrivals, dtype=float).ravel()
    if z.size == 0:
        return g
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise InputError("new interarrivals must be finite and > 0")
    params = GammaParams(g.alpha + z.size, g.beta + float(np.sum(z)))
    return GammaPosterior(params, g.n_updates + int(z.size), "updated")


def mean_waiting_time(g: GammaPosterior) -> float:
    """beta/alpha, the reciprocal of the posterior mean rate."""
    return g.beta / g.alpha


@dataclass(frozen=True, eq=False)
class ForecastResult:
    horizon_days: float
    predictive_mean: float
    predictive_var: float
    counts: np.ndarray
    probabilities: np.ndarray
    credible_90: tuple[int, int]

    @property
    def predictive_pmf(self) -> list[tuple[int, float]]:
        return list(zip(self.counts.tolist(), self.probabilities.tolist()))

    def pmf_csv(self) -> str:
        lines = ["n,probability"]
        lines += [f"{n},{p:.17g}" for n, p in zip(self.counts, self.probabilities)]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "horizon_days": self.horizon_days,
            "predictive_mean": self.predictive_mean,
            "predictive_var": self.predictive_var,
            "credible_90": list(self.credible_90),
            "pmf": self.probabilities.tolist(),
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())


def forecast(g: GammaPosterior, theta_days: float) -> ForecastResult:
    """Posterior predictive distribution of the count over ``theta_days``.

    The pmf runs from 0 until its cumulative mass reaches 1 - 1e-6 and the
    omitted tail holds less than 1e-6 of the mean (hard cap at mean + 50 sd).
    The 90% interval is equal-tailed: 5% of mass or less lies strictly below
    and strictly above it.
    """
    if not (math.isfinite(theta_days) and theta_days > 0):
        raise InputError("theta_days must be > 0")
    mean = negbinom_mean(g.params, theta_days)
    var = negbinom_var(g.params, theta_days)
    cap = int(math.ceil(mean + CAP_SD * math.sqrt(var)))
    n = np.arange(cap + 1)
    pmf = negbinom_pmf(g.params, theta_days, n)
    cdf = np.cumsum(pmf)
    # keep going until the dropped tail also carries < 1e-6 of the mean
    missing_mean = mean - np.cumsum(n * pmf)
    done = (cdf >= PMF_COVERAGE) & (missing_mean <= (1.0 - PMF_COVERAGE) * mean)
    hit = np.nonzero(done)[0]
    last = int(hit[0]) if hit.size else cap
    n, pmf, cdf = n[: last + 1], pmf[: last + 1], cdf[: last + 1]
    tail = (1.0 - CREDIBLE) / 2.0
    low = int(np.nonzero(cdf > tail)[0][0])
    high_idx = np.nonzero(cdf >= 1.0 - tail)[0]
    high = int(high_idx[0]) if high_idx.size else last
    return ForecastResult(float(theta_days), mean, var, n, pmf, (low, high))


def posterior_density_series(g: GammaPosterior, grid=None, name: str = "posterior_density") -> DiagnosticSeries:
    """Gamma density of the rate on ``grid``; ``meta['mean']`` marks the mean.

    Without a grid, 400 evenly spaced points span (0, mean + 8 sd].
    """
    if grid is None:
        hi = g.mean + 8.0 * math.sqrt(g.variance)
        grid = np.linspace(hi / 400.0, hi, 400)
    lam = np.asarray(grid, dtype=float).ravel()
    if lam.size == 0 or np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise InputError("grid points must be finite and > 0")
    if np.any(np.diff(lam) <= 0):
        raise InputError("grid must be strictly increasing")
    dens = gamma_pdf(g.params, lam)
    return DiagnosticSeries(
        name, lam, dens,
        meta={"mean": g.mean, "alpha": g.alpha, "beta": g.beta},
    )

