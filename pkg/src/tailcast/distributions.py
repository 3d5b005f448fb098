"""Closed-form probability functions: GEV, GPD, exponential, Poisson, Gamma
and the Gamma-Poisson (negative binomial) predictive mixture.

Functions accept scalars or array-likes where it makes sense and return a
plain ``float`` for scalar input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InputError, ParameterError

# Below this |xi| the exponential / Gumbel limit is used.
XI_ZERO = 1e-12


def _finite(name, value):
    if not math.isfinite(value):
        raise InputError(f"{name} must be finite, got {value!r}")


def _out(values, scalar):
    return float(values) if scalar else values


@dataclass(frozen=True)
class GevParams:
    """Shape of the generalized extreme value family.

    ``xi > 0`` is Frechet with ``alpha = 1/xi``, ``xi < 0`` is Weibull with
    ``alpha = -1/xi`` and ``xi == 0`` is Gumbel.
    """

    xi: float

    def __post_init__(self):
        _finite("xi", self.xi)

    @property
    def family(self) -> str:
        if abs(self.xi) < XI_ZERO:
            return "gumbel"
        return "frechet" if self.xi > 0 else "weibull"

    @property
    def alpha(self) -> float:
        if abs(self.xi) < XI_ZERO:
            return math.inf
        return 1.0 / abs(self.xi)


@dataclass(frozen=True)
class GpdParams:
    """Generalized Pareto shape ``xi``, scale ``beta`` and threshold ``t``."""

    xi: float
    beta: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("xi", "beta", "t"):
            _finite(name, getattr(self, name))
        if self.beta <= 0:
            raise ParameterError(f"beta must be > 0, got {self.beta!r}")

    @property
    def upper_endpoint(self) -> float:
        if self.xi < 0:
            return self.t - self.beta / self.xi
        return math.inf

    def mean(self) -> float:
        if self.xi >= 1:
            return math.inf
        return self.t + self.beta / (1.0 - self.xi)


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution with shape ``alpha`` and rate ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterError(f"alpha must be finite and > 0, got {self.alpha!r}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ParameterError(f"beta must be finite and > 0, got {self.beta!r}")


@dataclass(frozen=True)
class PoissonCount:
    """Poisson count over a window: ``rate`` events per unit time, ``horizon`` units."""

    rate: float
    horizon: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ParameterError(f"rate must be > 0, got {self.rate!r}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ParameterError(f"horizon must be > 0, got {self.horizon!r}")

    @property
    def mean(self) -> float:
        return self.rate * self.horizon


def gev_cdf(p: GevParams, x):
    """GEV distribution function H_xi(x).

    Outside the support (``1 + xi*x <= 0``) the limit is returned: 0 below
    the Frechet lower endpoint, 1 above the Weibull upper endpoint.
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InputError("x must be finite")
    xi = p.xi
    if abs(xi) < XI_ZERO:
        return _out(np.exp(-np.exp(-x)), scalar)
    z = 1.0 + xi * x
    inside = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.exp(-np.power(np.where(inside, z, 1.0), -1.0 / xi))
    outside_val = 0.0 if xi > 0 else 1.0
    return _out(np.where(inside, val, outside_val), scalar)


def frechet_tail(alpha: float, x):
    """Survival function 1 - exp(-x**-alpha) of the standard Frechet law."""
    if not (math.isfinite(alpha) and alpha > 0):
        raise ParameterError(f"alpha must be > 0, got {alpha!r}")
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise InputError("frechet_tail requires finite x > 0")
    return _out(-np.expm1(-np.power(x, -alpha)), scalar)


def gpd_logsf(p: GpdParams, x):
    """Log survival function of the GPD; ``-inf`` beyond a finite upper endpoint."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    a = np.maximum(x - p.t, 0.0) / p.beta
    if abs(p.xi) < XI_ZERO:
        return _out(-a, scalar)
    w = p.xi * a
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(w > -1.0, -np.log1p(np.maximum(w, -1.0 + 1e-300)) / p.xi, -np.inf)
    return _out(out, scalar)


def gpd_cdf(p: GpdParams, x):
    """GPD distribution function; 0 below the threshold."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise InputError("x must not be NaN")
    out = -np.expm1(gpd_logsf(p, x))
    return _out(np.where(x <= p.t, 0.0, out), scalar)


def gpd_pdf(p: GpdParams, x):
    """GPD density; 0 outside the support."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    a = (x - p.t) / p.beta
    inside = a >= 0
    if p.xi < 0:
        inside &= a <= -1.0 / p.xi
    if abs(p.xi) < XI_ZERO:
        logd = -a
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            logd = -(1.0 + 1.0 / p.xi) * np.log1p(p.xi * np.where(inside, a, 0.0))
    out = np.where(inside, np.exp(logd) / p.beta, 0.0)
    return _out(out, scalar)


def gpd_quantile(p: GpdParams, q):
    """Inverse of :func:`gpd_cdf` for ``0 <= q < 1``."""
    scalar = np.ndim(q) == 0
    q = np.asarray(q, dtype=float)
    if np.any(~(q >= 0) | ~(q < 1)):
        raise InputError("quantile level must lie in [0, 1)")
    nl = -np.log1p(-q)  # -log(1-q) >= 0
    if abs(p.xi) < XI_ZERO:
        out = p.t + p.beta * nl
    else:
        out = p.t + p.beta * np.expm1(p.xi * nl) / p.xi
    return _out(out, scalar)


def gpd_sample(p: GpdParams, n: int, seed) -> np.ndarray:
    """Draw ``n`` GPD variates by inversion.

    ``seed`` may be an int, a :class:`numpy.random.SeedSequence` or a
    :class:`numpy.random.Generator`; equal seeds give identical draws.
    """
    if int(n) != n or n < 1:
        raise InputError(f"n must be a positive integer, got {n!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = rng.random(int(n))
    return gpd_quantile(p, u)


def gpd_moment_exists(p: GpdParams, order: int) -> bool:
    """True iff the moment of the given order is finite, i.e. ``xi < 1/order``."""
    if order < 1:
        raise InputError("order must be >= 1")
    return p.xi < 1.0 / order


def exp_tail(rate: float, theta):
    """Pr(interarrival > theta) = exp(-rate * theta)."""
    if not (math.isfinite(rate) and rate > 0):
        raise ParameterError(f"rate must be > 0, got {rate!r}")
    scalar = np.ndim(theta) == 0
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta >= 0)):
        raise InputError("theta must be >= 0")
    return _out(np.exp(-rate * theta), scalar)


def _check_counts(n):
    n = np.asarray(n)
    if np.any(n < 0) or np.any(n != np.floor(n)):
        raise InputError("counts must be nonnegative integers")
    return n.astype(float)


def poisson_logpmf(pc: PoissonCount, n):
    scalar = np.ndim(n) == 0
    k = _check_counts(n)
    mu = pc.mean
    return _out(k * math.log(mu) - mu - gammaln(k + 1.0), scalar)


def poisson_pmf(pc: PoissonCount, n):
    """Pr(N(horizon) = n) for a homogeneous Poisson process."""
    scalar = np.ndim(n) == 0
    return _out(np.exp(poisson_logpmf(pc, n)), scalar)


def gamma_summary(g: GammaParams) -> tuple[float, float]:
    """Mean ``alpha/beta`` and variance ``alpha/beta**2``."""
    return g.alpha / g.beta, g.alpha / g.beta**2


def gamma_logpdf(g: GammaParams, lam):
    scalar = np.ndim(lam) == 0
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (
            g.alpha * math.log(g.beta)
            - math.lgamma(g.alpha)
            + (g.alpha - 1.0) * np.log(lam)
            - g.beta * lam
        )
        if g.alpha == 1.0:
            out = np.where(lam >= 0, math.log(g.beta) - g.beta * lam, -np.inf)
    out = np.where(lam < 0, -np.inf, out)
    return _out(out, scalar)


def gamma_pdf(g: GammaParams, lam):
    """Gamma density with shape ``alpha`` and rate ``beta``."""
    scalar = np.ndim(lam) == 0
    return _out(np.exp(gamma_logpdf(g, lam)), scalar)


def negbinom_logpmf(g: GammaParams, theta: float, n):
    scalar = np.ndim(n) == 0
    if not (math.isfinite(theta) and theta > 0):
        raise InputError(f"theta must be > 0, got {theta!r}")
    k = _check_counts(n)
    a, b = g.alpha, g.beta
    log_coef = gammaln(k + a) - gammaln(a) - gammaln(k + 1.0)
    log_p = math.log(b) - math.log(b + theta)
    log_q = math.log(theta) - math.log(b + theta)
    return _out(log_coef + a * log_p + k * log_q, scalar)


def negbinom_pmf(g: GammaParams, theta: float, n):
    """Gamma-Poisson predictive: integral of Poisson(n; lam*theta) against Gamma(lam; g).

    Equals C(n+alpha-1, n) (beta/(beta+theta))**alpha (theta/(beta+theta))**n
    with the Gamma-function binomial coefficient, evaluated in log space.
    """
    scalar = np.ndim(n) == 0
    return _out(np.exp(negbinom_logpmf(g, theta, n)), scalar)


def negbinom_mean(g: GammaParams, theta: float) -> float:
    return g.alpha * theta / g.beta


def negbinom_var(g: GammaParams, theta: float) -> float:
    m = g.alpha * theta / g.beta
    return m * (1.0 + theta / g.beta)
