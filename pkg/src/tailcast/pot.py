"""Peaks-over-threshold inference.

GPD maximum likelihood with observed-information standard errors,
threshold stability scans and a parametric-bootstrap Anderson-Darling
goodness-of-fit test.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from . import kernels
from .distributions import GpdParams, gpd_sample
from .errors import DegenerateInputError, FitError, GofError, InputError, InsufficientDataError
from .jsonio import dumps

logger = logging.getLogger(__name__)

MIN_EXCEED_FIT = 10
MIN_EXCEED_GOF = 20
MIN_BOOT = 99
GRAD_TOL = 1e-8
MAX_ITER = 500
# xi <= -1/2: ML is not consistent
CONSISTENCY_XI = -0.5


@dataclass(frozen=True)
class GpdFit:
    threshold: float
    xi_hat: float
    beta_hat: float
    se_xi: float
    se_beta: float
    n_exceed: int
    loglik: float
    converged: bool
    n_iter: int = 0
    grad_norm: float = 0.0

    @property
    def consistent(self) -> bool:
        """False when ``xi_hat <= -0.5``, where ML loses consistency."""
        return self.xi_hat > CONSISTENCY_XI

    @property
    def params(self) -> GpdParams:
        return GpdParams(self.xi_hat, self.beta_hat, self.threshold)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["consistent"] = self.consistent
        return d


def exceedances(xs, t: float) -> np.ndarray:
    """Values strictly above ``t``, in their original order."""
    x = np.asarray(xs, dtype=float).ravel()
    return x[x > t]


def _excesses(exc, t, min_n):
    x = np.asarray(exc, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise InputError("exceedances must be finite")
    if not math.isfinite(t):
        raise InputError("threshold must be finite")
    if np.any(x <= t):
        raise InputError("every exceedance must lie strictly above the threshold")
    if x.size < min_n:
        raise InsufficientDataError(f"need at least {min_n} exceedances, got {x.size}")
    return x - t


# -- likelihood ----------------------------------------------------------------


def _nll(y, xi, eta, order):
    """Mean negative log-likelihood in (xi, eta=log beta) and its derivatives."""
    n = y.size
    nll, g, h = kernels.gpd_nll_derivs(y * math.exp(-eta), xi, order)
    if not math.isfinite(nll):
        return math.inf, None, None
    f = nll / n + eta
    if g is not None:
        g = g / n
        g[1] += 1.0
    if h is not None:
        h = h / n
    return f, g, h


def gpd_loglik(exc, t: float, xi: float, beta: float, grad: bool = False):
    """GPD log-likelihood of exceedances ``exc`` over ``t``.

    With ``grad=True`` returns ``(loglik, array([d/dxi, d/dbeta]))``.
    Infeasible parameters give ``-inf``.
    """
    y = np.asarray(exc, dtype=float) - t
    if beta <= 0:
        return (-math.inf, None) if grad else -math.inf
    n = y.size
    f, g, _ = _nll(y, xi, math.log(beta), 1 if grad else 0)
    ll = -n * f
    if not grad:
        return ll
    if g is None:
        return -math.inf, None
    return ll, np.array([-n * g[0], -n * g[1] / beta])


# -- optimizer -----------------------------------------------------------------


def pwm_start(y: np.ndarray) -> tuple[float, float]:
    """Probability-weighted-moment estimates of (xi, beta) from excesses ``y``.

    Falls back to ``(0.1, mean(y))`` when the moments give an unusable or
    infeasible start.
    """
    ys = np.sort(y)
    n = ys.size
    p = (np.arange(1, n + 1) - 0.35) / n
    a0 = float(np.mean(ys))
    a1 = float(np.mean((1.0 - p) * ys))
    d = a0 - 2.0 * a1
    fallback = (0.1, a0)
    if not d > 0:
        return fallback
    xi = 2.0 - a0 / d
    beta = 2.0 * a0 * a1 / d
    if not (math.isfinite(xi) and math.isfinite(beta) and beta > 0):
        return fallback
    xi = min(xi, 0.95)
    if 1.0 + xi * ys[-1] / beta <= 0:
        return fallback
    return xi, beta


def _inv_pd(h):
    try:
        c = np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        return None
    ci = np.linalg.inv(c)
    return ci.T @ ci


def _minimize(y, x0, fixed_xi=None):
    """BFGS with Armijo backtracking; the barrier is ``f = inf`` off the feasible set.

    The inverse-Hessian estimate is seeded (and reset on loss of descent)
    from the analytic Hessian when it is positive definite.
    """
    if fixed_xi is not None:
        return _minimize_eta(y, fixed_xi, x0[1])
    x = np.array(x0, dtype=float)
    f, g, h = _nll(y, x[0], x[1], 2)
    if not math.isfinite(f):
        raise FitError("starting point is infeasible")
    hinv = _inv_pd(h)
    if hinv is None:
        hinv = np.eye(2)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        if np.max(np.abs(g)) < GRAD_TOL:
            converged = True
            break
        d = -hinv @ g
        slope = float(g @ d)
        if not slope < 0:
            hinv = np.eye(2)
            d, slope = -g, -float(g @ g)
        # keep single steps modest; eta moves on a log scale
        scale = max(abs(d[0]) / 1.0, abs(d[1]) / 2.0, 1.0)
        d = d / scale
        slope /= scale
        step = 1.0
        accepted = False
        while step > 1e-14:
            xn = x + step * d
            fn, gn, hn = _nll(y, xn[0], xn[1], 2)
            if math.isfinite(fn):
                if fn <= f + 1e-4 * step * slope:
                    accepted = True
                elif fn <= f + 1e-13 * max(1.0, abs(f)) and np.max(np.abs(gn)) < np.max(np.abs(g)):
                    # roundoff floor near the optimum: accept if the gradient shrinks
                    accepted = True
            if accepted:
                break
            step *= 0.5
        if not accepted:
            break
        s = xn - x
        yv = gn - g
        x, f, g, h = xn, fn, gn, hn
        sy = float(s @ yv)
        if sy > 1e-16:
            rho = 1.0 / sy
            eye = np.eye(2)
            hinv = (eye - rho * np.outer(s, yv)) @ hinv @ (eye - rho * np.outer(yv, s)) + rho * np.outer(s, s)
        else:
            fresh = _inv_pd(h)
            hinv = fresh if fresh is not None else np.eye(2)
    else:
        converged = bool(np.max(np.abs(g)) < GRAD_TOL)
    return x, f, g, h, converged, it


def _minimize_eta(y, xi, eta0):
    eta = float(eta0)
    f, g, h = _nll(y, xi, eta, 2)
    if not math.isfinite(f):
        raise FitError("starting point is infeasible")
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        if abs(g[1]) < GRAD_TOL:
            converged = True
            break
        d = -g[1] / h[1, 1] if h[1, 1] > 0 else -g[1]
        d = max(min(d, 2.0), -2.0)
        step = 1.0
        while step > 1e-14:
            fn, gn, hn = _nll(y, xi, eta + step * d, 2)
            if math.isfinite(fn) and (fn <= f + 1e-4 * step * d * g[1] or (
                fn <= f + 1e-13 * max(1.0, abs(f)) and abs(gn[1]) < abs(g[1])
            )):
                break
            step *= 0.5
        else:
            break
        eta, f, g, h = eta + step * d, fn, gn, hn
    return np.array([xi, eta]), f, g, h, converged, it


def gpd_mle(exc, t: float, fix_xi: Optional[float] = None, raise_on_failure: bool = True) -> GpdFit:
    """Maximum likelihood GPD fit to exceedances ``exc`` (values above ``t``).

    Standard errors come from the inverse observed information. With
    ``fix_xi`` only the scale is estimated and ``se_xi`` is 0.

    Raises :class:`FitError` (carrying the best iterate as ``.fit``) when the
    optimizer does not reach ``|grad|_inf < 1e-8`` within 500 iterations,
    unless ``raise_on_failure`` is false, in which case the unconverged fit
    is returned with ``converged=False``.
    """
    y = _excesses(exc, t, MIN_EXCEED_FIT)
    n = y.size
    if fix_xi is None:
        xi0, beta0 = pwm_start(y)
    else:
        xi0, beta0 = float(fix_xi), float(np.mean(y))
        if 1.0 + xi0 * y.max() / beta0 <= 0:
            beta0 = -xi0 * y.max() * 1.5
    if not beta0 > 0:
        raise DegenerateInputError("all excesses are zero")
    x, f, g, h, converged, it = _minimize(y, (xi0, math.log(beta0)), fix_xi)
    xi, beta = float(x[0]), math.exp(x[1])

    se_xi = se_beta = math.nan
    if fix_xi is None:
        cov = _inv_pd(h * n)
        if cov is None:
            converged = False
        else:
            se_xi = math.sqrt(cov[0, 0])
            se_beta = beta * math.sqrt(cov[1, 1])
    else:
        if h[1, 1] > 0:
            se_xi = 0.0
            se_beta = beta / math.sqrt(h[1, 1] * n)
        else:
            converged = False
    grad_norm = float(np.max(np.abs(g))) if fix_xi is None else abs(float(g[1]))
    fit = GpdFit(
        threshold=float(t),
        xi_hat=xi,
        beta_hat=beta,
        se_xi=se_xi,
        se_beta=se_beta,
        n_exceed=int(n),
        loglik=float(-n * f),
        converged=bool(converged),
        n_iter=int(it),
        grad_norm=grad_norm,
    )
    if not fit.converged and raise_on_failure:
        raise FitError(
            f"GPD likelihood did not converge at threshold {t} "
            f"(|grad|={grad_norm:.3g} after {it} iterations)",
            fit,
        )
    return fit


# -- threshold scan ------------------------------------------------------------


@dataclass(frozen=True)
class ScanWarning:
    threshold: float
    n_exceed: int
    message: str

    def to_dict(self):
        return asdict(self)


@dataclass
class StabilityTable:
    """Rows of a threshold scan: a :class:`GpdFit` or a :class:`ScanWarning` per threshold."""

    rows: list = field(default_factory=list)

    @property
    def fits(self) -> list[GpdFit]:
        return [r for r in self.rows if isinstance(r, GpdFit)]

    @property
    def warnings(self) -> list[ScanWarning]:
        return [r for r in self.rows if isinstance(r, ScanWarning)]

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def to_csv(self) -> str:
        lines = ["threshold,xi,se_xi,beta,se_beta,n_exceed,converged"]
        for r in self.fits:
            lines.append(
                f"{r.threshold:.17g},{r.xi_hat:.17g},{r.se_xi:.17g},{r.beta_hat:.17g},"
                f"{r.se_beta:.17g},{r.n_exceed},{str(r.converged).lower()}"
            )
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "fits": [r.to_dict() for r in self.fits],
            "warnings": [w.to_dict() for w in self.warnings],
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def xi_spread(self) -> tuple[float, float]:
        """Range of ``xi_hat`` across converged fits and the pooled standard error.

        The pooled error is the root mean square of the per-threshold ``se_xi``.
        """
        fits = [f for f in self.fits if f.converged]
        if not fits:
            return math.nan, math.nan
        xis = np.array([f.xi_hat for f in fits])
        ses = np.array([f.se_xi for f in fits])
        return float(np.ptp(xis)), float(np.sqrt(np.mean(ses**2)))


def threshold_scan(xs, thresholds) -> StabilityTable:
    """Fit the GPD at each threshold.

    Thresholds leaving fewer than 10 exceedances become warning rows; fits
    that fail to converge are kept with ``converged=False``.
    """
    x = np.asarray(xs, dtype=float).ravel()
    ts = [float(t) for t in thresholds]
    if not ts:
        raise InputError("no thresholds given")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise InputError("thresholds must be strictly increasing")
    table = StabilityTable()
    for t in ts:
        exc = exceedances(x, t)
        if exc.size < MIN_EXCEED_FIT:
            msg = f"only {exc.size} exceedances above {t:g}; need {MIN_EXCEED_FIT}"
            logger.warning(msg)
            table.rows.append(ScanWarning(t, int(exc.size), msg))
            continue
        table.rows.append(gpd_mle(exc, t, raise_on_failure=False))
    return table


# -- goodness of fit -------------------------------------------------------------


@dataclass(frozen=True)
class GofResult:
    statistic: float
    p_value: float
    n_boot: int
    seed: int
    n_failed: int = 0
    fit: Optional[GpdFit] = None

    def to_dict(self) -> dict:
        d = {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n_boot": self.n_boot,
            "seed": self.seed,
            "n_failed": self.n_failed,
        }
        if self.fit is not None:
            d["fit"] = self.fit.to_dict()
        return d


def anderson_darling(exc, fit: Union[GpdFit, GpdParams]) -> float:
    """A^2 of exceedances against a fitted GPD."""
    p = fit.params if isinstance(fit, GpdFit) else fit
    a = np.sort((np.asarray(exc, dtype=float) - p.t) / p.beta)
    return kernels.gpd_ad_statistic(a, p.xi)


def _replicate(params: GpdParams, n: int, seed_seq) -> Optional[float]:
    sample = gpd_sample(params, n, np.random.default_rng(seed_seq))
    # inversion can land exactly on the threshold for tiny quantiles
    sample = np.maximum(sample, np.nextafter(params.t, math.inf))
    try:
        refit = gpd_mle(sample, params.t)
    except (FitError, InsufficientDataError, InputError):
        return None
    return anderson_darling(sample, refit)


def bootstrap_gof(exc, t: float, n_boot: int = 199, seed: int = 0, workers: int = 1) -> GofResult:
    """Parametric-bootstrap Anderson-Darling test of the GPD fit.

    Each replicate draws from the fitted GPD with its own child of
    ``SeedSequence(seed)`` and is refitted, so results do not depend on
    ``workers``. ``p = (1 + #{A2_boot >= A2_obs}) / (n_ok + 1)`` where
    ``n_ok`` counts replicates whose refit converged.
    """
    if int(n_boot) != n_boot or n_boot < MIN_BOOT:
        raise InputError(f"n_boot must be an integer >= {MIN_BOOT}")
    _excesses(exc, t, MIN_EXCEED_GOF)
    exc = np.asarray(exc, dtype=float).ravel()
    fit = gpd_mle(exc, t)
    a_obs = anderson_darling(exc, fit)
    params = fit.params
    children = np.random.SeedSequence(seed).spawn(int(n_boot))
    n = exc.size
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(lambda s: _replicate(params, n, s), children))
    else:
        stats = [_replicate(params, n, s) for s in children]
    ok = np.array([s for s in stats if s is not None])
    n_failed = len(stats) - ok.size
    if n_failed > 0.1 * n_boot:
        raise GofError(f"{n_failed} of {n_boot} bootstrap refits failed")
    p = (1.0 + float(np.sum(ok >= a_obs))) / (ok.size + 1.0)
    return GofResult(float(a_obs), p, int(n_boot), int(seed), int(n_failed), fit)
