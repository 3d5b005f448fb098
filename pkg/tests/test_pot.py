import json
import math

import numpy as np
import pytest
from scipy import stats

from tailcast import pot
from tailcast.distributions import GpdParams, gpd_sample
from tailcast.errors import FitError, GofError, InputError, InsufficientDataError
from tailcast.pot import (
    GpdFit,
    ScanWarning,
    anderson_darling,
    bootstrap_gof,
    exceedances,
    gpd_loglik,
    gpd_mle,
    threshold_scan,
)


def sample(xi, beta, t, n, seed):
    return gpd_sample(GpdParams(xi, beta, t), n, seed)


# -- exceedances -------------------------------------------------------------------


def test_exceedances_strict():
    assert exceedances([1, 2, 3], 2).tolist() == [3.0]


def test_exceedances_keep_order():
    assert exceedances([3, 1, 2], 0).tolist() == [3.0, 1.0, 2.0]


def test_exceedances_may_be_empty():
    assert exceedances([1, 2], 5).size == 0


# -- likelihood ---------------------------------------------------------------------


def test_loglik_matches_scipy():
    x = sample(0.4, 3.0, 10.0, 300, 1)
    for xi, beta in [(0.4, 3.0), (0.0, 2.0), (-0.1, 5.0), (1e-8, 3.0)]:
        ref = np.sum(stats.genpareto.logpdf(x, xi, loc=10.0, scale=beta))
        assert gpd_loglik(x, 10.0, xi, beta) == pytest.approx(ref, rel=1e-10)


def test_loglik_infeasible():
    x = np.array([11.0, 20.0])
    assert gpd_loglik(x, 10.0, -0.5, 1.0) == -math.inf
    assert gpd_loglik(x, 10.0, 0.1, -1.0) == -math.inf


def test_gradient_matches_finite_differences():
    x = sample(0.5, 2.0, 0.0, 400, 2)
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 50:
        xi, beta = rng.uniform(-0.3, 1.5), rng.uniform(0.5, 8.0)
        if np.any(1 + xi * x / beta <= 0.01):
            continue
        ll, g = gpd_loglik(x, 0.0, xi, beta, grad=True)
        hx, hb = 1e-6, 1e-6 * beta
        fd = np.array([
            (gpd_loglik(x, 0.0, xi + hx, beta) - gpd_loglik(x, 0.0, xi - hx, beta)) / (2 * hx),
            (gpd_loglik(x, 0.0, xi, beta + hb) - gpd_loglik(x, 0.0, xi, beta - hb)) / (2 * hb),
        ])
        scale = np.array([1.0, 1.0 / beta]) * x.size
        assert np.all(np.abs(g - fd) <= 1e-5 * np.maximum(np.abs(fd), scale)), (xi, beta, g, fd)
        checked += 1


# -- gpd_mle -----------------------------------------------------------------------


def test_mle_fixed_xi_zero_equal_excesses():
    d = 3.5
    fit = gpd_mle(np.full(25, 10.0 + d), 10.0, fix_xi=0.0)
    assert fit.beta_hat == pytest.approx(d, rel=1e-10)
    assert fit.xi_hat == 0.0 and fit.se_xi == 0.0


def test_mle_fixed_xi_zero_is_mean_excess():
    x = sample(0.0, 2.0, 1.0, 500, 4)
    fit = gpd_mle(x, 1.0, fix_xi=0.0)
    assert fit.beta_hat == pytest.approx(np.mean(x - 1.0), rel=1e-9)
    assert fit.se_beta == pytest.approx(fit.beta_hat / math.sqrt(500), rel=1e-6)


def test_mle_recovers_reference_parameters():
    x = sample(0.77, 8750.0, 1e4, 5000, 5)
    fit = gpd_mle(x, 1e4)
    assert fit.converged and fit.consistent
    assert abs(fit.xi_hat - 0.77) < 3 * fit.se_xi
    assert abs(fit.beta_hat - 8750.0) < 3 * fit.se_beta
    assert fit.n_exceed == 5000


def test_mle_recovers_exponential_boundary():
    fit = gpd_mle(sample(0.0, 1.0, 0.0, 5000, 6), 0.0)
    assert abs(fit.xi_hat) < 3 * fit.se_xi


def test_mle_matches_scipy_fit():
    x = sample(0.3, 2.0, 0.0, 2000, 7)
    fit = gpd_mle(x, 0.0)
    c, _, scale = stats.genpareto.fit(x, floc=0.0)
    assert fit.xi_hat == pytest.approx(c, abs=1e-4)
    assert fit.beta_hat == pytest.approx(scale, rel=1e-4)
    assert fit.loglik >= np.sum(stats.genpareto.logpdf(x, c, scale=scale)) - 1e-8


def test_mle_se_matches_numerical_hessian():
    x = sample(0.5, 2.0, 0.0, 1000, 8)
    fit = gpd_mle(x, 0.0)
    p0 = np.array([fit.xi_hat, fit.beta_hat])
    steps = np.array([1e-4, 1e-4 * fit.beta_hat])

    def ll(p):
        return gpd_loglik(x, 0.0, p[0], p[1])

    hess = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            ei, ej = np.eye(2)[i] * steps[i], np.eye(2)[j] * steps[j]
            hess[i, j] = (ll(p0 + ei + ej) - ll(p0 + ei - ej) - ll(p0 - ei + ej) + ll(p0 - ei - ej)) / (
                4 * steps[i] * steps[j]
            )
    cov = np.linalg.inv(-hess)
    assert fit.se_xi == pytest.approx(math.sqrt(cov[0, 0]), rel=1e-3)
    assert fit.se_beta == pytest.approx(math.sqrt(cov[1, 1]), rel=1e-3)


def test_mle_local_optimality():
    x = sample(0.6, 5.0, 2.0, 800, 9)
    fit = gpd_mle(x, 2.0)
    rng = np.random.default_rng(10)
    tried = 0
    while tried < 20:
        xi = fit.xi_hat + rng.normal(0, 0.2)
        beta = fit.beta_hat * math.exp(rng.normal(0, 0.2))
        ll = gpd_loglik(x, 2.0, xi, beta)
        if not math.isfinite(ll):
            continue
        assert fit.loglik >= ll
        tried += 1


def test_mle_scale_equivariance():
    x = sample(0.45, 1.0, 3.0, 1500, 11)
    base = gpd_mle(x, 3.0)
    for c in (1e-3, 7.0, 1e4):
        fit = gpd_mle(c * x, c * 3.0)
        assert fit.xi_hat == pytest.approx(base.xi_hat, abs=1e-6)
        assert fit.beta_hat == pytest.approx(c * base.beta_hat, rel=1e-6)


def test_se_xi_shrinks_like_inverse_root_n():
    ratios = []
    for s in range(50):
        x = sample(0.3, 1.0, 0.0, 2000, 100 + s)
        ratios.append(gpd_mle(x, 0.0).se_xi / gpd_mle(x[:1000], 0.0).se_xi)
    assert 0.6 <= np.mean(ratios) <= 0.8


def test_heavy_tails_never_flag_inconsistency():
    for s in range(20):
        xi = 0.5 + 0.5 * (s + 0.5) / 20
        fit = gpd_mle(sample(xi, 1.0, 0.0, 300, 200 + s), 0.0)
        assert fit.consistent


def test_consistency_flag():
    fit = GpdFit(0.0, -0.5, 1.0, 0.1, 0.1, 50, -10.0, True)
    assert not fit.consistent


def test_mle_insufficient_data():
    with pytest.raises(InsufficientDataError):
        gpd_mle(np.arange(1.0, 10.0), 0.0)


def test_mle_rejects_values_at_threshold():
    with pytest.raises(InputError):
        gpd_mle(np.arange(0.0, 20.0), 0.0)


def test_mle_nonconvergence_carries_best_iterate():
    with pytest.raises(FitError) as info:
        gpd_mle(np.full(30, 15.0), 10.0)
    assert info.value.fit is not None and not info.value.fit.converged
    fit = gpd_mle(np.full(30, 15.0), 10.0, raise_on_failure=False)
    assert not fit.converged


def test_fit_to_dict_is_json_ready():
    d = gpd_mle(sample(0.2, 1.0, 0.0, 100, 12), 0.0).to_dict()
    assert set(d) >= {"threshold", "xi_hat", "beta_hat", "se_xi", "se_beta", "n_exceed", "loglik", "converged"}
    json.dumps(d)


# -- threshold scan -------------------------------------------------------------------


def test_scan_threshold_stability():
    x = sample(0.75, 1.0, 0.0, 100_000, 13)
    table = threshold_scan(x, np.quantile(x, [0.5, 0.9, 0.99]))
    assert len(table.fits) == 3
    for fit in table.fits:
        assert abs(fit.xi_hat - 0.75) < 3 * fit.se_xi


def test_scan_threshold_at_max_is_warning():
    x = sample(0.2, 1.0, 0.0, 200, 14)
    table = threshold_scan(x, [x.max()])
    assert len(table) == 1 and isinstance(table[0], ScanWarning)
    assert table[0].n_exceed == 0
    assert table.to_csv() == "threshold,xi,se_xi,beta,se_beta,n_exceed,converged\n"


def test_scan_single_threshold_equals_mle():
    x = sample(0.2, 1.0, 0.0, 500, 15)
    t = float(np.quantile(x, 0.8))
    assert threshold_scan(x, [t])[0] == gpd_mle(exceedances(x, t), t)


def test_scan_requires_increasing():
    with pytest.raises(InputError):
        threshold_scan([1, 2, 3], [2, 1])


def test_scan_csv_columns():
    x = sample(0.2, 1.0, 0.0, 500, 16)
    table = threshold_scan(x, [0.0, 0.5])
    lines = table.to_csv().splitlines()
    assert lines[0] == "threshold,xi,se_xi,beta,se_beta,n_exceed,converged"
    assert len(lines) == 3
    assert lines[1].split(",")[-1] in ("true", "false")
    assert json.loads(table.to_json())["fits"][0]["n_exceed"] == 500


# -- bootstrap goodness of fit ----------------------------------------------------------


def test_ad_statistic_direct():
    x = sample(0.2, 2.0, 1.0, 100, 17)
    p = GpdParams(0.2, 2.0, 1.0)
    f = np.sort(stats.genpareto.cdf(x, 0.2, loc=1.0, scale=2.0))
    i = np.arange(1, 101)
    ref = -100 - np.mean((2 * i - 1) * (np.log(f) + np.log1p(-f[::-1])))
    assert anderson_darling(x, p) == pytest.approx(ref, rel=1e-9)


def test_gof_deterministic_and_bounded():
    x = sample(0.3, 1.0, 0.0, 200, 18)
    a = bootstrap_gof(x, 0.0, n_boot=99, seed=5)
    b = bootstrap_gof(x, 0.0, n_boot=99, seed=5)
    assert a == b
    assert 0 < a.p_value <= 1
    assert a.n_boot == 99 and a.seed == 5


def test_gof_parallel_matches_sequential():
    x = sample(0.3, 1.0, 0.0, 150, 19)
    seq = bootstrap_gof(x, 0.0, n_boot=99, seed=1, workers=1)
    par = bootstrap_gof(x, 0.0, n_boot=99, seed=1, workers=4)
    assert seq.p_value == par.p_value and seq.statistic == par.statistic


def test_gof_argument_checks():
    x = sample(0.3, 1.0, 0.0, 100, 20)
    with pytest.raises(InputError):
        bootstrap_gof(x, 0.0, n_boot=50)
    with pytest.raises(InsufficientDataError):
        bootstrap_gof(x[:19], 0.0)


def test_gof_too_many_failed_refits(monkeypatch):
    x = sample(0.3, 1.0, 0.0, 100, 21)
    monkeypatch.setattr(pot, "_replicate", lambda *args: None)
    with pytest.raises(GofError):
        bootstrap_gof(x, 0.0, n_boot=99)


def test_gof_rejects_clear_misfit():
    # lognormal body cut at its 5% and 95% quantiles, threshold at the lower cut
    body = stats.lognorm(0.5)
    lo = body.ppf(0.05)
    x = body.ppf(np.random.default_rng(22).uniform(0.05, 0.95, 500))
    r = bootstrap_gof(x[x > lo], lo, n_boot=99, seed=0)
    assert r.p_value <= 0.05


def test_gof_ill_posed_fit_propagates():
    # two clusters: the likelihood is unbounded as xi -> -1
    rng = np.random.default_rng(23)
    x = np.concatenate([rng.uniform(1.0, 1.1, 150), rng.uniform(5.0, 5.1, 150)])
    with pytest.raises(FitError):
        bootstrap_gof(x, 0.0, n_boot=99, seed=0)
