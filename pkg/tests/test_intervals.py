"""Interval construction tests: closed forms, bootstrap engines, determinism."""

import warnings

import numpy as np
import pytest
from scipy import stats

from barma._rng import stream
from barma.forecast import ForecastSet, forecast_set
from barma.intervals import (
    BootstrapConfig,
    Method,
    bca_interval,
    bj_interval,
    block_bootstrap_series,
    bootstrap_draws,
    bootstrap_forecast_path,
    bpe_interval,
    default_block_length,
    empirical_quantile,
    parametric_bootstrap_series,
    percentile_interval,
    qbeta_interval,
    residual_bootstrap_series,
)
from barma.model import FitOptions, ModelSpec, TimeSeries, fit_cmle
from barma.montecarlo import built_in_scenarios, simulate_barma
from barma.special import Link, link_apply


@pytest.fixture(scope="module")
def fitted():
    sc = built_in_scenarios()[0]
    y = simulate_barma(sc, 110, stream(31, 0, 0))
    train = TimeSeries(y.values[:100])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = fit_cmle(train, sc.spec, FitOptions(compute_se=False))
        fc = forecast_set(fit, train, 10)
    return fit, train, fc


def synthetic_forecasts(point, variance, precision_h, precision=120.0):
    point = np.asarray(point, dtype=float)
    return ForecastSet(
        horizon=point.size,
        point=point,
        psi=np.ones(point.size),
        variance=np.asarray(variance, dtype=float),
        precision_h=np.asarray(precision_h, dtype=float),
        link=Link.LOGIT,
        precision=precision,
    )


class TestEmpiricalQuantile:
    def test_ceil_convention(self):
        vals = np.arange(1.0, 11.0)  # 1..10 sorted
        assert empirical_quantile(vals, 0.05) == 1.0  # ceil(0.5) = 1
        assert empirical_quantile(vals, 0.10) == 1.0
        assert empirical_quantile(vals, 0.11) == 2.0
        assert empirical_quantile(vals, 0.95) == 10.0
        assert empirical_quantile(vals, 1.0 - 1e-12) == 10.0


class TestBJ:
    def test_degenerate_width(self):
        fc = synthetic_forecasts([0.4, 0.6], [0.0, 0.0], [120.0, 120.0])
        iv = bj_interval(fc, None, 0.10)
        assert np.allclose(iv.lower, fc.point)
        assert np.allclose(iv.upper, fc.point)

    def test_symmetric_on_link_scale(self, fitted):
        fit, train, fc = fitted
        iv = bj_interval(fc, fit, 0.10)
        g = link_apply(Link.LOGIT, fc.point)
        lo = link_apply(Link.LOGIT, iv.lower)
        hi = link_apply(Link.LOGIT, iv.upper)
        assert np.allclose(lo + hi, 2 * g, atol=1e-8)

    def test_widening_in_h_for_pure_ar(self):
        spec = ModelSpec(p=1, q=0)
        from barma.model import ParameterVector
        from barma.montecarlo import Scenario

        sc = Scenario("ar", spec, ParameterVector(0.0, np.array([0.6]), np.empty(0), 120.0))
        y = simulate_barma(sc, 100, stream(32, 0, 0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_cmle(y, spec, FitOptions(compute_se=False))
            fc = forecast_set(fit, y, 8)
        iv = bj_interval(fc, fit, 0.10)
        assert np.all(np.diff(iv.width) >= -1e-12)


class TestQbeta:
    def test_uniform_case(self):
        fc = synthetic_forecasts([0.5], [0.01], [2.0])
        iv = qbeta_interval(fc, 0.10)
        assert iv.lower[0] == pytest.approx(0.05, abs=1e-10)
        assert iv.upper[0] == pytest.approx(0.95, abs=1e-10)

    def test_symmetry(self):
        fc = synthetic_forecasts([0.5, 0.5], [0.01, 0.01], [50.0, 20.0])
        iv = qbeta_interval(fc, 0.10)
        assert np.allclose(iv.lower + iv.upper, 1.0, atol=1e-12)


class TestBootstrapSeries:
    def test_parametric_support_and_determinism(self, fitted):
        fit, train, fc = fitted
        y1 = parametric_bootstrap_series(fit, train, stream(100, 1, 5))
        y2 = parametric_bootstrap_series(fit, train, stream(100, 1, 5))
        assert np.array_equal(y1, y2)
        assert np.all((y1 > 0) & (y1 < 1))
        assert np.array_equal(y1[: fit.m], train.values[: fit.m])

    def test_parametric_clt_center(self, fitted):
        fit, train, fc = fitted
        t = 40
        draws = np.array(
            [parametric_bootstrap_series(fit, train, stream(7, 0, b))[t] for b in range(1000)]
        )
        mu_t = fit.fitted_means[t]
        sd = np.sqrt(mu_t * (1 - mu_t) / (1 + fit.estimates.precision))
        assert abs(draws.mean() - mu_t) < 3 * sd / np.sqrt(1000)

    def test_residual_all_zero_residuals(self, fitted):
        fit, train, fc = fitted
        saved = fit.error_terms.copy()
        fit.error_terms[:] = 0.0
        try:
            yb = residual_bootstrap_series(fit, train, stream(8, 0, 0))
            assert np.allclose(yb[fit.m :], fit.fitted_means[fit.m :], atol=1e-12)
        finally:
            fit.error_terms[:] = saved

    def test_residual_in_unit_interval_and_pool(self, fitted):
        fit, train, fc = fitted
        yb = residual_bootstrap_series(fit, train, stream(9, 0, 0))
        assert np.all((yb > 0) & (yb < 1))
        # resampled predictor shifts must come from the residual pool
        shifts = (
            link_apply(Link.LOGIT, yb[fit.m :])
            - link_apply(Link.LOGIT, fit.fitted_means[fit.m :])
        )
        pool = fit.error_terms[fit.m :]
        for s in shifts[:25]:
            assert np.min(np.abs(pool - s)) < 1e-9

    def test_residual_resampling_distribution(self, fitted):
        # two-sample KS between the residual pool and many resampled shifts
        fit, train, fc = fitted
        pool = fit.error_terms[fit.m :]
        shifts = []
        for b in range(120):
            yb = residual_bootstrap_series(fit, train, stream(10, 0, b))
            shifts.append(
                link_apply(Link.LOGIT, yb[fit.m :])
                - link_apply(Link.LOGIT, fit.fitted_means[fit.m :])
            )
        ks = stats.ks_2samp(np.concatenate(shifts), pool)
        assert ks.pvalue > 0.01

    def test_block_single_block_identity(self, fitted):
        fit, train, fc = fitted
        yb = block_bootstrap_series(train, len(train), stream(11, 0, 0))
        assert np.array_equal(yb, train.values)

    def test_block_unit_blocks_resample_observations(self, fitted):
        fit, train, fc = fitted
        yb = block_bootstrap_series(train, 1, stream(12, 0, 0))
        assert set(np.round(yb, 12)).issubset(set(np.round(train.values, 12)))

    def test_block_values_come_from_series(self, fitted):
        fit, train, fc = fitted
        yb = block_bootstrap_series(train, 5, stream(13, 0, 0))
        assert len(yb) == len(train)
        assert set(np.round(yb, 12)).issubset(set(np.round(train.values, 12)))

    def test_block_length_default(self):
        assert default_block_length(100) == 5
        assert default_block_length(151) == 6


class TestBootstrapForecastPath:
    def test_reduces_to_point_forecast(self, fitted):
        fit, train, fc = fitted
        from barma.forecast import point_forecast

        path = bootstrap_forecast_path(fit, train, 10)
        assert np.allclose(path, point_forecast(fit, train, 10))

    def test_ma_only_constant_beyond_q(self):
        spec = ModelSpec(p=0, q=1)
        from barma.model import ParameterVector
        from barma.montecarlo import Scenario

        sc = Scenario("ma", spec, ParameterVector(0.2, np.empty(0), np.array([0.5]), 120.0))
        y = simulate_barma(sc, 80, stream(33, 0, 0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            refit = fit_cmle(y, spec, FitOptions(compute_se=False))
        path = bootstrap_forecast_path(refit, y, 4)
        from barma.special import link_invert

        expected = link_invert(Link.LOGIT, refit.estimates.beta)
        assert np.allclose(path[1:], expected, rtol=1e-10)


class TestBootstrapConfig:
    def test_b_floor(self):
        with pytest.raises(ValueError):
            BootstrapConfig(B=50)
        with pytest.warns(UserWarning):
            BootstrapConfig(B=200)

    def test_scheme_validation(self):
        with pytest.raises(ValueError):
            BootstrapConfig(B=500, scheme="wild")


class TestEngines:
    @pytest.fixture(scope="class")
    def draws(self, fitted):
        fit, train, fc = fitted
        cfg = BootstrapConfig(B=150, scheme="parametric", seed=0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return bootstrap_draws(fit, train, fc, cfg)

    def test_futures_in_unit_interval(self, draws):
        assert np.all((draws.futures > 0) & (draws.futures < 1))
        assert np.all((draws.paths > 0) & (draws.paths < 1))

    def test_deterministic_replicates(self, fitted):
        fit, train, fc = fitted
        cfg = BootstrapConfig(B=120, scheme="residual", seed=99)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            d1 = bootstrap_draws(fit, train, fc, cfg)
            d2 = bootstrap_draws(fit, train, fc, cfg)
        assert np.array_equal(d1.futures, d2.futures)
        assert np.array_equal(d1.paths, d2.paths)

    def test_larger_b_extends_replicates(self, fitted):
        fit, train, fc = fitted
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            small = bootstrap_draws(fit, train, fc, BootstrapConfig(B=120, scheme="parametric", seed=5))
            large = bootstrap_draws(fit, train, fc, BootstrapConfig(B=240, scheme="parametric", seed=5))
        assert np.array_equal(large.futures[:120], small.futures)


class TestBPE:
    def test_reduces_to_point_when_residuals_zero(self, fitted):
        fit, train, fc = fitted
        from barma.intervals import BootstrapDraws

        d = BootstrapDraws(
            scheme="parametric",
            paths=np.tile(fc.point, (200, 1)),
            futures=np.tile(fc.point, (200, 1)),
            n_requested=200,
            n_discarded=0,
            precisions=np.tile(fc.precision_h, (200, 1)),
        )
        cfg = BootstrapConfig(B=200, scheme="parametric", seed=0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            iv = bpe_interval(fit, train, fc, 0.10, cfg, draws=d)
        assert np.allclose(iv.lower, fc.point, atol=1e-10)
        assert np.allclose(iv.upper, fc.point, atol=1e-10)

    def test_normal_quantile_reduction(self, fitted):
        # residual quantiles forced to +-1.645 reproduce a BJ-shaped interval
        fit, train, fc = fitted
        from barma.intervals import BootstrapDraws, BPE_RESIDUAL_PRECISION, BPE_SCALE_PRECISION
        from barma.special import link_derivative, link_invert, normal_quantile

        B = 1000
        z = normal_quantile(0.95)
        H = fc.horizon
        paths = np.tile(fc.point, (B, 1))
        prec_grid = np.tile(fc.precision_h, (B, 1))
        prec_r = prec_grid if BPE_RESIDUAL_PRECISION == "horizon" else fc.precision
        sd_r = np.sqrt(
            link_derivative(Link.LOGIT, paths) ** 2 * paths * (1 - paths) / (1 + prec_r)
        )
        g_paths = link_apply(Link.LOGIT, paths)
        futures = np.asarray(link_invert(Link.LOGIT, g_paths + sd_r * z))
        futures[: B // 2] = link_invert(Link.LOGIT, g_paths[: B // 2] - sd_r[: B // 2] * z)
        d = BootstrapDraws("parametric", paths, futures, B, 0, precisions=prec_grid)
        cfg = BootstrapConfig(B=B, scheme="parametric", seed=0)
        iv = bpe_interval(fit, train, fc, 0.10, cfg, draws=d)
        prec_s = fc.precision_h if BPE_SCALE_PRECISION == "horizon" else fc.precision
        sd_s = np.sqrt(
            link_derivative(Link.LOGIT, fc.point) ** 2 * fc.point * (1 - fc.point) / (1 + prec_s)
        )
        g_point = link_apply(Link.LOGIT, fc.point)
        want_lo = link_invert(Link.LOGIT, g_point - z * sd_s)
        want_hi = link_invert(Link.LOGIT, g_point + z * sd_s)
        assert np.allclose(iv.lower, want_lo, atol=1e-9)
        assert np.allclose(iv.upper, want_hi, atol=1e-9)

    def test_scheme_validation(self, fitted):
        fit, train, fc = fitted
        cfg = BootstrapConfig(B=150, scheme="block", seed=0)
        with pytest.raises(ValueError):
            bpe_interval(fit, train, fc, 0.10, cfg)


class TestBCa:
    def test_symmetric_pool_gives_zero_bias(self, fitted):
        fit, train, fc = fitted
        cfg = BootstrapConfig(B=500, scheme="parametric", seed=3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            iv, diag = bca_interval(fit, train, fc, 0.10, cfg)
        # z0 should be modest for a well-behaved parametric bootstrap
        assert np.all(np.abs(diag.z0_hat) < 0.6)
        assert np.all((diag.alpha_tilde_lower > 0) & (diag.alpha_tilde_lower < 1))
        assert np.all((diag.alpha_tilde_upper > 0) & (diag.alpha_tilde_upper < 1))
        assert np.all(iv.lower < iv.upper)

    def test_acceleration_zero_at_half(self):
        from scipy import special as sp

        prec = 80.0
        omega = prec**3 * (sp.polygamma(2, 0.5 * prec) - sp.polygamma(2, 0.5 * prec))
        assert omega == 0.0

    def test_strict_paper_tails_match_when_a_zero(self, fitted):
        from barma.intervals import _bca_tail

        z0 = np.array([0.1, -0.2, 0.0])
        a = np.zeros(3)
        z = -1.6448536269514722
        canonical = _bca_tail(z0, a, z, strict_paper=False)
        strict = _bca_tail(z0, a, z, strict_paper=True)
        assert np.allclose(canonical, strict, atol=1e-12)

    def test_limits_are_logistic_of_shifted_quantiles(self, fitted):
        fit, train, fc = fitted
        cfg = BootstrapConfig(B=500, scheme="parametric", seed=4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            iv, diag = bca_interval(fit, train, fc, 0.10, cfg)
        from scipy import special as sp

        y_star = np.log(fc.point) - np.log1p(-fc.point)
        nu = sp.polygamma(1, fc.point * fc.precision_h) + sp.polygamma(
            1, (1 - fc.point) * fc.precision_h
        )
        lo = sp.expit(y_star + diag.delta_lower * np.sqrt(nu))
        assert np.allclose(iv.lower, lo, atol=1e-12)


class TestPercentile:
    def test_identical_futures_collapse(self, fitted):
        fit, train, fc = fitted
        from barma.intervals import BootstrapDraws

        c = 0.37
        d = BootstrapDraws("residual", np.full((150, 10), 0.5), np.full((150, 10), c), 150, 0,
                           precisions=np.full((150, 10), 120.0))
        cfg = BootstrapConfig(B=150, scheme="residual", seed=0)
        iv = percentile_interval(fit, train, fc, 0.10, cfg, draws=d)
        assert np.allclose(iv.lower, c)
        assert np.allclose(iv.upper, c)

    def test_scheme_validation(self, fitted):
        fit, train, fc = fitted
        cfg = BootstrapConfig(B=150, scheme="parametric", seed=0)
        with pytest.raises(ValueError):
            percentile_interval(fit, train, fc, 0.10, cfg)

    def test_method_tagging(self, fitted):
        fit, train, fc = fitted
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = percentile_interval(
                fit, train, fc, 0.10, BootstrapConfig(B=120, scheme="residual", seed=1)
            )
            blk = percentile_interval(
                fit, train, fc, 0.10, BootstrapConfig(B=120, scheme="block", seed=1)
            )
        assert res.method == Method.RESIDUAL_PERCENTILE
        assert blk.method == Method.BLOCK_PERCENTILE


class TestContainmentAndStability:
    def test_all_methods_contained_in_unit_interval(self, fitted):
        fit, train, fc = fitted
        cfg_p = BootstrapConfig(B=150, scheme="parametric", seed=6)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            d = bootstrap_draws(fit, train, fc, cfg_p)
            sets = [
                bj_interval(fc, fit, 0.10),
                qbeta_interval(fc, 0.10),
                bpe_interval(fit, train, fc, 0.10, cfg_p, draws=d),
                bca_interval(fit, train, fc, 0.10, cfg_p, draws=d)[0],
                percentile_interval(fit, train, fc, 0.10, BootstrapConfig(B=150, scheme="residual", seed=6)),
                percentile_interval(fit, train, fc, 0.10, BootstrapConfig(B=150, scheme="block", seed=6)),
            ]
        for iv in sets:
            assert np.all(iv.lower > 0) and np.all(iv.upper < 1)
            assert np.all(iv.lower < iv.upper)

    def test_quantile_stability_in_b(self, fitted):
        # fixed seed stream: limits move only slightly as B grows
        fit, train, fc = fitted
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            iv1 = percentile_interval(
                fit, train, fc, 0.10, BootstrapConfig(B=2000, scheme="residual", seed=8)
            )
            iv2 = percentile_interval(
                fit, train, fc, 0.10, BootstrapConfig(B=5000, scheme="residual", seed=8)
            )
        assert np.max(np.abs(iv1.lower - iv2.lower)) < 0.02
        assert np.max(np.abs(iv1.upper - iv2.upper)) < 0.02
