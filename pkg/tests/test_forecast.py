"""Point forecast recursion, Psi weights, variance ladder, horizon precision."""

import math
import warnings

import numpy as np
import pytest

from barma._rng import stream
from barma.forecast import (
    forecast_set,
    point_forecast,
    precision_horizon,
    prediction_error_variance,
    psi_weights,
)
from barma.model import FitOptions, ModelSpec, ParameterVector, TimeSeries, fit_cmle
from barma.montecarlo import built_in_scenarios, simulate_barma
from barma.special import Link, link_invert


def make_fit(series, spec, params):
    """FitResult-shaped object at fixed parameters (no estimation)."""
    from barma.model import conditional_means, log_likelihood, FitResult

    eta, mu, r = conditional_means(series, spec, params)
    ll = log_likelihood(series, spec, params)
    return FitResult(
        spec=spec, estimates=params, standard_errors=None, fitted_means=mu,
        linear_predictors=eta, error_terms=r, loglik=ll,
        aic=-2 * ll + 2 * spec.n_params, m=spec.m, n_obs=len(series),
    )


def pv(beta=0.0, ar=(), ma=(), precision=120.0):
    return ParameterVector(beta=beta, ar=np.asarray(ar, dtype=float),
                           ma=np.asarray(ma, dtype=float), precision=precision)


class TestPointForecast:
    def test_flat_at_half(self):
        series = TimeSeries(np.linspace(0.2, 0.8, 30))
        spec = ModelSpec(p=1, q=0)
        fit = make_fit(series, spec, pv(ar=(0.0,)))
        fc = point_forecast(fit, series, 5)
        assert np.allclose(fc, 0.5)

    def test_two_step_hand_recursion(self):
        # AR(1) phi=0.5 from g(y_n)=1: forecasts g^{-1}(0.5), g^{-1}(0.25)
        spec = ModelSpec(p=1, q=0)
        y_n = link_invert(Link.LOGIT, 1.0)
        series = TimeSeries([0.5, 0.5, y_n])
        fit = make_fit(series, spec, pv(ar=(0.5,)))
        fc = point_forecast(fit, series, 2)
        assert fc[0] == pytest.approx(link_invert(Link.LOGIT, 0.5), rel=1e-10)
        assert fc[1] == pytest.approx(link_invert(Link.LOGIT, 0.25), rel=1e-10)

    def test_ma_terms_drop_beyond_horizon(self):
        # q=1: at h=2 the error lag is in the future, so forecast = g^{-1}(beta)
        sc_spec = ModelSpec(p=0, q=1)
        series = TimeSeries(np.clip(np.abs(np.sin(np.arange(1, 40))), 0.05, 0.95))
        fit = make_fit(series, sc_spec, pv(beta=0.4, ma=(0.7,)))
        fc = point_forecast(fit, series, 3)
        expected = link_invert(Link.LOGIT, 0.4)
        assert fc[1] == pytest.approx(expected, rel=1e-12)
        assert fc[2] == pytest.approx(expected, rel=1e-12)

    def test_horizon_validation(self):
        series = TimeSeries([0.4, 0.5, 0.6])
        fit = make_fit(series, ModelSpec(p=1, q=0), pv(ar=(0.2,)))
        with pytest.raises(ValueError):
            point_forecast(fit, series, 0)

    def test_h1_matches_in_sample_recursion(self):
        # consistency: one-step forecast equals the recursion applied at t=n+1
        sc = built_in_scenarios()[0]
        y = simulate_barma(sc, 120, stream(21, 0, 0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_cmle(y, sc.spec, FitOptions(compute_se=False))
        fc1 = point_forecast(fit, y, 1)[0]
        est = fit.estimates
        from barma.special import link_apply

        x = link_apply(Link.LOGIT, y.values)
        eta = est.beta + est.ar[0] * x[-1] + est.ma[0] * fit.error_terms[-1]
        assert fc1 == pytest.approx(link_invert(Link.LOGIT, eta), rel=1e-12)


class TestPsiWeights:
    def test_pure_ma2(self):
        psi = psi_weights(np.empty(0), np.array([0.8, -0.8]), 3)
        assert psi[0] == 1.0
        assert psi[1] == pytest.approx(-0.8)
        assert psi[2] == pytest.approx(0.8)

    def test_ar1_closed_form(self):
        psi = psi_weights(np.array([0.5]), np.empty(0), 8)
        assert np.allclose(psi, 0.5 ** np.arange(8))

    def test_arma11_hand_recursion(self):
        psi = psi_weights(np.array([0.5]), np.array([0.3]), 3)
        assert psi[1] == pytest.approx(0.2)
        assert psi[2] == pytest.approx(0.1)

    def test_geometric_decay_and_square_summability(self):
        psi = psi_weights(np.array([0.9]), np.empty(0), 200)
        assert abs(psi[-1]) < 1e-9
        partial = np.cumsum(psi**2)
        assert partial[-1] == pytest.approx(1.0 / (1.0 - 0.81), rel=1e-8)


class TestPredictionErrorVariance:
    def test_h1_is_bare_sigma(self):
        psi = np.array([1.0, 0.2])
        v = prediction_error_variance(np.array([0.5, 0.5]), psi, 120.0, Link.LOGIT)
        sigma2 = 16 * 0.25 / 121
        assert v[0] == pytest.approx(sigma2, rel=1e-12)
        assert v[1] == pytest.approx(1.04 * sigma2, rel=1e-12)

    def test_arithmetic_example(self):
        # psi1=0.2 with sigma^2=0.01 at h=2 gives 0.0104
        point = np.array([0.5, 0.5])
        psi = np.array([1.0, 0.2])
        v = prediction_error_variance(point, psi, 120.0, Link.LOGIT)
        ratio = v[1] / v[0]
        assert ratio == pytest.approx(1.04, rel=1e-12)
        assert 0.01 * 1.04 == pytest.approx(0.0104)

    def test_sigma_formula_value(self):
        v = prediction_error_variance(np.array([0.5]), np.array([1.0]), 120.0, Link.LOGIT)
        assert v[0] == pytest.approx(0.03305785123966942, rel=1e-12)

    def test_literal_reading_constant(self):
        point = np.full(4, 0.5)
        psi = np.array([1.0, 0.5, 0.25, 0.125])
        v = prediction_error_variance(point, psi, 120.0, Link.LOGIT, cumulative=False)
        assert np.allclose(v, v[0])

    def test_nondecreasing_when_sigma_constant(self):
        point = np.full(6, 0.5)
        psi = psi_weights(np.array([0.6]), np.empty(0), 6)
        v = prediction_error_variance(point, psi, 120.0, Link.LOGIT)
        assert np.all(np.diff(v) >= 0)


class TestPrecisionHorizon:
    def test_identity_at_one_step(self):
        sigma2 = 16 * 0.25 / 121
        prec, floored = precision_horizon(0.5, sigma2, Link.LOGIT)
        assert prec == pytest.approx(120.0, rel=1e-12)
        assert floored == 0

    def test_half_life_value(self):
        prec, _ = precision_horizon(0.5, 0.06611570247933884, Link.LOGIT)
        assert prec == pytest.approx(59.5, rel=1e-10)

    def test_floor_and_warning(self):
        with pytest.warns(UserWarning):
            prec, floored = precision_horizon(0.5, 5.0, Link.LOGIT)
        assert prec == 0.01
        assert floored == 1

    def test_monotone_in_variance(self):
        v = np.linspace(0.01, 0.5, 20)
        prec, _ = precision_horizon(np.full(20, 0.5), v, Link.LOGIT)
        assert np.all(np.diff(prec) < 0)

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ValueError):
            precision_horizon(0.5, 0.0, Link.LOGIT)


class TestForecastSet:
    def test_assembles_consistently(self):
        sc = built_in_scenarios()[0]
        y = simulate_barma(sc, 120, stream(22, 0, 0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_cmle(y, sc.spec, FitOptions(compute_se=False))
        fc = forecast_set(fit, y, 10)
        assert fc.point.shape == (10,)
        assert np.all((fc.point > 0) & (fc.point < 1))
        assert fc.psi[0] == 1.0
        assert np.all(fc.variance > 0)
        assert np.all(fc.precision_h > 0)
        assert fc.point[0] == pytest.approx(point_forecast(fit, y, 1)[0])

    def test_psi_convention_switch(self):
        sc = built_in_scenarios()[0]
        y = simulate_barma(sc, 120, stream(23, 0, 0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_cmle(y, sc.spec, FitOptions(compute_se=False))
        rep = forecast_set(fit, y, 5, psi_convention="representation")
        bj = forecast_set(fit, y, 5, psi_convention="bj")
        est = fit.estimates
        assert rep.psi[1] == pytest.approx(est.ar[0] + est.ma[0], rel=1e-12)
        assert bj.psi[1] == pytest.approx(est.ar[0] - est.ma[0], rel=1e-12)
        with pytest.raises(ValueError):
            forecast_set(fit, y, 5, psi_convention="other")
