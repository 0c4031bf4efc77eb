"""h-step point forecasts, prediction-error variance, and horizon precision.

Forecasts iterate the fitted mean recursion with future predictor values
replaced by their forecasts and future error terms by zero. The variance of
the h-step prediction error accumulates squared MA-representation weights on
top of the one-step error variance, and is reconciled with a beta
distribution through a horizon-specific precision.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from barma.model import FitResult, as_series
from barma.special import Link, link_apply, link_derivative, link_invert, link_eta_bounds

__all__ = [
    "ForecastSet",
    "point_forecast",
    "psi_weights",
    "prediction_error_variance",
    "precision_horizon",
    "forecast_set",
]

PRECISION_FLOOR = 0.01


@dataclass
class ForecastSet:
    """Point forecasts with their variance and precision ladders."""

    horizon: int
    point: np.ndarray
    psi: np.ndarray
    variance: np.ndarray
    precision_h: np.ndarray
    link: Link
    precision: float
    floored: int = 0


def point_forecast(fit: FitResult, series, horizon: int) -> np.ndarray:
    """Forecasts y_n(1..H) from the end of the series.

    Future predictor values g(y_{n+h-i}) use g of the forecast when the index
    lands past the sample (i < h) and the observed value otherwise; future
    error terms are zero for j < h and the in-sample errors for j >= h.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    series = as_series(series)
    spec = fit.spec
    n = len(series)
    x = link_apply(spec.link, series.values)
    r = fit.error_terms
    est = fit.estimates
    eta_lo, eta_hi = link_eta_bounds(spec.link)
    point = np.empty(horizon)
    g_fore = np.empty(horizon)
    for h in range(1, horizon + 1):
        eta = est.beta
        for coef, lag in zip(est.ar, spec.ar_lags):
            eta += coef * (g_fore[h - lag - 1] if lag < h else x[n + h - lag - 1])
        for coef, lag in zip(est.ma, spec.ma_lags):
            if lag >= h:
                eta += coef * r[n + h - lag - 1]
        eta = min(max(eta, eta_lo), eta_hi)
        mu = link_invert(spec.link, eta)
        point[h - 1] = mu
        g_fore[h - 1] = eta
    return point


def psi_weights(ar: np.ndarray, ma: np.ndarray, horizon: int) -> np.ndarray:
    """MA-representation weights Psi_0..Psi_{H-1}.

    Psi_0 = 1 and Psi_j = sum_i phi_i Psi_{j-i} - theta_j, with Psi_m = 0 for
    m < 0 and theta_j = 0 beyond the MA order.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    ar = np.atleast_1d(np.asarray(ar, dtype=float))
    ma = np.atleast_1d(np.asarray(ma, dtype=float)) if np.size(ma) else np.empty(0)
    psi = np.zeros(horizon)
    psi[0] = 1.0
    for j in range(1, horizon):
        acc = -(ma[j - 1] if j <= ma.size else 0.0)
        for i in range(1, ar.size + 1):
            if j - i >= 0:
                acc += ar[i - 1] * psi[j - i]
        psi[j] = acc
    return psi


def prediction_error_variance(
    point: np.ndarray,
    psi: np.ndarray,
    precision: float,
    link: Link,
    cumulative: bool = True,
) -> np.ndarray:
    """V_n(h) = (1 + sum of squared Psi weights) * sigma^2_{n+h}.

    sigma^2_{n+h} is the one-step error-variance approximation evaluated at
    the h-step forecast. With cumulative=True the Psi sum runs to h-1 per
    horizon; cumulative=False reproduces the fixed H-1 sum at every horizon.
    """
    point = np.asarray(point, dtype=float)
    H = point.size
    gp = link_derivative(link, point)
    sigma2 = gp**2 * point * (1.0 - point) / (1.0 + precision)
    psi2 = np.asarray(psi, dtype=float) ** 2
    if cumulative:
        factors = np.array([1.0 + float(np.sum(psi2[1:h])) for h in range(1, H + 1)])
    else:
        factors = np.full(H, 1.0 + float(np.sum(psi2[1:])))
    return factors * sigma2


def precision_horizon(point, variance, link: Link, floor: float = PRECISION_FLOOR):
    """Horizon precision phi_h matching V_n(h) to a beta variance at the forecast.

    Values at or below zero (variance too large for any beta law) are clamped
    to the floor with a warning.
    """
    scalar_in = np.ndim(point) == 0
    point = np.atleast_1d(np.asarray(point, dtype=float))
    variance = np.atleast_1d(np.asarray(variance, dtype=float))
    if np.any(variance <= 0.0):
        raise ValueError("variance must be positive")
    gp = link_derivative(link, point)
    top = gp**2 * point * (1.0 - point)
    prec = (top - variance) / variance
    bad = prec <= 0.0
    n_floored = int(np.count_nonzero(bad))
    if n_floored:
        warnings.warn(
            f"horizon precision nonpositive at {n_floored} horizon(s); "
            f"clamped to {floor}",
            UserWarning,
            stacklevel=2,
        )
        prec = np.where(bad, floor, prec)
    if scalar_in:
        return float(prec[0]), n_floored
    return prec, n_floored


def forecast_set(
    fit: FitResult,
    series,
    horizon: int,
    cumulative: bool = True,
    psi_convention: str = "representation",
) -> ForecastSet:
    """Assemble point forecasts, Psi weights, V_n(h), and phi_h for h = 1..H.

    psi_convention picks the sign of the MA terms in the Psi recursion.
    "representation" (default) uses the model's own moving-average
    representation, where theta enters the mean recursion with a plus sign;
    "bj" feeds theta into the textbook recursion unchanged, which flips the
    MA sign relative to this model's convention.
    """
    point = point_forecast(fit, series, horizon)
    # Dense coefficient vectors indexed by lag, so sparse lag subsets feed the
    # Psi recursion at their true positions.
    spec = fit.spec
    ar_dense = np.zeros(spec.p)
    for coef, lag in zip(fit.estimates.ar, spec.ar_lags):
        ar_dense[lag - 1] = coef
    ma_dense = np.zeros(spec.q)
    for coef, lag in zip(fit.estimates.ma, spec.ma_lags):
        ma_dense[lag - 1] = coef
    if psi_convention == "representation":
        psi = psi_weights(ar_dense, -ma_dense, horizon)
    elif psi_convention == "bj":
        psi = psi_weights(ar_dense, ma_dense, horizon)
    else:
        raise ValueError(f"unknown psi_convention {psi_convention!r}")
    variance = prediction_error_variance(
        point, psi, fit.estimates.precision, spec.link, cumulative=cumulative
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prec_h, floored = precision_horizon(point, variance, spec.link)
    return ForecastSet(
        horizon=horizon,
        point=point,
        psi=psi,
        variance=variance,
        precision_h=np.atleast_1d(prec_h),
        link=spec.link,
        precision=fit.estimates.precision,
        floored=floored,
    )
