"""Prediction-interval constructions for beta ARMA forecasts.

Six methods: two closed-form (normal-quantile on the link scale; beta
quantiles at horizon precision) and four bootstrap-based (bootstrap
prediction errors, bias-corrected/accelerated percentiles, and plain
percentile intervals under residual and block resampling).

All bootstrap machinery is deterministic given (seed, B): every replicate
draws from its own counter-based stream keyed by (seed, scheme, replicate),
so results are independent of evaluation order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import special as sp

from barma._rng import stream as _rng_stream
from barma.forecast import ForecastSet
from barma.model import (
    ConvergenceError,
    DegenerateSeriesError,
    FitOptions,
    FitResult,
    as_series,
    fit_cmle,
    residuals,
)
from barma.forecast import point_forecast
from barma.special import (
    Link,
    link_apply,
    link_derivative,
    link_invert,
    normal_quantile,
)

__all__ = [
    "Method",
    "IntervalSet",
    "BootstrapConfig",
    "BcaDiagnostics",
    "BootstrapDraws",
    "bj_interval",
    "qbeta_interval",
    "bpe_interval",
    "bca_interval",
    "percentile_interval",
    "parametric_bootstrap_series",
    "residual_bootstrap_series",
    "block_bootstrap_series",
    "bootstrap_forecast_path",
    "parametric_bootstrap_draws",
    "empirical_quantile",
    "default_block_length",
]

_SCHEME_IDS = {"parametric": 1, "residual": 2, "block": 3}

# Precision used in the BPE scale factor and in standardizing the bootstrap
# prediction errors. "horizon" selects phi_h, "fitted" the estimated phi.
BPE_SCALE_PRECISION = "fitted"
BPE_RESIDUAL_PRECISION = "horizon"


class Method(Enum):
    BJ = "bj"
    QBETA = "qbeta"
    BPE = "bpe"
    BCA = "bca"
    BLOCK_PERCENTILE = "block_percentile"
    RESIDUAL_PERCENTILE = "residual_percentile"

    @classmethod
    def parse(cls, name) -> "Method":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "block": cls.BLOCK_PERCENTILE,
            "residual": cls.RESIDUAL_PERCENTILE,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown interval method {name!r}")


@dataclass
class IntervalSet:
    """Per-horizon prediction limits for one method at level 1 - alpha."""

    method: Method
    level: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower/upper shapes differ")

    @property
    def horizon(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass
class BootstrapConfig:
    """Replication count, resampling scheme, and seed for the engines."""

    B: int = 1000
    scheme: str = "parametric"
    block_length: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.B < 100:
            raise ValueError(f"B must be at least 100, got {self.B}")
        if self.B < 500:
            warnings.warn(
                f"B={self.B} below 500 may give unstable quantiles", UserWarning, stacklevel=2
            )
        if self.scheme not in _SCHEME_IDS:
            raise ValueError(f"unknown bootstrap scheme {self.scheme!r}")


@dataclass
class BcaDiagnostics:
    """Per-horizon BCa adjustment quantities."""

    z0_hat: np.ndarray
    a_hat: np.ndarray
    omega_hat: np.ndarray
    upsilon_hat: np.ndarray
    alpha_tilde_lower: np.ndarray
    alpha_tilde_upper: np.ndarray
    delta_lower: np.ndarray
    delta_upper: np.ndarray


@dataclass
class BootstrapDraws:
    """Refit forecast paths, horizon precisions, and simulated futures."""

    scheme: str
    paths: np.ndarray
    futures: np.ndarray
    n_requested: int
    n_discarded: int
    precisions: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.precisions is None:
            self.precisions = np.full_like(self.paths, np.nan)


_stream = _rng_stream


def empirical_quantile(sorted_values: np.ndarray, p: float) -> float:
    """Type-1 quantile: order statistic with index ceil(p * B)."""
    b = sorted_values.size
    idx = min(max(math.ceil(p * b), 1), b) - 1
    return float(sorted_values[idx])


def default_block_length(n: int) -> int:
    return int(math.ceil(n ** (1.0 / 3.0)))


def bj_interval(forecasts: ForecastSet, fit: FitResult, alpha: float) -> IntervalSet:
    """Normal-quantile interval on the link scale mapped back through g^{-1}."""
    z = normal_quantile(1.0 - alpha / 2.0)
    g_point = link_apply(forecasts.link, forecasts.point)
    half = z * np.sqrt(forecasts.variance)
    lower = link_invert(forecasts.link, g_point - half)
    upper = link_invert(forecasts.link, g_point + half)
    return IntervalSet(Method.BJ, 1.0 - alpha, lower, upper)


def qbeta_interval(forecasts: ForecastSet, alpha: float) -> IntervalSet:
    """Beta-quantile interval at mean y_n(h) and horizon precision phi_h."""
    a = forecasts.point * forecasts.precision_h
    b = (1.0 - forecasts.point) * forecasts.precision_h
    lower = sp.betaincinv(a, b, alpha / 2.0)
    upper = sp.betaincinv(a, b, 1.0 - alpha / 2.0)
    return IntervalSet(Method.QBETA, 1.0 - alpha, lower, upper)


def parametric_bootstrap_series(
    fit: FitResult, series, rng: np.random.Generator
) -> np.ndarray:
    """Draw y_t^b from Beta(mu_t, phi) at the fitted values; presample kept."""
    series = as_series(series)
    m = fit.m
    yb = series.values.copy()
    mu = fit.fitted_means[m:]
    phi = fit.estimates.precision
    yb[m:] = rng.beta(mu * phi, (1.0 - mu) * phi)
    return _clip_unit(yb)


def residual_bootstrap_series(
    fit: FitResult, series, rng: np.random.Generator
) -> np.ndarray:
    """Rebuild the series from fitted means plus resampled ordinary residuals."""
    series = as_series(series)
    m = fit.m
    pool = fit.error_terms[m:]
    mu = fit.fitted_means[m:]
    idx = rng.integers(0, pool.size, size=pool.size)
    y_star = np.log(mu) - np.log1p(-mu)
    yb = series.values.copy()
    yb[m:] = sp.expit(y_star + pool[idx])
    return _clip_unit(yb)


def block_bootstrap_series(
    series, block_length: int, rng: np.random.Generator
) -> np.ndarray:
    """Moving-block bootstrap: uniform contiguous blocks concatenated to length n."""
    series = as_series(series)
    y = series.values
    n = y.size
    if not 1 <= block_length <= n:
        raise ValueError(f"block_length must lie in [1, {n}]")
    n_blocks = math.ceil(n / block_length)
    starts = rng.integers(0, n - block_length + 1, size=n_blocks)
    chunks = [y[s : s + block_length] for s in starts]
    return np.concatenate(chunks)[:n]


def bootstrap_forecast_path(refit: FitResult, series_b, horizon: int) -> np.ndarray:
    """Forecast recursion on the bootstrap series under the refit coefficients.

    Future error terms average out to zero, so the path reduces to the point
    recursion applied to the resampled series; futures are then drawn around
    it at horizon precision.
    """
    return point_forecast(refit, series_b, horizon)


def _clip_unit(y: np.ndarray) -> np.ndarray:
    return np.clip(y, 1e-12, 1.0 - 1e-12)


def _make_series_b(fit, series, scheme, block_length, rng):
    if scheme == "parametric":
        return parametric_bootstrap_series(fit, series, rng)
    if scheme == "residual":
        return residual_bootstrap_series(fit, series, rng)
    return block_bootstrap_series(series, block_length, rng)


def bootstrap_draws(
    fit: FitResult,
    series,
    forecasts: ForecastSet,
    boot: BootstrapConfig,
    horizon: Optional[int] = None,
) -> BootstrapDraws:
    """Generate B bootstrap replicates: resample, refit, forecast, draw futures.

    Failed refits are discarded (not retried); the run aborts when usable
    replicates fall below 80% of B.
    """
    from barma.forecast import forecast_set

    series = as_series(series)
    H = horizon or forecasts.horizon
    scheme = boot.scheme
    scheme_id = _SCHEME_IDS[scheme]
    block_length = boot.block_length or default_block_length(len(series))
    # refits start from their own OLS initial values: starting each replicate
    # at the original optimum would shrink the refit dispersion the bootstrap
    # is meant to propagate
    refit_opts = FitOptions(compute_se=False)

    paths = np.empty((boot.B, H))
    precs = np.empty((boot.B, H))
    futures = np.empty((boot.B, H))
    used = 0
    for b in range(boot.B):
        rng = _stream(boot.seed, scheme_id, b)
        yb = _make_series_b(fit, series, scheme, block_length, rng)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                refit = fit_cmle(yb, fit.spec, refit_opts)
                # each replicate draws its future from its own refit forecast
                # distribution: path and horizon precision both re-estimated
                refit_fc = forecast_set(refit, yb, H)
        except (ConvergenceError, DegenerateSeriesError, ValueError):
            continue
        paths[used] = refit_fc.point
        precs[used] = refit_fc.precision_h
        futures[used] = rng.beta(
            refit_fc.point * refit_fc.precision_h,
            (1.0 - refit_fc.point) * refit_fc.precision_h,
        )
        used += 1
    discarded = boot.B - used
    if used < math.ceil(0.8 * boot.B):
        raise RuntimeError(
            f"bootstrap failed: only {used}/{boot.B} replicates converged"
        )
    return BootstrapDraws(
        scheme=scheme,
        paths=paths[:used],
        futures=_clip_unit(futures[:used]),
        n_requested=boot.B,
        n_discarded=discarded,
        precisions=precs[:used],
    )


def parametric_bootstrap_draws(fit, series, forecasts, boot: BootstrapConfig) -> BootstrapDraws:
    if boot.scheme != "parametric":
        raise ValueError("parametric draws require scheme='parametric'")
    return bootstrap_draws(fit, series, forecasts, boot)


def _r2_pool(draws: BootstrapDraws, forecasts: ForecastSet, fit: FitResult, mode: str):
    """Standardized prediction errors R2(y^b_{n+h}, y^b_n(h)) per horizon.

    mode "horizon" standardizes each replicate by its own refit horizon
    precision (matching the futures' generating law); "fitted" uses the
    original fit's precision at every horizon.
    """
    link = forecasts.link
    prec = draws.precisions if mode == "horizon" else fit.estimates.precision
    mu = draws.paths
    dev = link_apply(link, draws.futures) - link_apply(link, mu)
    sd = np.sqrt(link_derivative(link, mu) ** 2 * mu * (1.0 - mu) / (1.0 + prec))
    return dev / sd


def bpe_interval(
    fit: FitResult,
    series,
    forecasts: ForecastSet,
    alpha: float,
    boot: BootstrapConfig,
    draws: Optional[BootstrapDraws] = None,
    scale_precision: str = BPE_SCALE_PRECISION,
    residual_precision: str = BPE_RESIDUAL_PRECISION,
) -> IntervalSet:
    """Bootstrap-prediction-error interval.

    Empirical quantiles of the standardized bootstrap prediction errors are
    rescaled onto the link-scale forecast by the one-step error standard
    deviation and mapped back through the link inverse.
    """
    if boot.scheme != "parametric":
        raise ValueError("BPE uses the parametric bootstrap scheme")
    if draws is None:
        draws = bootstrap_draws(fit, series, forecasts, boot)
    link = forecasts.link
    H = forecasts.horizon
    pool = _r2_pool(draws, forecasts, fit, residual_precision)
    prec = (
        forecasts.precision_h[:H]
        if scale_precision == "horizon"
        else fit.estimates.precision
    )
    point = forecasts.point
    sd = np.sqrt(
        link_derivative(link, point) ** 2 * point * (1.0 - point) / (1.0 + prec)
    )
    g_point = link_apply(link, point)
    lower = np.empty(H)
    upper = np.empty(H)
    for h in range(H):
        col = np.sort(pool[:, h])
        q_lo = empirical_quantile(col, alpha / 2.0)
        q_hi = empirical_quantile(col, 1.0 - alpha / 2.0)
        lower[h] = link_invert(link, g_point[h] + sd[h] * q_lo)
        upper[h] = link_invert(link, g_point[h] + sd[h] * q_hi)
    return IntervalSet(Method.BPE, 1.0 - alpha, lower, upper)


def _r3_values(y_values: np.ndarray, mu: np.ndarray, prec) -> np.ndarray:
    y_star = np.log(y_values) - np.log1p(-y_values)
    mu_star = sp.psi(mu * prec) - sp.psi((1.0 - mu) * prec)
    nu = sp.polygamma(1, mu * prec) + sp.polygamma(1, (1.0 - mu) * prec)
    return (y_star - mu_star) / np.sqrt(nu)


def bca_interval(
    fit: FitResult,
    series,
    forecasts: ForecastSet,
    alpha: float,
    boot: BootstrapConfig,
    draws: Optional[BootstrapDraws] = None,
    strict_paper_tails: bool = False,
) -> tuple[IntervalSet, BcaDiagnostics]:
    """Bias-corrected and accelerated bootstrap interval.

    The bias correction compares the bootstrap R3 prediction errors with the
    median in-sample R3 residual; the acceleration is the logit-scale
    skewness/6 of the forecast beta law. Tail levels follow the canonical
    BCa adjustment unless strict_paper_tails selects the alternative
    bracketing Phi{z0 + [(z0+z)^-1 - a]^-1}; both coincide when a = 0.
    """
    if boot.scheme != "parametric":
        raise ValueError("BCa uses the parametric bootstrap scheme")
    if draws is None:
        draws = bootstrap_draws(fit, series, forecasts, boot)
    H = forecasts.horizon
    B_used = draws.paths.shape[0]
    prec_h = forecasts.precision_h[:H]
    point = forecasts.point

    r_m = float(np.median(residuals(fit, series, "R3")))
    pool = _r3_values(draws.futures, draws.paths, draws.precisions)

    omega = prec_h**3 * (
        sp.polygamma(2, point * prec_h) - sp.polygamma(2, (1.0 - point) * prec_h)
    )
    upsilon = prec_h**2 * (
        sp.polygamma(1, point * prec_h) + sp.polygamma(1, (1.0 - point) * prec_h)
    )
    a_hat = omega / (6.0 * upsilon**1.5)
    nu = upsilon / prec_h**2

    counts = np.clip((pool < r_m).sum(axis=0), 1, B_used - 1)
    z0 = sp.ndtri(counts / B_used)

    z_lo = normal_quantile(alpha / 2.0)
    z_hi = normal_quantile(1.0 - alpha / 2.0)
    tilde_lo = _bca_tail(z0, a_hat, z_lo, strict_paper_tails)
    tilde_hi = _bca_tail(z0, a_hat, z_hi, strict_paper_tails)

    y_star = np.log(point) - np.log1p(-point)
    lower = np.empty(H)
    upper = np.empty(H)
    delta_lo = np.empty(H)
    delta_hi = np.empty(H)
    for h in range(H):
        col = np.sort(pool[:, h])
        delta_lo[h] = empirical_quantile(col, tilde_lo[h])
        delta_hi[h] = empirical_quantile(col, tilde_hi[h])
        lower[h] = sp.expit(y_star[h] + delta_lo[h] * math.sqrt(nu[h]))
        upper[h] = sp.expit(y_star[h] + delta_hi[h] * math.sqrt(nu[h]))
    interval = IntervalSet(Method.BCA, 1.0 - alpha, _clip_unit(lower), _clip_unit(upper))
    diag = BcaDiagnostics(
        z0_hat=z0,
        a_hat=a_hat,
        omega_hat=omega,
        upsilon_hat=upsilon,
        alpha_tilde_lower=tilde_lo,
        alpha_tilde_upper=tilde_hi,
        delta_lower=delta_lo,
        delta_upper=delta_hi,
    )
    return interval, diag


def _bca_tail(z0: np.ndarray, a_hat: np.ndarray, z: float, strict_paper: bool) -> np.ndarray:
    zz = z0 + z
    if strict_paper:
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = z0 + 1.0 / (1.0 / zz - a_hat)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = z0 + zz / (1.0 - a_hat * zz)
    tail = sp.ndtr(np.where(np.isfinite(arg), arg, np.sign(zz) * 1e3))
    return np.clip(tail, 1e-7, 1.0 - 1e-7)


def percentile_interval(
    fit: FitResult,
    series,
    forecasts: ForecastSet,
    alpha: float,
    boot: BootstrapConfig,
    draws: Optional[BootstrapDraws] = None,
) -> IntervalSet:
    """Percentile interval from bootstrap future values (residual or block scheme)."""
    if boot.scheme not in ("residual", "block"):
        raise ValueError("percentile intervals use the residual or block scheme")
    if draws is None:
        draws = bootstrap_draws(fit, series, forecasts, boot)
    H = forecasts.horizon
    lower = np.empty(H)
    upper = np.empty(H)
    for h in range(H):
        col = np.sort(draws.futures[:, h])
        lower[h] = empirical_quantile(col, alpha / 2.0)
        upper[h] = empirical_quantile(col, 1.0 - alpha / 2.0)
    method = Method.RESIDUAL_PERCENTILE if boot.scheme == "residual" else Method.BLOCK_PERCENTILE
    return IntervalSet(method, 1.0 - alpha, lower, upper)
