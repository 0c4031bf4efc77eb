"""Residual diagnostic tests: portmanteau statistics and the ARCH LM test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "TestResult",
    "autocorrelations",
    "box_pierce",
    "ljung_box",
    "arch_lm",
    "default_lag_count",
]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    lags: int
    df: int


def autocorrelations(x: np.ndarray, lags: int) -> np.ndarray:
    """Sample autocorrelations rho_1..rho_lags (biased normalization)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if lags >= n:
        raise ValueError(f"lags {lags} must be below the sample size {n}")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom <= 0.0:
        return np.zeros(lags)
    return np.array([float(xc[k:] @ xc[:-k]) / denom for k in range(1, lags + 1)])


def _portmanteau_pvalue(stat: float, lags: int, fitted_params: int) -> tuple[float, int]:
    df = max(lags - fitted_params, 1)
    return float(stats.chi2.sf(stat, df)), df


def box_pierce(resid, lags: int, fitted_params: int = 0) -> TestResult:
    """Box-Pierce Q = n * sum of squared autocorrelations up to the given lag."""
    resid = np.asarray(resid, dtype=float)
    rho = autocorrelations(resid, lags)
    n = resid.size
    stat = float(n * np.sum(rho**2))
    pval, df = _portmanteau_pvalue(stat, lags, fitted_params)
    if np.allclose(rho, 0.0):
        stat, pval = 0.0, 1.0
    return TestResult(stat, pval, lags, df)


def ljung_box(resid, lags: int, fitted_params: int = 0) -> TestResult:
    """Ljung-Box Q* = n(n+2) * sum rho_k^2 / (n-k)."""
    resid = np.asarray(resid, dtype=float)
    rho = autocorrelations(resid, lags)
    n = resid.size
    k = np.arange(1, lags + 1)
    stat = float(n * (n + 2) * np.sum(rho**2 / (n - k)))
    pval, df = _portmanteau_pvalue(stat, lags, fitted_params)
    if np.allclose(rho, 0.0):
        stat, pval = 0.0, 1.0
    return TestResult(stat, pval, lags, df)


def arch_lm(resid, lags: int) -> TestResult:
    """Engle's LM test: regress squared residuals on their own lags.

    The statistic is (n - lags) * R^2 against chi-squared with `lags` degrees
    of freedom; a constant squared series gives statistic 0 and p-value 1.
    """
    resid = np.asarray(resid, dtype=float)
    n = resid.size
    if lags >= n - 1:
        raise ValueError(f"lags {lags} too large for sample size {n}")
    e2 = resid**2
    y = e2[lags:]
    design = np.column_stack(
        [np.ones(n - lags)] + [e2[lags - k : n - k] for k in range(1, lags + 1)]
    )
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss < 1e-300:
        return TestResult(0.0, 1.0, lags, lags)
    coefs, *_ = np.linalg.lstsq(design, y, rcond=None)
    rss = float(np.sum((y - design @ coefs) ** 2))
    r2 = max(0.0, 1.0 - rss / tss)
    stat = (n - lags) * r2
    return TestResult(float(stat), float(stats.chi2.sf(stat, lags)), lags, lags)


def default_lag_count(n: int) -> int:
    """min(10, floor(n/5)); zero flags a series too short for portmanteau tests."""
    if n < 1:
        raise ValueError("n must be positive")
    return min(10, math.floor(n / 5))
