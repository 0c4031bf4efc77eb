"""Distribution and link-function primitives shared by all modules.

Beta distributions are handled in mean/precision form: Beta(mu, phi) has
shape parameters a = mu*phi and b = (1-mu)*phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special as sp

__all__ = [
    "Link",
    "BetaMeanPrecision",
    "log_beta_density",
    "beta_cdf",
    "beta_quantile",
    "polygamma",
    "normal_cdf",
    "normal_quantile",
    "link_apply",
    "link_invert",
    "link_derivative",
]

_MU_EPS = 1e-12


class Link(Enum):
    """Strictly monotone, twice-differentiable maps (0,1) -> R."""

    LOGIT = "logit"
    PROBIT = "probit"
    CLOGLOG = "cloglog"

    @property
    def code(self) -> int:
        return {"logit": 0, "probit": 1, "cloglog": 2}[self.value]

    @classmethod
    def parse(cls, name) -> "Link":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown link {name!r}; expected logit, probit, or cloglog")


@dataclass(frozen=True)
class BetaMeanPrecision:
    """Beta distribution parametrized by mean in (0,1) and precision > 0."""

    mean: float
    precision: float

    def __post_init__(self):
        if not (0.0 < self.mean < 1.0):
            raise ValueError(f"mean must lie in (0,1), got {self.mean}")
        if not self.precision > 0.0:
            raise ValueError(f"precision must be positive, got {self.precision}")

    @property
    def a(self) -> float:
        return self.mean * self.precision

    @property
    def b(self) -> float:
        return (1.0 - self.mean) * self.precision

    @property
    def variance(self) -> float:
        return self.mean * (1.0 - self.mean) / (1.0 + self.precision)


def log_beta_density(y, dist: BetaMeanPrecision):
    """Log density of Beta(mean, precision) at y, via log-gamma."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0) or np.any(y >= 1.0):
        raise ValueError("y must lie strictly inside (0,1)")
    a, b = dist.a, dist.b
    out = (
        math.lgamma(dist.precision)
        - math.lgamma(a)
        - math.lgamma(b)
        + (a - 1.0) * np.log(y)
        + (b - 1.0) * np.log1p(-y)
    )
    return float(out) if out.ndim == 0 else out


def beta_cdf(x, dist: BetaMeanPrecision):
    """Regularized incomplete beta I_x(a, b)."""
    return sp.betainc(dist.a, dist.b, x)


def beta_quantile(p, dist: BetaMeanPrecision):
    """Quantile of Beta(mean, precision); inverse of beta_cdf.

    The library inverse is polished with safeguarded Newton steps on the
    regularized incomplete beta until the CDF residual stops improving.
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise ValueError("p must lie strictly inside (0,1)")
    a, b = dist.a, dist.b
    x = np.clip(sp.betaincinv(a, b, p_arr), 1e-300, 1.0 - 1e-16)
    log_norm = sp.gammaln(a + b) - sp.gammaln(a) - sp.gammaln(b)
    for _ in range(3):
        resid = sp.betainc(a, b, x) - p_arr
        if np.max(np.abs(resid)) < 1e-14:
            break
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            pdf = np.exp(log_norm + (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x))
            step = np.where(pdf > 0, resid / np.maximum(pdf, 1e-300), 0.0)
        x = np.clip(x - step, x / 2.0, (1.0 + x) / 2.0)
    out = x
    return float(out) if out.ndim == 0 else out


def polygamma(order: int, x):
    """psi (order 0), psi' (order 1), or psi'' (order 2) at x > 0."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1, or 2, got {order}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0):
        raise ValueError("x must be positive")
    out = sp.psi(x_arr) if order == 0 else sp.polygamma(order, x_arr)
    return float(out) if out.ndim == 0 else out


def normal_cdf(x):
    out = sp.ndtr(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def normal_quantile(p):
    """Inverse standard normal CDF."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise ValueError("p must lie strictly inside (0,1)")
    out = sp.ndtri(p_arr)
    return float(out) if out.ndim == 0 else out


def link_apply(link: Link, mu):
    """g(mu); domain error on the boundary of (0,1)."""
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(mu_arr <= 0.0) or np.any(mu_arr >= 1.0):
        raise ValueError("mu must lie strictly inside (0,1)")
    if link == Link.LOGIT:
        out = np.log(mu_arr) - np.log1p(-mu_arr)
    elif link == Link.PROBIT:
        out = sp.ndtri(mu_arr)
    else:
        out = np.log(-np.log1p(-mu_arr))
    return float(out) if out.ndim == 0 else out


def link_invert(link: Link, eta):
    """g^{-1}(eta), mapped into (0,1) and clipped away from the boundary."""
    eta_arr = np.asarray(eta, dtype=float)
    if link == Link.LOGIT:
        out = sp.expit(eta_arr)
    elif link == Link.PROBIT:
        out = sp.ndtr(eta_arr)
    else:
        out = -np.expm1(-np.exp(eta_arr))
    out = np.clip(out, _MU_EPS, 1.0 - _MU_EPS)
    return float(out) if out.ndim == 0 else out


def link_derivative(link: Link, mu):
    """dg/dmu, strictly positive on (0,1)."""
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(mu_arr <= 0.0) or np.any(mu_arr >= 1.0):
        raise ValueError("mu must lie strictly inside (0,1)")
    if link == Link.LOGIT:
        out = 1.0 / (mu_arr * (1.0 - mu_arr))
    elif link == Link.PROBIT:
        out = 1.0 / np.maximum(
            np.exp(-0.5 * sp.ndtri(mu_arr) ** 2) / math.sqrt(2.0 * math.pi), 1e-300
        )
    else:
        out = -1.0 / ((1.0 - mu_arr) * np.log1p(-mu_arr))
    return float(out) if out.ndim == 0 else out


def link_eta_bounds(link: Link) -> tuple[float, float]:
    """Predictor clamp keeping mu inside [1e-12, 1-1e-12]."""
    lo = link_apply(link, _MU_EPS)
    hi = link_apply(link, 1.0 - _MU_EPS)
    return float(lo), float(hi)
