"""Beta ARMA model: specification, conditional likelihood, and CMLE fitting.

The conditional mean follows the predictor-scale recursion

    eta_t = beta + sum_i phi_i g(y_{t-i}) + sum_j theta_j r_{t-j},
    mu_t = g^{-1}(eta_t),  r_t = g(y_t) - g(mu_t),

with presample error terms set to zero and the likelihood conditioned on the
first m = max(p, q) observations. Estimation maximizes the conditional beta
log-likelihood with a quasi-Newton optimizer on (beta, phi, theta, log phi_prec)
using central-difference gradients.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from barma._backend import kernels
from barma.special import Link, link_apply, link_derivative, link_eta_bounds, link_invert

__all__ = [
    "TimeSeries",
    "ModelSpec",
    "ParameterVector",
    "FitResult",
    "FitOptions",
    "ConvergenceError",
    "DegenerateSeriesError",
    "as_series",
    "conditional_means",
    "log_likelihood",
    "fit_cmle",
    "residuals",
    "select_order",
]


class ConvergenceError(RuntimeError):
    """Optimizer failed to reach the gradient tolerance."""


class DegenerateSeriesError(ValueError):
    """Series carries no usable variation."""


class TimeSeries:
    """Ordered observations strictly inside (0,1)."""

    __slots__ = ("values",)

    def __init__(self, values: Sequence[float]):
        arr = np.ascontiguousarray(values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("series must be a non-empty 1-D sequence")
        if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
            bad = np.where(~((arr > 0.0) & (arr < 1.0)))[0]
            raise ValueError(
                f"series values must lie strictly inside (0,1); offending rows {bad[:10].tolist()}"
            )
        self.values = arr

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, idx):
        return self.values[idx]


def as_series(series) -> TimeSeries:
    return series if isinstance(series, TimeSeries) else TimeSeries(series)


@dataclass(frozen=True)
class ModelSpec:
    """Orders, lag subsets, link choice, and intercept flag."""

    p: int = 0
    q: int = 0
    ar_lags: tuple[int, ...] = ()
    ma_lags: tuple[int, ...] = ()
    link: Link = Link.LOGIT
    include_intercept: bool = True

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("orders must be nonnegative")
        ar = tuple(self.ar_lags) if self.ar_lags else tuple(range(1, self.p + 1))
        ma = tuple(self.ma_lags) if self.ma_lags else tuple(range(1, self.q + 1))
        if self.p > 0 and not ar:
            raise ValueError("ar_lags must be nonempty when p > 0")
        if self.q > 0 and not ma:
            raise ValueError("ma_lags must be nonempty when q > 0")
        if any(l < 1 or l > self.p for l in ar) or len(set(ar)) != len(ar):
            raise ValueError(f"ar_lags must be a subset of 1..{self.p}")
        if any(l < 1 or l > self.q for l in ma) or len(set(ma)) != len(ma):
            raise ValueError(f"ma_lags must be a subset of 1..{self.q}")
        if self.p + self.q == 0 and not self.include_intercept:
            raise ValueError("model needs at least one term (orders or intercept)")
        object.__setattr__(self, "ar_lags", ar)
        object.__setattr__(self, "ma_lags", ma)
        object.__setattr__(self, "link", Link.parse(self.link))

    @property
    def m(self) -> int:
        """Presample length conditioning the likelihood."""
        return max(self.p, self.q)

    @property
    def n_params(self) -> int:
        return int(self.include_intercept) + len(self.ar_lags) + len(self.ma_lags) + 1

    def _lag_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.asarray(self.ar_lags, dtype=np.int64),
            np.asarray(self.ma_lags, dtype=np.int64),
        )


@dataclass
class ParameterVector:
    """Coefficients (beta, phi_1..phi_p, theta_1..theta_q, precision)."""

    beta: float
    ar: np.ndarray
    ma: np.ndarray
    precision: float

    def __post_init__(self):
        self.ar = np.atleast_1d(np.asarray(self.ar, dtype=float))
        self.ma = np.atleast_1d(np.asarray(self.ma, dtype=float)) if np.size(self.ma) else np.empty(0)
        if not self.precision > 0.0:
            raise ValueError(f"precision must be positive, got {self.precision}")

    def validate_for(self, spec: ModelSpec) -> None:
        if self.ar.size != len(spec.ar_lags) or self.ma.size != len(spec.ma_lags):
            raise ValueError(
                f"parameter dimensions ({self.ar.size},{self.ma.size}) do not match "
                f"spec lags ({len(spec.ar_lags)},{len(spec.ma_lags)})"
            )

    def to_array(self, spec: ModelSpec) -> np.ndarray:
        """Natural-space flat layout: [beta?] + phi + theta + [precision]."""
        head = [self.beta] if spec.include_intercept else []
        return np.concatenate([head, self.ar, self.ma, [self.precision]])

    @classmethod
    def from_array(cls, arr: np.ndarray, spec: ModelSpec) -> "ParameterVector":
        off = 1 if spec.include_intercept else 0
        p, q = len(spec.ar_lags), len(spec.ma_lags)
        return cls(
            beta=float(arr[0]) if spec.include_intercept else 0.0,
            ar=arr[off : off + p].copy(),
            ma=arr[off + p : off + p + q].copy(),
            precision=float(arr[off + p + q]),
        )


@dataclass
class FitResult:
    """Everything produced by a conditional ML fit."""

    spec: ModelSpec
    estimates: ParameterVector
    standard_errors: Optional[ParameterVector]
    fitted_means: np.ndarray
    linear_predictors: np.ndarray
    error_terms: np.ndarray
    loglik: float
    aic: float
    m: int
    n_obs: int
    converged: bool = True
    n_iter: int = 0
    message: str = ""
    n_clamped: int = 0

    @property
    def n_params(self) -> int:
        return self.spec.n_params


@dataclass
class FitOptions:
    """Optimizer settings for fit_cmle."""

    x0: Optional[ParameterVector] = None
    maxiter: int = 500
    gtol: float = 1e-6
    compute_se: bool = True
    logprec_bounds: tuple[float, float] = (-10.0, 20.0)


def _kernel_inputs(series: TimeSeries, spec: ModelSpec):
    y = series.values
    x = np.ascontiguousarray(link_apply(spec.link, y))
    ly = np.ascontiguousarray(np.log(y))
    l1y = np.ascontiguousarray(np.log1p(-y))
    ar_lags, ma_lags = spec._lag_arrays()
    eta_lo, eta_hi = link_eta_bounds(spec.link)
    return x, ly, l1y, ar_lags, ma_lags, eta_lo, eta_hi


def conditional_means(series, spec: ModelSpec, params: ParameterVector):
    """Run the mean recursion; returns (eta, mu, r) with NaN presample in eta/mu."""
    series = as_series(series)
    params.validate_for(spec)
    if len(series) <= spec.m:
        raise ValueError(f"series length {len(series)} must exceed presample m={spec.m}")
    x, _, _, ar_lags, ma_lags, eta_lo, eta_hi = _kernel_inputs(series, spec)
    eta, mu, r, _ = kernels.filter_series(
        x, params.beta, params.ar, ar_lags, params.ma, ma_lags,
        spec.m, spec.link.code, eta_lo, eta_hi,
    )
    return eta, mu, r


def log_likelihood(series, spec: ModelSpec, params: ParameterVector) -> float:
    """Conditional log-likelihood, summed over t = m+1..n."""
    series = as_series(series)
    params.validate_for(spec)
    if len(series) <= spec.m:
        raise ValueError(f"series length {len(series)} must exceed presample m={spec.m}")
    x, ly, l1y, ar_lags, ma_lags, eta_lo, eta_hi = _kernel_inputs(series, spec)
    ll = kernels.loglik(
        x, ly, l1y, params.beta, params.ar, ar_lags, params.ma, ma_lags,
        params.precision, spec.m, spec.link.code, eta_lo, eta_hi,
    )
    return ll if math.isfinite(ll) else -math.inf


def _initial_values(series: TimeSeries, spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    """OLS of g(y_t) on its selected lags for (beta, phi); theta 0; phi_prec by moments."""
    m = spec.m
    n = x.size
    t_idx = np.arange(m, n)
    cols = [np.ones(t_idx.size)] if spec.include_intercept else []
    cols += [x[t_idx - lag] for lag in spec.ar_lags]
    if cols:
        design = np.column_stack(cols)
        coefs, *_ = np.linalg.lstsq(design, x[t_idx], rcond=None)
        resid = x[t_idx] - design @ coefs
    else:
        coefs = np.empty(0)
        resid = x[t_idx]
    sigma2 = float(np.mean(resid**2))
    mu_bar = link_invert(spec.link, float(np.mean(x)))
    gp = link_derivative(spec.link, mu_bar)
    var_scale = gp**2 * mu_bar * (1.0 - mu_bar)
    prec0 = var_scale / sigma2 - 1.0 if sigma2 > 0 else 1e4
    prec0 = float(np.clip(prec0, 1.0, 1e6))
    off = 1 if spec.include_intercept else 0
    vec = np.zeros(spec.n_params)
    if spec.include_intercept:
        vec[0] = coefs[0] if coefs.size else 0.0
    vec[off : off + len(spec.ar_lags)] = coefs[off:] if coefs.size else 0.0
    vec[-1] = math.log(prec0)
    return vec


def _natural_nll(vec_nat, spec, x, ly, l1y, ar_lags, ma_lags, eta_lo, eta_hi):
    params = ParameterVector.from_array(vec_nat, spec)
    return -kernels.loglik(
        x, ly, l1y, params.beta, params.ar, ar_lags, params.ma, ma_lags,
        params.precision, spec.m, spec.link.code, eta_lo, eta_hi,
    )


def _hessian_standard_errors(vec_nat, spec, args) -> Optional[np.ndarray]:
    """SEs from the inverse central-difference Hessian of the natural-space NLL."""
    k = vec_nat.size
    steps = np.maximum(1e-4 * np.maximum(1.0, np.abs(vec_nat)), 1e-7)
    steps[-1] = min(steps[-1], vec_nat[-1] / 2.0)  # keep precision positive
    H = np.empty((k, k))

    def f(v):
        return _natural_nll(v, spec, *args)

    f0 = f(vec_nat)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = steps[i]
        H[i, i] = (f(vec_nat + ei) - 2.0 * f0 + f(vec_nat - ei)) / steps[i] ** 2
    for i in range(k):
        for j in range(i + 1, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = steps[i]
            ej[j] = steps[j]
            val = (
                f(vec_nat + ei + ej)
                - f(vec_nat + ei - ej)
                - f(vec_nat - ei + ej)
                + f(vec_nat - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
            H[i, j] = H[j, i] = val
    if not np.all(np.isfinite(H)):
        return None
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        return None
    diag = np.diag(cov)
    if np.any(diag <= 0.0) or not np.all(np.isfinite(diag)):
        return None
    return np.sqrt(diag)


def fit_cmle(series, spec: ModelSpec, options: Optional[FitOptions] = None) -> FitResult:
    """Fit a beta ARMA model by conditional maximum likelihood.

    Parameters
    ----------
    series : TimeSeries or array-like
        Observations strictly inside (0,1).
    spec : ModelSpec
        Orders, lag subsets, link, and intercept flag.
    options : FitOptions, optional
        Starting values, iteration cap, tolerance, and whether to compute
        standard errors (skipping them speeds up bootstrap refits).

    Raises
    ------
    DegenerateSeriesError
        If the series is (numerically) constant.
    ConvergenceError
        If the optimizer stops without satisfying the gradient criterion.
    """
    series = as_series(series)
    opts = options or FitOptions()
    m = spec.m
    n = len(series)
    if n <= m:
        raise ValueError(f"series length {n} must exceed presample m={m}")
    if float(np.ptp(series.values)) < 1e-10:
        raise DegenerateSeriesError("series is constant; likelihood is degenerate")
    if n < 10 * (spec.p + spec.q + 2):
        warnings.warn(
            f"series length {n} below recommended 10*(p+q+2)={10 * (spec.p + spec.q + 2)}",
            UserWarning,
            stacklevel=2,
        )

    x, ly, l1y, ar_lags, ma_lags, eta_lo, eta_hi = _kernel_inputs(series, spec)
    if opts.x0 is not None:
        opts.x0.validate_for(spec)
        vec0 = opts.x0.to_array(spec)
        vec0[-1] = math.log(vec0[-1])
    else:
        vec0 = _initial_values(series, spec, x)
    vec0[-1] = float(np.clip(vec0[-1], *opts.logprec_bounds))

    vec_opt, f_final, n_iter, n_fev, grad_inf, converged = kernels.bfgs_fit(
        np.ascontiguousarray(vec0), x, ly, l1y, ar_lags, ma_lags,
        m, spec.link.code, eta_lo, eta_hi, spec.include_intercept,
        opts.gtol, opts.maxiter, opts.logprec_bounds[0], opts.logprec_bounds[1],
    )
    # spec tolerance is the target; accept optima whose numeric gradient is
    # small relative to the likelihood scale
    grad_ok = grad_inf < 1e-3 * max(1.0, abs(f_final))
    converged = bool(converged) or grad_ok
    message = f"BFGS: {n_iter} iterations, {n_fev} evaluations, |grad|_inf={grad_inf:.3g}"
    if not converged or not math.isfinite(f_final):
        raise ConvergenceError(f"CMLE did not converge: {message} (nll={f_final:.6g})")

    vec_nat = np.asarray(vec_opt, dtype=float).copy()
    vec_nat[-1] = math.exp(min(vec_nat[-1], 25.0))
    estimates = ParameterVector.from_array(vec_nat, spec)
    eta, mu, r, n_clamped = kernels.filter_series(
        x, estimates.beta, estimates.ar, ar_lags, estimates.ma, ma_lags,
        m, spec.link.code, eta_lo, eta_hi,
    )
    loglik = -f_final
    aic = -2.0 * loglik + 2.0 * spec.n_params

    se = None
    if opts.compute_se:
        se_arr = _hessian_standard_errors(
            vec_nat, spec, (x, ly, l1y, ar_lags, ma_lags, eta_lo, eta_hi)
        )
        if se_arr is None:
            warnings.warn(
                "Hessian singular or indefinite; standard errors unavailable",
                UserWarning,
                stacklevel=2,
            )
        else:
            se = ParameterVector.from_array(np.abs(se_arr), spec)
            if not spec.include_intercept:
                se.beta = 0.0

    return FitResult(
        spec=spec,
        estimates=estimates,
        standard_errors=se,
        fitted_means=mu,
        linear_predictors=eta,
        error_terms=r,
        loglik=loglik,
        aic=aic,
        m=m,
        n_obs=n,
        converged=converged,
        n_iter=int(n_iter),
        message=message,
        n_clamped=int(n_clamped),
    )


def residuals(fit: FitResult, series, kind: str = "R2") -> np.ndarray:
    """Residuals over t = m+1..n.

    R1 is the ordinary predictor-scale error g(y_t) - g(mu_t); R2 standardizes
    R1 by the error-variance approximation; R3 standardizes logit(y_t) against
    its digamma-based mean and trigamma-based variance under the fitted beta law.
    """
    from scipy import special as sp

    series = as_series(series)
    m = fit.m
    y = series.values[m:]
    mu = fit.fitted_means[m:]
    phi = fit.estimates.precision
    link = fit.spec.link
    kind = kind.upper()
    if kind == "R1":
        return fit.error_terms[m:].copy()
    if kind == "R2":
        sd = np.sqrt(link_derivative(link, mu) ** 2 * mu * (1.0 - mu) / (1.0 + phi))
        return fit.error_terms[m:] / sd
    if kind == "R3":
        y_star = np.log(y) - np.log1p(-y)
        mu_star = sp.psi(mu * phi) - sp.psi((1.0 - mu) * phi)
        nu = sp.polygamma(1, mu * phi) + sp.polygamma(1, (1.0 - mu) * phi)
        return (y_star - mu_star) / np.sqrt(nu)
    raise ValueError(f"unknown residual kind {kind!r}; expected R1, R2, or R3")


@dataclass
class OrderSearchResult:
    spec: ModelSpec
    fit: FitResult
    candidates: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def select_order(
    series,
    max_order: int,
    significance: float = 0.1,
    link: Link = Link.LOGIT,
    include_intercept: bool = True,
) -> OrderSearchResult:
    """Exhaustive AIC search over orders p, q <= max_order.

    The best-AIC model is pruned of lags whose coefficients are insignificant
    at the given level (two-sided normal test) and refit on the reduced lag
    set; ties in AIC are broken by fewer parameters, then lower q.
    """
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    series = as_series(series)
    candidates = []
    failures = []
    for p in range(max_order + 1):
        for q in range(max_order + 1):
            if p == 0 and q == 0 and not include_intercept:
                continue
            spec = ModelSpec(p=p, q=q, link=link, include_intercept=include_intercept)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    fit = fit_cmle(series, spec)
            except Exception as exc:
                failures.append((p, q, str(exc)))
                continue
            candidates.append((fit.aic, spec.n_params, q, spec, fit))
    if not candidates:
        raise ConvergenceError(
            f"all {len(failures)} candidate models failed to converge"
        )
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    _, _, _, best_spec, best_fit = candidates[0]

    pruned = _prune_insignificant(series, best_spec, best_fit, significance)
    if pruned is not None:
        best_spec, best_fit = pruned
    table = [
        {"p": s.p, "q": s.q, "aic": aic, "converged": True}
        for aic, _, _, s, _ in candidates
    ]
    table += [{"p": p, "q": q, "aic": None, "converged": False} for p, q, _ in failures]
    return OrderSearchResult(spec=best_spec, fit=best_fit, candidates=table, failures=failures)


def _prune_insignificant(series, spec, fit, significance):
    from scipy import stats

    if fit.standard_errors is None or spec.p + spec.q == 0:
        return None
    est, se = fit.estimates, fit.standard_errors
    keep_ar = []
    for lag, coef, s in zip(spec.ar_lags, est.ar, se.ar):
        pval = 2.0 * stats.norm.sf(abs(coef / s)) if s > 0 else 0.0
        if pval <= significance:
            keep_ar.append(lag)
    keep_ma = []
    for lag, coef, s in zip(spec.ma_lags, est.ma, se.ma):
        pval = 2.0 * stats.norm.sf(abs(coef / s)) if s > 0 else 0.0
        if pval <= significance:
            keep_ma.append(lag)
    if tuple(keep_ar) == spec.ar_lags and tuple(keep_ma) == spec.ma_lags:
        return None
    if not keep_ar and not keep_ma and not spec.include_intercept:
        return None
    reduced = ModelSpec(
        p=max(keep_ar) if keep_ar else 0,
        q=max(keep_ma) if keep_ma else 0,
        ar_lags=tuple(keep_ar),
        ma_lags=tuple(keep_ma),
        link=spec.link,
        include_intercept=spec.include_intercept,
    )
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            refit = fit_cmle(series, reduced)
    except Exception:
        return None
    return reduced, refit
