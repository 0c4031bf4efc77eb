"""Data generation from the beta ARMA process and the scenario runner.

run_scenario reproduces the simulation design: per replicate, simulate n + H
points, fit on the first n, build the requested intervals, and score them
against the held-out H points. Everything is deterministic given the master
seed; replicates may run across worker processes and are aggregated by index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from typing import Optional, Sequence

import numpy as np

from barma._rng import derive_seed, stream
from barma.evaluation import EvaluationReport, average_length, awd, coverage_rates, cwc, picp, pinaw, winkler
from barma.forecast import forecast_set
from barma.intervals import (
    BootstrapConfig,
    Method,
    bca_interval,
    bj_interval,
    bootstrap_draws,
    bpe_interval,
    percentile_interval,
    qbeta_interval,
)
from barma.model import (
    ConvergenceError,
    DegenerateSeriesError,
    FitOptions,
    ModelSpec,
    ParameterVector,
    TimeSeries,
    fit_cmle,
)
from barma.special import Link, link_apply, link_invert, link_eta_bounds

__all__ = [
    "Scenario",
    "ScenarioRunConfig",
    "built_in_scenarios",
    "simulate_barma",
    "run_scenario",
    "sensitivity_run",
]

BURN_IN = 100
MAX_REDRAWS = 25

ALL_METHODS = (
    Method.BJ,
    Method.QBETA,
    Method.BPE,
    Method.BCA,
    Method.BLOCK_PERCENTILE,
    Method.RESIDUAL_PERCENTILE,
)


@dataclass(frozen=True)
class Scenario:
    """One simulation design: model, true coefficients, and run geometry."""

    label: str
    spec: ModelSpec
    truth: ParameterVector
    n: int = 100
    horizon: int = 10
    alpha: float = 0.10

    def __post_init__(self):
        self.truth.validate_for(self.spec)


@dataclass
class ScenarioRunConfig:
    """Replication count, bootstrap settings, and method subset."""

    replications: int = 1000
    boot: BootstrapConfig = field(default_factory=lambda: BootstrapConfig(B=1000))
    methods: Sequence[Method] = ALL_METHODS
    master_seed: int = 0
    threads: int = 1
    kappa: float = 2.0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be positive")
        self.methods = tuple(Method.parse(m) for m in self.methods)


def built_in_scenarios() -> list[Scenario]:
    """The six simulation designs (logit link, precision 120, n=100, H=10)."""

    def pv(beta, ar, ma):
        return ParameterVector(beta=beta, ar=np.asarray(ar), ma=np.asarray(ma), precision=120.0)

    return [
        Scenario("I", ModelSpec(p=1, q=1), pv(-0.3, [-0.4], [0.3])),
        Scenario("II", ModelSpec(p=1, q=1), pv(0.95, [0.65], [-0.95])),
        Scenario("III", ModelSpec(p=2, q=0), pv(-0.3, [0.8, -0.8], [])),
        Scenario("IV", ModelSpec(p=2, q=0), pv(0.9, [0.3, 0.3], [])),
        Scenario("V", ModelSpec(p=0, q=2), pv(-0.8, [], [0.8, -0.8])),
        Scenario("VI", ModelSpec(p=0, q=2), pv(1.5, [], [-0.2, 0.6])),
    ]


def scenario_by_label(label: str) -> Scenario:
    for sc in built_in_scenarios():
        if sc.label.lower() == str(label).strip().lower():
            return sc
    raise ValueError(f"unknown scenario {label!r}; expected I..VI")


def simulate_barma(
    scenario: Scenario, length: int, rng: np.random.Generator, burn_in: int = BURN_IN
) -> TimeSeries:
    """Simulate a beta ARMA path of the given length after a discarded burn-in.

    Presample predictor values come from draws at the unconditional intercept
    level g^{-1}(beta); presample error terms are zero.
    """
    spec = scenario.spec
    truth = scenario.truth
    m = spec.m
    if length < m + 1:
        raise ValueError(f"length must exceed the presample m={m}")
    link = spec.link
    eta_lo, eta_hi = link_eta_bounds(link)
    mu0 = link_invert(link, truth.beta)
    phi = truth.precision

    total = burn_in + length
    x = np.empty(m + total)
    r = np.zeros(m + total)
    y = np.empty(m + total)
    if m > 0:
        y_pre = rng.beta(mu0 * phi, (1.0 - mu0) * phi, size=m)
        y[:m] = y_pre
        x[:m] = link_apply(link, y_pre)
    for t in range(m, m + total):
        eta = truth.beta
        for coef, lag in zip(truth.ar, spec.ar_lags):
            eta += coef * x[t - lag]
        for coef, lag in zip(truth.ma, spec.ma_lags):
            eta += coef * r[t - lag]
        eta = min(max(eta, eta_lo), eta_hi)
        mu = link_invert(link, eta)
        yt = float(rng.beta(mu * phi, (1.0 - mu) * phi))
        yt = min(max(yt, 1e-12), 1.0 - 1e-12)
        y[t] = yt
        x[t] = link_apply(link, yt)
        r[t] = x[t] - eta
    return TimeSeries(y[m + burn_in :])


def _replicate(args) -> dict:
    scenario, methods, B, block_length, master_seed, rep, kappa = args
    H = scenario.horizon
    n = scenario.n
    fit = None
    for attempt in range(MAX_REDRAWS):
        rng = stream(master_seed, rep, attempt)
        full = simulate_barma(scenario, n + H, rng)
        train = TimeSeries(full.values[:n])
        actual = full.values[n:]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fit = fit_cmle(train, scenario.spec, FitOptions(compute_se=False))
            break
        except (ConvergenceError, DegenerateSeriesError, ValueError):
            continue
    if fit is None:
        raise ConvergenceError(
            f"replicate {rep}: no convergent fit after {MAX_REDRAWS} redraws"
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        forecasts = forecast_set(fit, train, H)

    out = {
        "rep": rep,
        "actual": actual,
        "range": float(np.ptp(train.values)),
        "redraws": attempt,
        "discards": 0,
        "intervals": {},
    }
    alpha = scenario.alpha
    boot_seed = derive_seed(master_seed, 9001, rep)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        need_parametric = Method.BPE in methods or Method.BCA in methods
        if need_parametric:
            cfg = BootstrapConfig(B=B, scheme="parametric", seed=boot_seed)
            draws = bootstrap_draws(fit, train, forecasts, cfg)
            out["discards"] += draws.n_discarded
            if Method.BPE in methods:
                iv = bpe_interval(fit, train, forecasts, alpha, cfg, draws=draws)
                out["intervals"][Method.BPE] = (iv.lower, iv.upper)
            if Method.BCA in methods:
                iv, _ = bca_interval(fit, train, forecasts, alpha, cfg, draws=draws)
                out["intervals"][Method.BCA] = (iv.lower, iv.upper)
        if Method.BJ in methods:
            iv = bj_interval(forecasts, fit, alpha)
            out["intervals"][Method.BJ] = (iv.lower, iv.upper)
        if Method.QBETA in methods:
            iv = qbeta_interval(forecasts, alpha)
            out["intervals"][Method.QBETA] = (iv.lower, iv.upper)
        if Method.RESIDUAL_PERCENTILE in methods:
            cfg = BootstrapConfig(B=B, scheme="residual", seed=boot_seed)
            draws = bootstrap_draws(fit, train, forecasts, cfg)
            out["discards"] += draws.n_discarded
            iv = percentile_interval(fit, train, forecasts, alpha, cfg, draws=draws)
            out["intervals"][Method.RESIDUAL_PERCENTILE] = (iv.lower, iv.upper)
        if Method.BLOCK_PERCENTILE in methods:
            cfg = BootstrapConfig(
                B=B, scheme="block", block_length=block_length, seed=boot_seed
            )
            draws = bootstrap_draws(fit, train, forecasts, cfg)
            out["discards"] += draws.n_discarded
            iv = percentile_interval(fit, train, forecasts, alpha, cfg, draws=draws)
            out["intervals"][Method.BLOCK_PERCENTILE] = (iv.lower, iv.upper)
    return out


def run_scenario(scenario: Scenario, config: ScenarioRunConfig) -> dict:
    """Monte Carlo evaluation of the requested interval methods.

    Returns {"reports": {Method: EvaluationReport}, "redraws": int,
    "bootstrap_discards": int}.
    """
    R = config.replications
    tasks = [
        (
            scenario,
            tuple(config.methods),
            config.boot.B,
            config.boot.block_length,
            config.master_seed,
            rep,
            config.kappa,
        )
        for rep in range(R)
    ]
    if config.threads > 1:
        with Pool(processes=config.threads) as pool:
            results = list(pool.imap_unordered(_replicate, tasks, chunksize=1))
    else:
        results = [_replicate(t) for t in tasks]
    results.sort(key=lambda d: d["rep"])

    actual = np.vstack([res["actual"] for res in results])
    ranges = np.array([res["range"] for res in results])
    redraws = sum(res["redraws"] for res in results)
    discards = sum(res["discards"] for res in results)

    reports = {}
    for method in config.methods:
        lower = np.vstack([res["intervals"][method][0] for res in results])
        upper = np.vstack([res["intervals"][method][1] for res in results])
        cr, crl, cru = coverage_rates(lower, upper, actual)
        lengths = average_length(lower, upper)
        p = picp(cr)
        w = pinaw(lengths, float(np.mean(ranges)))
        s_bars = []
        awd_bars = []
        for i in range(lower.shape[0]):
            _, s_bar = winkler(lower[i], upper[i], actual[i], scenario.alpha)
            s_bars.append(s_bar)
            try:
                _, a_bar = awd(lower[i], upper[i], actual[i])
            except ValueError:
                a_bar = float("nan")
            awd_bars.append(a_bar)
        reports[method] = EvaluationReport(
            cr=cr,
            cr_lower=crl,
            cr_upper=cru,
            avg_length=lengths,
            picp=p,
            pinaw=w,
            cwc=cwc(p, w, scenario.alpha, config.kappa),
            kappa=config.kappa,
            winkler_mean=float(np.nanmean(s_bars)),
            awd=float(np.nanmean(awd_bars)),
            n_replicates=R,
        )
    return {"reports": reports, "redraws": redraws, "bootstrap_discards": discards}


def sensitivity_run(
    series,
    spec: ModelSpec,
    holdout: int,
    b_grid: Sequence[int],
    alpha: float = 0.10,
    seed: int = 0,
    kappa: float = 2.0,
    method: Method = Method.BCA,
) -> list[dict]:
    """Interval metrics across bootstrap sizes B against one held-out window.

    Streams are keyed by replicate index, so a larger B extends (rather than
    reshuffles) the replicate set of a smaller one.
    """
    if not b_grid:
        raise ValueError("b_grid must be nonempty")
    method = Method.parse(method)
    values = np.asarray(series, dtype=float) if not isinstance(series, TimeSeries) else series.values
    if holdout < 1 or holdout >= values.size:
        raise ValueError("holdout must leave a nonempty training window")
    train = TimeSeries(values[:-holdout])
    actual = values[-holdout:]
    H = holdout
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = fit_cmle(train, spec)
        forecasts = forecast_set(fit, train, H)
    rows = []
    series_range = float(np.ptp(train.values))
    for B in b_grid:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if method == Method.BCA:
                cfg = BootstrapConfig(B=int(B), scheme="parametric", seed=seed)
                iv, _ = bca_interval(fit, train, forecasts, alpha, cfg)
            elif method == Method.BPE:
                cfg = BootstrapConfig(B=int(B), scheme="parametric", seed=seed)
                iv = bpe_interval(fit, train, forecasts, alpha, cfg)
            else:
                scheme = "residual" if method == Method.RESIDUAL_PERCENTILE else "block"
                cfg = BootstrapConfig(B=int(B), scheme=scheme, seed=seed)
                iv = percentile_interval(fit, train, forecasts, alpha, cfg)
        cr, _, _ = coverage_rates(iv.lower, iv.upper, actual)
        lengths = average_length(iv.lower, iv.upper)
        p = picp(cr)
        w = pinaw(lengths, series_range)
        _, s_bar = winkler(iv.lower, iv.upper, actual, alpha)
        try:
            _, awd_bar = awd(iv.lower, iv.upper, actual)
        except ValueError:
            awd_bar = float("nan")
        rows.append(
            {
                "B": int(B),
                "picp": p,
                "pinaw": w,
                "cwc": cwc(p, w, alpha, kappa),
                "score": s_bar,
                "awd": awd_bar,
            }
        )
    return rows
