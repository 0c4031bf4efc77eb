"""Command-line interface: data ingestion, fitting, forecasting, intervals,
simulation studies, evaluation, and sensitivity analysis.

Every command writes a machine-readable report (JSON), flat CSV tables, a
plot-data CSV where forecasts are produced, and a run manifest capturing the
resolved configuration, seed, version, and input digest. Seeds are mandatory
for bootstrap and simulation commands; re-running a manifest reproduces
outputs bitwise.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

import barma
from barma.diagnostics import arch_lm, box_pierce, default_lag_count, ljung_box
from barma.evaluation import evaluate_window
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
    FitOptions,
    ModelSpec,
    TimeSeries,
    fit_cmle,
    residuals,
    select_order,
)
from barma.montecarlo import (
    ScenarioRunConfig,
    scenario_by_label,
    sensitivity_run,
    simulate_barma,
    run_scenario,
)
from barma.special import Link


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- data I/O


def load_series(path, column=None, delimiter=","):
    """Read one observation per row; values must lie strictly inside (0,1).

    `column` selects a header name or zero-based index; rows with missing
    values are rejected with their line numbers.
    """
    path = Path(path)
    if not path.exists():
        raise CliError("E_INPUT", f"input file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise CliError("E_PARSE", f"no data rows in {path}")

    header = None
    col_idx = 0
    first = rows[0]
    if column is not None and not str(column).lstrip("-").isdigit():
        header = [c.strip() for c in first]
        if str(column) not in header:
            raise CliError("E_PARSE", f"column {column!r} not found in header {header}")
        col_idx = header.index(str(column))
        rows = rows[1:]
    else:
        col_idx = int(column) if column is not None else 0
        try:
            float(first[col_idx])
        except (ValueError, IndexError):
            header = [c.strip() for c in first]
            rows = rows[1:]

    values = []
    bad_rows = []
    for i, row in enumerate(rows, start=2 if header else 1):
        if col_idx >= len(row) or not row[col_idx].strip():
            bad_rows.append((i, "missing value"))
            continue
        try:
            v = float(row[col_idx])
        except ValueError:
            bad_rows.append((i, f"unparseable {row[col_idx]!r}"))
            continue
        values.append((i, v))
    if bad_rows:
        detail = "; ".join(f"line {i}: {msg}" for i, msg in bad_rows[:5])
        raise CliError("E_PARSE", f"{len(bad_rows)} bad row(s) in {path}: {detail}")
    out_of_domain = [(i, v) for i, v in values if not (0.0 < v < 1.0)]
    if out_of_domain:
        detail = "; ".join(f"line {i}: {v}" for i, v in out_of_domain[:5])
        raise CliError("E_DOMAIN", f"values outside (0,1): {detail}")
    return TimeSeries([v for _, v in values])


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir: Path, command: str, config: dict, input_path=None):
    manifest = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "version": barma.__version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "input_digest": _sha256(input_path) if input_path else None,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def write_report(outdir: Path, name: str, payload: dict):
    with open(outdir / name, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def read_report(path):
    with open(path) as fh:
        return json.load(fh)


def write_table(outdir: Path, name: str, rows: list[dict], fieldnames=None):
    fieldnames = fieldnames or list(rows[0].keys())
    with open(outdir / name, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def write_plot_data(outdir: Path, name: str, point, lower, upper, actual=None):
    rows = []
    for h in range(len(point)):
        rows.append(
            {
                "h": h + 1,
                "lower": f"{lower[h]:.10g}",
                "upper": f"{upper[h]:.10g}",
                "point": f"{point[h]:.10g}",
                "actual": f"{actual[h]:.10g}" if actual is not None else "",
            }
        )
    write_table(outdir, name, rows, ["h", "lower", "upper", "point", "actual"])


def read_interval_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    lower = np.array([float(r["lower"]) for r in rows])
    upper = np.array([float(r["upper"]) for r in rows])
    return lower, upper


# ---------------------------------------------------------------- config


def load_config_file(path) -> dict:
    """INI sections or a JSON manifest/config; flat key/value mapping out."""
    path = Path(path)
    if not path.exists():
        raise CliError("E_INPUT", f"config file not found: {path}")
    text = path.read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        return data.get("config", data)
    parser = configparser.ConfigParser()
    parser.read_string(text)
    flat = {}
    for section in parser.sections():
        for key, val in parser.items(section):
            flat[key.replace("-", "_")] = val
    return flat


_METHOD_CHOICES = [
    "bj",
    "qbeta",
    "bpe",
    "bca",
    "block",
    "residual",
    "block_percentile",
    "residual_percentile",
    "all",
]


def _resolve_methods(name: str):
    if name == "all":
        return [
            Method.BJ,
            Method.QBETA,
            Method.BPE,
            Method.BCA,
            Method.BLOCK_PERCENTILE,
            Method.RESIDUAL_PERCENTILE,
        ]
    return [Method.parse(name)]


def _spec_from_args(args) -> ModelSpec:
    return ModelSpec(p=args.p, q=args.q, link=Link.parse(args.link))


def _require_seed(args):
    if args.seed is None:
        raise CliError("E_CONFIG", "--seed is required for bootstrap/simulation commands")


def _fit_payload(fit) -> dict:
    est = fit.estimates
    se = fit.standard_errors
    return {
        "estimates": {
            "beta": est.beta,
            "ar": est.ar.tolist(),
            "ma": est.ma.tolist(),
            "precision": est.precision,
        },
        "standard_errors": None
        if se is None
        else {
            "beta": se.beta,
            "ar": se.ar.tolist(),
            "ma": se.ma.tolist(),
            "precision": se.precision,
        },
        "loglik": fit.loglik,
        "aic": fit.aic,
        "n_obs": fit.n_obs,
        "presample": fit.m,
        "n_iter": fit.n_iter,
        "spec": {
            "p": fit.spec.p,
            "q": fit.spec.q,
            "ar_lags": list(fit.spec.ar_lags),
            "ma_lags": list(fit.spec.ma_lags),
            "link": fit.spec.link.value,
            "include_intercept": fit.spec.include_intercept,
        },
    }


def _diagnostics_payload(fit, series) -> dict:
    n = fit.n_obs - fit.m
    lags = default_lag_count(n)
    if lags < 1:
        return {"lags": 0, "note": "series too short for portmanteau tests"}
    resid = residuals(fit, series, "R2")
    fitted = fit.spec.p + fit.spec.q
    bp = box_pierce(resid, lags, fitted)
    lb = ljung_box(resid, lags, fitted)
    lm = arch_lm(resid, lags)
    return {
        "lags": lags,
        "box_pierce": {"statistic": bp.statistic, "p_value": bp.p_value},
        "ljung_box": {"statistic": lb.statistic, "p_value": lb.p_value},
        "arch_lm": {"statistic": lm.statistic, "p_value": lm.p_value},
    }


# ---------------------------------------------------------------- commands


def cmd_fit(args, outdir: Path):
    series = load_series(args.input, args.column, args.delimiter)
    holdout = args.holdout or 0
    if holdout >= len(series):
        raise CliError("E_CONFIG", f"holdout {holdout} exceeds series length {len(series)}")
    train = TimeSeries(series.values[: len(series) - holdout]) if holdout else series
    if args.max_order:
        search = select_order(train, args.max_order, args.significance, Link.parse(args.link))
        fit, spec = search.fit, search.spec
        extra = {"search": search.candidates}
    else:
        spec = _spec_from_args(args)
        fit = fit_cmle(train, spec)
        extra = {}
    payload = _fit_payload(fit)
    payload["diagnostics"] = _diagnostics_payload(fit, train)
    payload["holdout"] = holdout
    payload["train_length"] = len(train)
    payload.update(extra)
    write_report(outdir, "fit.json", payload)
    rows = [
        {"name": "beta", "estimate": fit.estimates.beta,
         "se": fit.standard_errors.beta if fit.standard_errors else ""},
    ]
    for lag, coef in zip(fit.spec.ar_lags, fit.estimates.ar):
        rows.append({"name": f"ar{lag}", "estimate": coef,
                     "se": fit.standard_errors.ar[list(fit.spec.ar_lags).index(lag)] if fit.standard_errors else ""})
    for lag, coef in zip(fit.spec.ma_lags, fit.estimates.ma):
        rows.append({"name": f"ma{lag}", "estimate": coef,
                     "se": fit.standard_errors.ma[list(fit.spec.ma_lags).index(lag)] if fit.standard_errors else ""})
    rows.append({"name": "precision", "estimate": fit.estimates.precision,
                 "se": fit.standard_errors.precision if fit.standard_errors else ""})
    write_table(outdir, "estimates.csv", rows, ["name", "estimate", "se"])
    return payload


def cmd_forecast(args, outdir: Path):
    series = load_series(args.input, args.column, args.delimiter)
    spec = _spec_from_args(args)
    fit = fit_cmle(series, spec)
    fc = forecast_set(fit, series, args.horizon)
    payload = {
        "point": fc.point.tolist(),
        "psi": fc.psi.tolist(),
        "variance": fc.variance.tolist(),
        "precision_h": fc.precision_h.tolist(),
        "horizon": fc.horizon,
    }
    write_report(outdir, "forecast.json", payload)
    write_plot_data(outdir, "plotdata.csv", fc.point, fc.point, fc.point)
    return payload


def cmd_interval(args, outdir: Path):
    series = load_series(args.input, args.column, args.delimiter)
    spec = _spec_from_args(args)
    holdout = args.holdout or 0
    train = TimeSeries(series.values[: len(series) - holdout]) if holdout else series
    actual = series.values[len(series) - holdout :] if holdout else None
    if holdout and holdout != args.horizon:
        raise CliError("E_CONFIG", "--holdout must equal --horizon when both are given")
    fit = fit_cmle(train, spec)
    fc = forecast_set(fit, train, args.horizon)
    methods = _resolve_methods(args.method)
    needs_boot = any(
        m in (Method.BPE, Method.BCA, Method.BLOCK_PERCENTILE, Method.RESIDUAL_PERCENTILE)
        for m in methods
    )
    if needs_boot:
        _require_seed(args)
    payload = {"alpha": args.alpha, "horizon": args.horizon, "methods": {}}
    param_draws = None
    for method in methods:
        if method == Method.BJ:
            iv = bj_interval(fc, fit, args.alpha)
        elif method == Method.QBETA:
            iv = qbeta_interval(fc, args.alpha)
        elif method in (Method.BPE, Method.BCA):
            cfg = BootstrapConfig(B=args.B, scheme="parametric", seed=args.seed)
            if param_draws is None:
                param_draws = bootstrap_draws(fit, train, fc, cfg)
            if method == Method.BPE:
                iv = bpe_interval(fit, train, fc, args.alpha, cfg, draws=param_draws)
            else:
                iv, _ = bca_interval(fit, train, fc, args.alpha, cfg, draws=param_draws)
        else:
            scheme = "residual" if method == Method.RESIDUAL_PERCENTILE else "block"
            cfg = BootstrapConfig(
                B=args.B, scheme=scheme, block_length=args.block_length, seed=args.seed
            )
            iv = percentile_interval(fit, train, fc, args.alpha, cfg)
        payload["methods"][method.value] = {
            "lower": iv.lower.tolist(),
            "upper": iv.upper.tolist(),
        }
        write_plot_data(
            outdir, f"interval_{method.value}.csv", fc.point, iv.lower, iv.upper, actual
        )
    write_report(outdir, "intervals.json", payload)
    return payload


def cmd_simulate(args, outdir: Path):
    _require_seed(args)
    scenario = scenario_by_label(args.scenario)
    methods = _resolve_methods(args.method)
    config = ScenarioRunConfig(
        replications=args.R,
        boot=BootstrapConfig(B=args.B, scheme="parametric", seed=0,
                             block_length=args.block_length),
        methods=methods,
        master_seed=args.seed,
        threads=args.threads,
        kappa=args.kappa,
    )
    result = run_scenario(scenario, config)
    payload = {
        "scenario": scenario.label,
        "replications": args.R,
        "B": args.B,
        "redraws": result["redraws"],
        "bootstrap_discards": result["bootstrap_discards"],
        "methods": {m.value: rep.to_dict() for m, rep in result["reports"].items()},
    }
    write_report(outdir, "simulation.json", payload)
    for m, rep in result["reports"].items():
        rows = []
        H = rep.cr.size
        for name, arr in (
            ("CR", rep.cr),
            ("A", rep.avg_length),
            ("CR_L", rep.cr_lower),
            ("CR_U", rep.cr_upper),
        ):
            row = {"metric": name}
            row.update({f"h{h+1}": f"{arr[h]:.6f}" for h in range(H)})
            rows.append(row)
        write_table(outdir, f"scenario_{scenario.label}_{m.value}.csv", rows)
    summary = [
        {"method": m.value, "picp": f"{rep.picp:.6f}", "pinaw": f"{rep.pinaw:.6f}",
         "cwc": f"{rep.cwc:.6f}", "score": f"{rep.winkler_mean:.6f}", "awd": f"{rep.awd:.6f}"}
        for m, rep in result["reports"].items()
    ]
    write_table(outdir, "summary.csv", summary)
    return payload


def cmd_evaluate(args, outdir: Path):
    series = load_series(args.input, args.column, args.delimiter)
    holdout = args.holdout
    if not holdout or holdout < 1 or holdout >= len(series):
        raise CliError("E_CONFIG", "--holdout must leave a nonempty training window")
    train = TimeSeries(series.values[:-holdout])
    actual = series.values[-holdout:]
    spec = _spec_from_args(args)
    fit = fit_cmle(train, spec)
    fc = forecast_set(fit, train, holdout)
    methods = _resolve_methods(args.method)
    needs_boot = any(
        m in (Method.BPE, Method.BCA, Method.BLOCK_PERCENTILE, Method.RESIDUAL_PERCENTILE)
        for m in methods
    )
    if needs_boot:
        _require_seed(args)
    payload = {"alpha": args.alpha, "holdout": holdout, "methods": {}}
    rows = []
    param_draws = None
    series_range = float(np.ptp(train.values))
    for method in methods:
        if method == Method.BJ:
            iv = bj_interval(fc, fit, args.alpha)
        elif method == Method.QBETA:
            iv = qbeta_interval(fc, args.alpha)
        elif method in (Method.BPE, Method.BCA):
            cfg = BootstrapConfig(B=args.B, scheme="parametric", seed=args.seed)
            if param_draws is None:
                param_draws = bootstrap_draws(fit, train, fc, cfg)
            if method == Method.BPE:
                iv = bpe_interval(fit, train, fc, args.alpha, cfg, draws=param_draws)
            else:
                iv, _ = bca_interval(fit, train, fc, args.alpha, cfg, draws=param_draws)
        else:
            scheme = "residual" if method == Method.RESIDUAL_PERCENTILE else "block"
            cfg = BootstrapConfig(
                B=args.B, scheme=scheme, block_length=args.block_length, seed=args.seed
            )
            iv = percentile_interval(fit, train, fc, args.alpha, cfg)
        report = evaluate_window(iv.lower, iv.upper, actual, args.alpha, series_range, args.kappa)
        payload["methods"][method.value] = report.to_dict()
        rows.append(
            {"method": method.value, "picp": f"{report.picp:.6f}",
             "pinaw": f"{report.pinaw:.6f}", "cwc": f"{report.cwc:.6f}",
             "score": f"{report.winkler_mean:.6f}", "awd": f"{report.awd:.6f}"}
        )
        write_plot_data(outdir, f"evaluate_{method.value}.csv", fc.point, iv.lower, iv.upper, actual)
    write_report(outdir, "evaluation.json", payload)
    write_table(outdir, "metrics.csv", rows)
    return payload


def cmd_sensitivity(args, outdir: Path):
    _require_seed(args)
    series = load_series(args.input, args.column, args.delimiter)
    spec = _spec_from_args(args)
    b_grid = [int(b) for b in args.b_grid.split(",")]
    rows = sensitivity_run(
        series, spec, args.holdout, b_grid, alpha=args.alpha, seed=args.seed, kappa=args.kappa
    )
    payload = {"b_grid": b_grid, "rows": rows}
    write_report(outdir, "sensitivity.json", payload)
    write_table(
        outdir,
        "sensitivity.csv",
        [
            {"B": r["B"], "picp": f"{r['picp']:.6f}", "pinaw": f"{r['pinaw']:.6f}",
             "cwc": f"{r['cwc']:.6f}", "score": f"{r['score']:.6f}", "awd": f"{r['awd']:.6f}"}
            for r in rows
        ],
    )
    return payload


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="barma", description="Beta ARMA modeling and prediction intervals"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, data=True):
        p.add_argument("--config", help="INI or JSON config file; flags override it")
        if data:
            p.add_argument("--input", help="delimiter-separated input file")
            p.add_argument("--column", help="column name or zero-based index")
            p.add_argument("--delimiter", default=",")
        p.add_argument("--p", type=int, default=0, help="AR order")
        p.add_argument("--q", type=int, default=0, help="MA order")
        p.add_argument("--link", default="logit", choices=["logit", "probit", "cloglog"])
        p.add_argument("--horizon", type=int, default=10)
        p.add_argument("--alpha", type=float, default=0.10)
        p.add_argument("--method", default="all", choices=_METHOD_CHOICES)
        p.add_argument("--B", type=int, default=1000)
        p.add_argument("--block-length", dest="block_length", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--holdout", type=int)
        p.add_argument("--max-order", dest="max_order", type=int)
        p.add_argument("--significance", type=float, default=0.1)
        p.add_argument("--kappa", type=float, default=2.0)
        p.add_argument("--outdir", required=True)

    p_fit = sub.add_parser("fit", help="fit a model, with diagnostics")
    add_common(p_fit)
    p_fc = sub.add_parser("forecast", help="h-step point forecasts")
    add_common(p_fc)
    p_iv = sub.add_parser("interval", help="prediction intervals")
    add_common(p_iv)
    p_sim = sub.add_parser("simulate", help="Monte Carlo scenario study")
    add_common(p_sim, data=False)
    p_sim.add_argument("--scenario", required=True, help="scenario label I..VI")
    p_sim.add_argument("--R", type=int, default=1000, help="Monte Carlo replications")
    p_ev = sub.add_parser("evaluate", help="interval metrics on a held-out window")
    add_common(p_ev)
    p_sens = sub.add_parser("sensitivity", help="interval metrics across bootstrap sizes")
    add_common(p_sens)
    p_sens.add_argument("--b-grid", dest="b_grid", default="500,1000,2000,5000")
    return parser


_COMMANDS = {
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "interval": cmd_interval,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "sensitivity": cmd_sensitivity,
}


def _apply_config(args, argv, parser) -> None:
    """Fill args from the config file for flags not given on the command line."""
    cfg = load_config_file(args.config)
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_") for a in argv if a.startswith("--")}
    actions = {}
    for sp in parser._subparsers._group_actions[0].choices.values():
        for action in sp._actions:
            actions.setdefault(action.dest, action)
    for key, val in cfg.items():
        if key in ("command", "config", "outdir") or key in explicit or val is None:
            continue
        if not hasattr(args, key):
            continue
        action = actions.get(key)
        if action is not None and action.type is not None and not isinstance(val, bool):
            val = action.type(val)
        setattr(args, key, val)


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    if args.config:
        try:
            _apply_config(args, argv, parser)
        except CliError as exc:
            print(f"{exc.code}: {exc}", file=sys.stderr)
            return 2
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    command = args.command
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            config_snapshot = {
                k: v for k, v in vars(args).items() if k not in ("command", "config")
            }
            input_path = getattr(args, "input", None)
            _COMMANDS[command](args, outdir)
            write_manifest(outdir, command, config_snapshot, input_path)
    except CliError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"E_RUNTIME: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
