"""End-to-end CLI checks: parsing, artifacts, determinism, round-trips."""

import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from barma._rng import stream
from barma.cli import load_series, main, read_interval_csv, read_report
from barma.montecarlo import scenario_by_label, simulate_barma


@pytest.fixture(scope="module")
def series_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "series.csv"
    sc = scenario_by_label("I")
    y = simulate_barma(sc, 151, stream(3, 0, 0))
    path.write_text("\n".join(f"{v:.8f}" for v in y.values) + "\n")
    return path


class TestLoadSeries:
    def test_plain_column(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("0.2\n0.5\n0.9\n")
        assert len(load_series(p)) == 3

    def test_boundary_value_rejected_with_row(self, tmp_path):
        p = tmp_path / "b.csv"
        p.write_text("0.2\n1.0\n0.4\n")
        with pytest.raises(Exception) as err:
            load_series(p)
        assert "line 2" in str(err.value)

    def test_header_and_named_column(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("date,level\n2001-01,0.4\n2001-02,0.6\n")
        s = load_series(p, column="level")
        assert np.allclose(s.values, [0.4, 0.6])

    def test_missing_values_reported(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("date,level\n2001-01,0.4\n2001-02,\n2001-03,0.5\n")
        with pytest.raises(Exception) as err:
            load_series(p, column="level")
        assert "line 3" in str(err.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(Exception):
            load_series(tmp_path / "nope.csv")


class TestFitCommand:
    def test_fit_writes_artifacts(self, series_csv, tmp_path):
        out = tmp_path / "fit"
        rc = main(["fit", "--input", str(series_csv), "--p", "1", "--q", "1",
                   "--outdir", str(out)])
        assert rc == 0
        report = read_report(out / "fit.json")
        assert report["spec"]["p"] == 1
        assert report["diagnostics"]["lags"] == 10
        assert (out / "manifest.json").exists()
        assert (out / "estimates.csv").exists()

    def test_fit_holdout_split(self, series_csv, tmp_path):
        out = tmp_path / "fit_h"
        rc = main(["fit", "--input", str(series_csv), "--p", "1", "--q", "0",
                   "--holdout", "10", "--outdir", str(out)])
        assert rc == 0
        report = read_report(out / "fit.json")
        assert report["train_length"] == 141
        assert report["holdout"] == 10

    def test_fit_bad_input_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("0.5\n2.0\n")
        out = tmp_path / "out"
        rc = main(["fit", "--input", str(bad), "--p", "1", "--outdir", str(out)])
        assert rc != 0


class TestIntervalCommand:
    def test_all_methods_contained(self, series_csv, tmp_path):
        out = tmp_path / "iv"
        rc = main(["interval", "--input", str(series_csv), "--p", "1", "--q", "1",
                   "--horizon", "5", "--method", "all", "--B", "150",
                   "--seed", "5", "--outdir", str(out)])
        assert rc == 0
        files = sorted(out.glob("interval_*.csv"))
        assert len(files) == 6
        for f in files:
            lower, upper = read_interval_csv(f)
            assert len(lower) == 5
            assert np.all((lower > 0) & (upper < 1) & (lower < upper))
            with open(f) as fh:
                hs = [int(r["h"]) for r in csv.DictReader(fh)]
            assert hs == [1, 2, 3, 4, 5]

    def test_seed_required_for_bootstrap(self, series_csv, tmp_path):
        out = tmp_path / "iv2"
        rc = main(["interval", "--input", str(series_csv), "--p", "1", "--q", "1",
                   "--horizon", "3", "--method", "bca", "--B", "150",
                   "--outdir", str(out)])
        assert rc == 2

    def test_deterministic_reruns(self, series_csv, tmp_path):
        args = ["interval", "--input", str(series_csv), "--p", "1", "--q", "0",
                "--horizon", "4", "--method", "residual", "--B", "150", "--seed", "9"]
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(args + ["--outdir", str(out1)]) == 0
        assert main(args + ["--outdir", str(out2)]) == 0
        assert (out1 / "intervals.json").read_text() == (out2 / "intervals.json").read_text()


class TestSimulateCommand:
    def test_deterministic_and_report_roundtrip(self, tmp_path):
        args = ["simulate", "--scenario", "I", "--R", "4", "--B", "120",
                "--seed", "7", "--method", "qbeta"]
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert main(args + ["--outdir", str(out1)]) == 0
        assert main(args + ["--outdir", str(out2)]) == 0
        r1 = read_report(out1 / "simulation.json")
        r2 = read_report(out2 / "simulation.json")
        assert r1 == r2
        assert r1["methods"]["qbeta"]["n_replicates"] == 4
        assert (out1 / "scenario_I_qbeta.csv").exists()
        assert (out1 / "summary.csv").exists()

    def test_seed_mandatory(self, tmp_path):
        rc = main(["simulate", "--scenario", "I", "--R", "2", "--B", "120",
                   "--method", "bj", "--outdir", str(tmp_path / "s3")])
        assert rc == 2

    def test_console_entrypoint(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "barma.cli", "simulate", "--scenario", "I",
             "--R", "2", "--B", "120", "--seed", "1", "--method", "bj",
             "--outdir", str(tmp_path / "s4")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr


class TestEvaluateCommand:
    def test_metrics_written(self, series_csv, tmp_path):
        out = tmp_path / "ev"
        rc = main(["evaluate", "--input", str(series_csv), "--p", "1", "--q", "0",
                   "--holdout", "10", "--method", "qbeta", "--outdir", str(out)])
        assert rc == 0
        rep = read_report(out / "evaluation.json")
        q = rep["methods"]["qbeta"]
        assert 0.0 <= q["picp"] <= 1.0
        assert (out / "metrics.csv").exists()
        lower, upper = read_interval_csv(out / "evaluate_qbeta.csv")
        assert len(lower) == 10


class TestSensitivityCommand:
    def test_rows_and_determinism(self, series_csv, tmp_path):
        args = ["sensitivity", "--input", str(series_csv), "--p", "1", "--q", "0",
                "--holdout", "10", "--b-grid", "150,300", "--seed", "2"]
        out1, out2 = tmp_path / "x1", tmp_path / "x2"
        assert main(args + ["--outdir", str(out1)]) == 0
        assert main(args + ["--outdir", str(out2)]) == 0
        r1 = read_report(out1 / "sensitivity.json")
        assert [row["B"] for row in r1["rows"]] == [150, 300]
        assert r1 == read_report(out2 / "sensitivity.json")


class TestConfigAndManifest:
    def test_config_file_with_flag_override(self, series_csv, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text(
            "[model]\np = 1\nq = 0\n[run]\nholdout = 10\nseed = 4\n"
        )
        out = tmp_path / "cfg_out"
        rc = main(["fit", "--config", str(cfg), "--input", str(series_csv),
                   "--holdout", "20", "--outdir", str(out)])
        assert rc == 0
        rep = read_report(out / "fit.json")
        assert rep["spec"]["p"] == 1  # from config
        assert rep["train_length"] == 131  # flag --holdout 20 wins

    def test_manifest_rerun_reproduces(self, series_csv, tmp_path):
        out1 = tmp_path / "m1"
        assert main(["interval", "--input", str(series_csv), "--p", "1", "--q", "0",
                     "--horizon", "4", "--method", "block", "--B", "150",
                     "--seed", "12", "--outdir", str(out1)]) == 0
        out2 = tmp_path / "m2"
        rc = main(["interval", "--config", str(out1 / "manifest.json"),
                   "--input", str(series_csv), "--outdir", str(out2)])
        assert rc == 0
        assert (out1 / "intervals.json").read_text() == (out2 / "intervals.json").read_text()

    def test_manifest_contents(self, series_csv, tmp_path):
        out = tmp_path / "m3"
        assert main(["fit", "--input", str(series_csv), "--p", "1", "--q", "0",
                     "--outdir", str(out)]) == 0
        man = read_report(out / "manifest.json")
        assert man["command"] == "fit"
        assert man["version"]
        assert man["input_digest"] and len(man["input_digest"]) == 64
        assert man["config"]["p"] == 1
