import csv
import json
import math

import pytest

from ncmet.cli import main
from ncmet.config import SCHEMA_VERSION, ExperimentConfig
from ncmet.errors import ConfigurationError
from ncmet.runner import CSV_COLUMNS, fmt, jsonable, run, thread_count

SMALL = {
    "schema": SCHEMA_VERSION,
    "name": "small",
    "cocycle": {
        "base": {"kind": "odometer", "params": {"bits": 24}},
        "generator": {"kind": "odometer_counterexample", "params": {"cells": 8}},
    },
    "horizons": [16, 32, 64],
    "seeds": [0, 1, 2],
    "thresholds": [0.0],
    "criteria": [
        {"kind": "drift", "tolerance": 1.0},
        {"kind": "smooth_growth", "tolerance": 0.5},
        {"kind": "limit_operator_l2", "tolerance": 1e-9, "name": "too_tight"},
    ],
    "output": {"prefix": "small"},
    "parallelism": 3,
}

CONSTANT = {
    "schema": SCHEMA_VERSION,
    "algebra": {"blocks": [{"kind": "factor", "n": 2, "weight": 0.5}]},
    "cocycle": {"base": {"kind": "rotation", "params": {}},
                "generator": {"kind": "constant", "params": {
                    "element": [[[[2.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]]}}},
    "horizons": [50, 100],
    "seeds": [0],
    "criteria": [{"kind": "single_operator", "tolerance": 0.1},
                 {"kind": "determinant_gap", "tolerance": 1e-10, "horizon": 50},
                 {"kind": "invariance_subspace", "tolerance": 1e-6, "threshold": 0.0}],
}


class TestFormatting:
    def test_fmt(self):
        assert fmt(0.1) == "0.1"
        assert fmt(float("nan")) == "nan"
        assert fmt(3) == "3"
        assert float(fmt(1 / 3)) == 1 / 3

    def test_jsonable(self):
        assert jsonable({"a": float("nan"), "b": [float("inf"), 1.5]}) == {"a": None, "b": [None, 1.5]}

    def test_thread_cap(self, monkeypatch):
        monkeypatch.setenv("NCMET_THREADS", "2")
        assert thread_count(8) == 2
        monkeypatch.setenv("NCMET_THREADS", "0")
        with pytest.raises(ConfigurationError):
            thread_count(8)
        monkeypatch.delenv("NCMET_THREADS")
        assert thread_count(3) == 3


class TestRun:
    def test_report(self, tmp_path):
        report = run(ExperimentConfig.from_json(SMALL))
        verdicts = {c["name"]: c["passed"] for c in report.criteria}
        assert verdicts == {"drift": True, "smooth_growth": True, "too_tight": False}
        assert not report.passed
        paths = report.write(tmp_path)
        rows = list(csv.reader(open(paths["diagnostics"])))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 1 + 3 * 3
        summary = json.loads(open(paths["summary"]).read())
        assert [s["seed"] for s in summary["seeds"]] == [0, 1, 2]
        assert summary["config"]["output"]["prefix"] == "small"
        assert "egorov" in summary["seeds"][0]
        assert "total_seconds" not in open(paths["summary"]).read()

    def test_criteria_on_constant(self):
        report = run(ExperimentConfig.from_json(CONSTANT))
        assert report.passed, report.criteria

    def test_unusable_criterion(self):
        data = dict(CONSTANT, criteria=[{"kind": "lyapunov_oracle", "tolerance": 0.1}])
        with pytest.raises(ConfigurationError, match="criteria"):
            run(ExperimentConfig.from_json(data))

    def test_seed_error_recorded(self, monkeypatch):
        import ncmet.runner as runner

        def boom(*args, **kwargs):
            raise runner.NcmetError("synthetic failure")

        monkeypatch.setattr(runner, "estimate_met", boom)
        report = run(ExperimentConfig.from_json(SMALL))
        assert all(s.error for s in report.seeds)
        assert not report.passed
        assert math.isnan(report.criteria[0]["worst"])

    def test_thread_independent(self, tmp_path, monkeypatch):
        outs = []
        for threads in ("1", "3"):
            monkeypatch.setenv("NCMET_THREADS", threads)
            paths = run(ExperimentConfig.from_json(SMALL)).write(tmp_path / threads)
            outs.append([open(paths[k], "rb").read() for k in ("diagnostics", "series", "summary")])
        assert outs[0] == outs[1]


class TestCli:
    def test_run_exit_codes(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(SMALL))
        assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1
        out = capsys.readouterr().out
        assert "FAIL too_tight" in out and "PASS drift" in out
        passing = dict(SMALL, criteria=SMALL["criteria"][:2])
        cfg.write_text(json.dumps(passing))
        assert main(["run", str(cfg), "--out", str(tmp_path / "p"), "--plots"]) == 0
        assert list((tmp_path / "p").glob("*.png"))

    def test_usage_errors(self, tmp_path, capsys):
        assert main(["bogus"]) == 2
        assert main(["preset", "nope"]) == 2
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps(dict(SMALL, seeds=[])))
        assert main(["run", str(cfg)]) == 2
        assert "seeds" in capsys.readouterr().err

    def test_props(self, capsys):
        assert main(["props", "determinant", "--trials", "3", "--seed", "1"]) == 0
        assert "PASS determinant." in capsys.readouterr().out
        assert main(["props", "nope"]) == 2
        assert main(["props", "metric", "--trials", "0"]) == 2

    def test_preset_list_and_dump(self, capsys):
        assert main(["preset", "--list"]) == 0
        assert "odometer-counterexample" in capsys.readouterr().out
        assert main(["preset", "classical-oseledets-2x2", "--dump"]) == 0
        dumped = json.loads(capsys.readouterr().out)
        assert ExperimentConfig.from_json(dumped)["name"] == "classical-oseledets-2x2"
