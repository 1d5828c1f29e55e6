"""Command-line interface tests: exit codes, artifacts on disk, sweeps."""

import csv
import json

import numpy as np
import yaml

from geoshield.cli import EXIT_INVALID, EXIT_OK, EXIT_VIOLATION, build_parser, main


def _write_scenario(path, **kw):
    d = {
        "name": "clitiny",
        "duration": 0.3,
        "control_dt": 0.005,
        "physics_dt": 0.0025,
        "flow": {"horizon": 1.0, "dt": 0.01},
        "geofence": {"center": [0.0, 0.0, 10.0], "half_extents": [10.0, 10.0, 9.5]},
        "start": {"p": [0.0, 0.0, 10.0]},
        "pilot": {"policy": "hover"},
    }
    d.update(kw)
    with open(path, "w") as f:
        yaml.safe_dump(d, f)
    return str(path)


def test_run_writes_artifacts_and_exits_zero(tmp_path, capsys):
    sc = _write_scenario(tmp_path / "s.yaml")
    out = tmp_path / "out"
    assert main(["run", "--scenario", sc, "--out", str(out)]) == EXIT_OK
    assert (out / "clitiny.csv").exists()
    payload = json.loads((out / "clitiny.metrics.json").read_text())
    assert payload["schema_version"] == 1
    assert not payload["violated"]
    cap = capsys.readouterr()
    assert "[clitiny]" in cap.out and "min_h" in cap.out


def test_run_unknown_scenario_lists_available(capsys):
    assert main(["run", "--scenario", "not_a_thing"]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "horizontal_sprint" in err and "free_fall_70m" in err


def test_run_unsafe_start_is_invalid(tmp_path, capsys):
    sc = _write_scenario(tmp_path / "s.yaml", start={"p": [0.0, 0.0, 25.0]})
    assert main(["run", "--scenario", sc]) == EXIT_INVALID
    assert "unsafe start" in capsys.readouterr().err


def test_run_violation_exit_code(tmp_path):
    sc = _write_scenario(
        tmp_path / "s.yaml",
        start={"p": [0.0, 0.0, 25.0]},
        allow_unsafe_start=True,
        duration=0.05,
    )
    assert main(["run", "--scenario", sc]) == EXIT_VIOLATION


def test_run_accepts_overrides(tmp_path, capsys):
    sc = _write_scenario(tmp_path / "s.yaml")
    assert main(["run", "--scenario", sc, "--set", "duration=0.05"]) == EXIT_OK
    assert main(["run", "--scenario", sc, "--set", "nope.key=1"]) == EXIT_INVALID
    assert "scenario error" in capsys.readouterr().err


def test_bench_small(capsys):
    assert main(["bench", "--n", "5"]) == EXIT_OK
    assert "bench over 5 calls" in capsys.readouterr().out


def test_compare_short_run_writes_report(tmp_path, capsys):
    out = tmp_path / "cmp"
    code = main(
        [
            "compare",
            "--set",
            "compare.duration=0.6",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    report = json.loads((out / "pendulum_compare.report.json").read_text())
    assert set(report["settings"]) == {"low", "high"}
    low = report["settings"]["low"]
    assert low["regulation_median_ns"] > 0 and low["qp_median_ns"] > 0
    assert (out / "pendulum_compare.low.csv").exists()
    assert (out / "pendulum_compare.high.csv").exists()
    assert "median time ratio" in capsys.readouterr().out


def test_sweep_empty_and_invalid(tmp_path, capsys):
    sc = _write_scenario(tmp_path / "s.yaml")
    assert main(["sweep", "--scenario", sc]) == EXIT_OK
    assert "empty sweep" in capsys.readouterr().out
    assert main(["sweep", "--scenario", sc, "--set", "bogus.key=1,2"]) == EXIT_INVALID


def test_sweep_grid_runs_and_writes_csv(tmp_path, capsys):
    sc = _write_scenario(tmp_path / "s.yaml", duration=0.1)
    out = tmp_path / "sw"
    code = main(
        ["sweep", "--scenario", sc, "--set", "filter.beta=0.3,0.6", "--out", str(out)]
    )
    assert code == EXIT_OK
    with open(out / "sweep.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2
    assert {r["filter.beta"] for r in rows} == {"0.3", "0.6"}
    assert all(r["violated"] == "False" for r in rows)
    table = capsys.readouterr().out
    assert "filter.beta" in table and "min_h" in table


def test_sweep_compare_scenario_shows_beta_trend(tmp_path):
    # softer regulation (small beta) stays further from the boundary; stiff
    # regulation tracks the pilot closer before the fence takes over
    out = tmp_path / "trend"
    code = main(
        [
            "sweep",
            "--scenario",
            "pendulum_compare",
            "--set",
            "compare.low.beta=1,20",
            "--set",
            "compare.duration=3.0",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    with open(out / "sweep.csv") as f:
        rows = {r["compare.low.beta"]: r for r in csv.DictReader(f)}
    assert set(rows) == {"1", "20"}
    assert float(rows["1"]["reg_max_theta"]) < float(rows["20"]["reg_max_theta"])
    assert float(rows["20"]["reg_max_theta"]) <= 1.0


def test_parser_wiring():
    ap = build_parser()
    args = ap.parse_args(["serve"])
    assert args.port == 8000 and args.host == "127.0.0.1"
    assert args.ui is None and args.turbo is False
    args = ap.parse_args(["bench"])
    assert args.n == 2000 and args.scenario is None
    args = ap.parse_args(["compare"])
    assert args.scenario == "pendulum_compare"


def test_serve_app_static_mount(tmp_path):
    import pytest
    from fastapi.testclient import TestClient

    from geoshield.cli import serve_app

    with pytest.raises(SystemExit):
        serve_app(str(tmp_path))  # no index.html yet

    (tmp_path / "index.html").write_text("<!doctype html><title>cockpit</title>")
    app = serve_app(str(tmp_path), turbo=True)
    with TestClient(app) as client:
        # API routes keep priority over the bundle
        assert isinstance(client.get("/scenarios").json(), list)
        body = client.get("/").text
        assert "cockpit" in body
