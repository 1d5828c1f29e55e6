"""Command-line front end: run scenarios, benchmarks, sweeps, the pendulum
filter comparison, and the cockpit server.

Exit codes: 0 clean, 1 a run violated the fence, 2 invalid invocation or
scenario (including unsafe starts).
"""

from __future__ import annotations

import argparse
import csv
import importlib.resources
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .harness import (
    CompareScenario,
    FlightSuite,
    QuadScenario,
    ScenarioError,
    UnsafeStartError,
    bench_filter,
    load_scenario,
    run_scenario,
)
from .qp_baseline import ComparisonReport, PendulumFilterParams, QPBaselineParams, compare_filters
from .safety_filter import GeofenceFilter
from .telemetry import METRICS_SCHEMA_VERSION, compute_metrics

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INVALID = 2


def packaged_scenarios() -> dict[str, Path]:
    root = importlib.resources.files("geoshield") / "scenarios"
    return {p.name[: -len(".yaml")]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".yaml")}


def resolve_scenario(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.is_file():
        return p
    shipped = packaged_scenarios()
    if name_or_path in shipped:
        return shipped[name_or_path]
    raise ScenarioError(
        f"no scenario '{name_or_path}'; not a file, and shipped scenarios are: "
        + ", ".join(sorted(shipped))
    )


def _mk_params(gains: dict) -> tuple[PendulumFilterParams, QPBaselineParams]:
    reg = PendulumFilterParams(beta=float(gains["beta"]))
    qp = QPBaselineParams(alpha=float(gains["alpha"]))
    return reg, qp


def _run_compare(cs: CompareScenario) -> dict[str, ComparisonReport]:
    reports = {}
    for label, gains in (("low", cs.low), ("high", cs.high)):
        reg, qp = _mk_params(gains)
        reports[label] = compare_filters(
            u_des=cs.u_des,
            duration=cs.duration,
            control_dt=cs.control_dt,
            physics_dt=cs.physics_dt,
            reg_params=reg,
            qp_params=qp,
            label=f"{cs.name}.{label}",
        )
    return reports


def _write_compare(reports: dict[str, ComparisonReport], cs: CompareScenario, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    summary = {"schema_version": METRICS_SCHEMA_VERSION, "name": cs.name, "settings": {}}
    for label, rep in reports.items():
        n = len(rep.regulation.t)
        cols = np.column_stack(
            [
                rep.regulation.t,
                rep.regulation.theta,
                rep.regulation.theta_dot,
                rep.regulation.u,
                rep.regulation.h,
                rep.qp.theta,
                rep.qp.theta_dot,
                rep.qp.u,
                rep.qp.h,
            ]
        )
        hdr = "t,theta_reg,theta_dot_reg,u_reg,h_reg,theta_qp,theta_dot_qp,u_qp,h_qp"
        np.savetxt(out / f"{cs.name}.{label}.csv", cols, delimiter=",", header=hdr, comments="", fmt="%.9g")
        summary["settings"][label] = {
            "n": n,
            "regulation_median_ns": rep.regulation.median_call_ns,
            "qp_median_ns": rep.qp.median_call_ns,
            "median_ratio": rep.median_ratio,
            "regulation_flips": rep.regulation_flips,
            "qp_flips": rep.qp_flips,
            "regulation_max_theta": float(np.max(np.abs(rep.regulation.theta))),
            "qp_max_theta": float(np.max(np.abs(rep.qp.theta))),
        }
    with open(out / f"{cs.name}.report.json", "w") as f:
        json.dump(summary, f, indent=2)


def _run_one_flight(sc: QuadScenario, out: Optional[Path], plot: bool) -> int:
    log = run_scenario(sc)
    metrics = compute_metrics(log, sc.geofence)
    print(f"[{sc.name}]")
    print(metrics.summary())
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        base = sc.name.replace("/", "_")
        log.to_csv(out / f"{base}.csv")
        metrics.to_json(out / f"{base}.metrics.json")
        if plot:
            _plot_log(log, sc, out / f"{base}.png")
    return EXIT_VIOLATION if metrics.violated else EXIT_OK


def _plot_log(log, sc: QuadScenario, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    r = log.rows
    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(8, 9))
    axes[0].plot(r[:, 0], np.linalg.norm(r[:, 8:11], axis=1))
    axes[0].set_ylabel("|v| m/s")
    axes[1].plot(r[:, 0], r[:, 3])
    axes[1].set_ylabel("z m")
    axes[2].plot(r[:, 0], r[:, 22])
    axes[2].set_ylabel("h_I m^2")
    axes[3].plot(r[:, 0], r[:, 23])
    axes[3].set_ylabel("lambda")
    axes[3].set_xlabel("t s")
    fig.suptitle(sc.name)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def cmd_run(args: argparse.Namespace) -> int:
    if args.plot:
        try:
            import matplotlib  # noqa: F401
        except ImportError:
            print("--plot needs matplotlib (pip install matplotlib)", file=sys.stderr)
            return EXIT_INVALID
    path = resolve_scenario(args.scenario)
    loaded = load_scenario(path, args.set)
    out = Path(args.out) if args.out else None
    if isinstance(loaded, CompareScenario):
        reports = _run_compare(loaded)
        for rep in reports.values():
            print(rep.summary())
        if out is not None:
            _write_compare(reports, loaded, out)
        return EXIT_OK
    flights = loaded.flights if isinstance(loaded, FlightSuite) else (loaded,)
    code = EXIT_OK
    for sc in flights:
        code = max(code, _run_one_flight(sc, out, args.plot))
    return code


def cmd_compare(args: argparse.Namespace) -> int:
    path = resolve_scenario(args.scenario)
    loaded = load_scenario(path, args.set)
    if not isinstance(loaded, CompareScenario):
        print(f"'{args.scenario}' is not a pendulum comparison scenario", file=sys.stderr)
        return EXIT_INVALID
    reports = _run_compare(loaded)
    for rep in reports.values():
        print(rep.summary())
    if args.out:
        _write_compare(reports, loaded, Path(args.out))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    filt = None
    if args.scenario:
        loaded = load_scenario(resolve_scenario(args.scenario), args.set)
        if isinstance(loaded, FlightSuite):
            loaded = loaded.flights[0]
        if not isinstance(loaded, QuadScenario):
            print("bench needs a quad scenario", file=sys.stderr)
            return EXIT_INVALID
        filt = GeofenceFilter(loaded.geofence, loaded.filter_params, loaded.quad_params, loaded.flow)
    report = bench_filter(filt=filt, n=args.n)
    print(report.summary())
    return EXIT_OK


# sweep workers run in separate processes; keep the entry picklable
def _sweep_worker(job: tuple[str, tuple[str, ...]]) -> dict:
    path, sets = job
    loaded = load_scenario(Path(path), sets)
    row: dict = {s.split("=", 1)[0]: s.split("=", 1)[1] for s in sets}
    if isinstance(loaded, CompareScenario):
        reports = _run_compare(loaded)
        low = reports["low"]
        row.update(
            reg_max_theta=round(float(np.max(np.abs(low.regulation.theta))), 4),
            qp_max_theta=round(float(np.max(np.abs(low.qp.theta))), 4),
            reg_flips=low.regulation_flips,
            qp_flips=low.qp_flips,
            median_ratio=round(low.median_ratio, 4),
            violated=False,
        )
        return row
    flights = loaded.flights if isinstance(loaded, FlightSuite) else (loaded,)
    worst: dict = dict(
        top_speed=0.0, min_h=np.inf, min_face_dist=np.inf, min_lambda=np.inf,
        stop_distance=np.nan, max_cmd_step=0.0, violated=False,
    )
    for sc in flights:
        try:
            log = run_scenario(sc)
        except UnsafeStartError as e:
            row.update(worst, error=str(e), violated=True)
            return row
        m = compute_metrics(log, sc.geofence)
        worst["top_speed"] = max(worst["top_speed"], m.top_speed)
        worst["min_h"] = min(worst["min_h"], m.min_h)
        worst["min_face_dist"] = min(worst["min_face_dist"], m.min_face_distance)
        worst["min_lambda"] = min(worst["min_lambda"], m.min_lambda)
        worst["max_cmd_step"] = max(worst["max_cmd_step"], m.max_command_step)
        if len(flights) == 1:
            worst["stop_distance"] = m.stop_distance_to_face
        worst["violated"] = worst["violated"] or m.violated
    for k, v in worst.items():
        row[k] = round(v, 4) if isinstance(v, float) and np.isfinite(v) else v
    return row


def _format_table(rows: list[dict]) -> str:
    if not rows:
        return "(empty sweep)"
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    cells = [[str(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    for row in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)


def cmd_sweep(args: argparse.Namespace) -> int:
    path = resolve_scenario(args.scenario)
    axes: list[list[str]] = []
    for ov in args.set:
        if "=" not in ov:
            raise ScenarioError(f"override '{ov}' is not of the form key=v1,v2,...")
        key, _, raw = ov.partition("=")
        values = [v for v in raw.split(",") if v != ""]
        axes.append([f"{key}={v}" for v in values])

    combos = [c for c in itertools.product(*axes)] if axes and all(axes) else []
    if not combos:
        print(_format_table([]))
        return EXIT_OK

    # validate every combo up front so a bad grid fails before any long runs
    for sets in combos:
        load_scenario(path, sets)

    jobs = [(str(path), sets) for sets in combos]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_worker, jobs))
    else:
        rows = [_sweep_worker(j) for j in jobs]

    print(_format_table(rows))
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        cols: list[str] = []
        for r in rows:
            for k in r:
                if k not in cols:
                    cols.append(k)
        with open(outdir / "sweep.csv", "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=cols)
            w.writeheader()
            w.writerows(rows)
    return EXIT_OK


def serve_app(ui_dir: str | None = None, turbo: bool = False):
    """Cockpit app, optionally with a static bundle mounted at /.

    The mount is added after the API routes, so /ws, /scenarios, /stats and
    /log keep priority and the bundle serves everything else.
    """
    from .server import create_app

    app = create_app(turbo=turbo)
    if ui_dir is not None:
        from pathlib import Path

        from fastapi.staticfiles import StaticFiles

        if not (Path(ui_dir) / "index.html").is_file():
            raise SystemExit(f"--ui directory {ui_dir!r} has no index.html (build the bundle first)")
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run(serve_app(args.ui, args.turbo), host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geoshield", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add_common(p, scenario_required=True, default_scenario=None):
        p.add_argument("--scenario", required=scenario_required, default=default_scenario,
                       help="scenario file path or shipped scenario name")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-key override, repeatable")

    p = sub.add_parser("run", help="run a scenario, write telemetry and metrics")
    add_common(p)
    p.add_argument("--out", help="output directory for CSV and metrics JSON")
    p.add_argument("--plot", action="store_true", help="also export a PNG of key telemetry columns")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("bench", help="latency and allocation benchmark of the quad filter")
    add_common(p, scenario_required=False)
    p.add_argument("--n", type=int, default=2000, help="timed calls")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("sweep", help="cartesian parameter sweep: --set key=v1,v2,...")
    add_common(p)
    p.add_argument("--out", help="directory for sweep.csv")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("compare", help="pendulum regulation vs QP filter comparison")
    add_common(p, scenario_required=False, default_scenario="pendulum_compare")
    p.add_argument("--out", help="output directory for traces and report")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("serve", help="cockpit websocket server")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", default=None, metavar="DIR",
                   help="serve a built cockpit bundle (directory with index.html) at /")
    p.add_argument("--turbo", action="store_true",
                   help="run sessions unpaced, for scripted clients and tests")
    p.set_defaults(fn=cmd_serve)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except UnsafeStartError as e:
        print(f"unsafe start: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
