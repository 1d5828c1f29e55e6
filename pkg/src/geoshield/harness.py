"""Scenario runner: pilot policy -> shield -> plant, at a 400 Hz control rate.

Scenario files are YAML with a strict schema (unknown keys rejected, dotted
key overrides type-checked).  The control loop holds each filtered command
over an integer number of physics substeps, logs one telemetry row per tick
plus a terminal row, and stops early if the fence is ever actually crossed
(which marks the run violated; shipped scenarios must never do this).
"""

from __future__ import annotations

import gc
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import yaml

from geoshield import _kernels as _k
from geoshield.flow import FlowConfig
from geoshield.quadrotor import QuadParams, QuadState
from geoshield.safety_filter import FilterParams, GeofenceBox, GeofenceFilter
from geoshield.telemetry import TelemetryLog

SCENARIO_SCHEMA_VERSION = 1

# pilot returns the desired command for this tick, or None for radio silence
PilotSource = Callable[[float, np.ndarray], Optional[np.ndarray]]

RADIO_TIMEOUT_S = 0.100


class ScenarioError(ValueError):
    """Scenario file or override rejected before any simulation runs."""


class UnsafeStartError(ScenarioError):
    """Initial state outside the invariant set and not explicitly allowed."""


@dataclass(frozen=True)
class QuadScenario:
    name: str
    duration: float
    control_dt: float
    physics_dt: float
    geofence: GeofenceBox
    filter_params: FilterParams
    flow: FlowConfig
    quad_params: QuadParams
    start_p: np.ndarray
    start_v: np.ndarray
    pilot: dict
    allow_unsafe_start: bool = False
    seed: int = 0

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.control_dt))

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))


@dataclass(frozen=True)
class CompareScenario:
    name: str
    u_des: float
    duration: float
    control_dt: float
    physics_dt: float
    low: dict
    high: dict
    h_band: float = 0.2
    seed: int = 0


@dataclass(frozen=True)
class FlightSuite:
    name: str
    flights: tuple[QuadScenario, ...]


Loaded = Union[QuadScenario, CompareScenario, FlightSuite]

_TOP_KEYS = {
    "schema_version",
    "name",
    "plant",
    "duration",
    "control_dt",
    "physics_dt",
    "seed",
    "geofence",
    "filter",
    "flow",
    "quad",
    "start",
    "allow_unsafe_start",
    "pilot",
    "flights",
    "compare",
}
_GEOFENCE_KEYS = {"center", "half_extents"}
_FILTER_KEYS = {
    "beta",
    "delta",
    "epsilon",
    "v_floor",
    "K_v",
    "K_q",
    "v_backup_max",
    "terminal_weight",
    "margin",
}
_FLOW_KEYS = {"horizon", "dt"}
_QUAD_KEYS = {"mass", "gravity", "rate_gain", "rate_limit", "drag_coeff"}
_START_KEYS = {"p", "v"}
_PILOT_KEYS = {
    "policy",
    "throttle",
    "rates",
    "v_target",
    "z_ref",
    "accel_limit",
    "kp",
    "kz",
    "kdz",
    "until",
    "segments",
}
_COMPARE_KEYS = {"u_des", "duration", "control_dt", "physics_dt", "low", "high", "h_band"}
_GAIN_KEYS = {"beta", "alpha"}
_FLIGHT_KEYS = {"name", "duration", "start", "pilot", "allow_unsafe_start"}

PILOT_POLICIES = ("hover", "zero", "raw", "silence", "velocity_chase", "segments")


def _reject_unknown(d: dict, allowed: set, ctx: str) -> None:
    if not isinstance(d, dict):
        raise ScenarioError(f"{ctx}: expected a mapping")
    unknown = set(d) - allowed
    if unknown:
        raise ScenarioError(f"{ctx}: unknown keys {sorted(unknown)}")


def _need(d: dict, key: str, ctx: str):
    if key not in d:
        raise ScenarioError(f"{ctx}: missing required key '{key}'")
    return d[key]


def _vec3(v, ctx: str) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ScenarioError(f"{ctx}: expected a 3-vector")
    return a


def _num(v, ctx: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{ctx}: expected a number, got {type(v).__name__}")
    return float(v)


def _validate_pilot(p: dict, ctx: str = "pilot") -> dict:
    _reject_unknown(p, _PILOT_KEYS, ctx)
    policy = _need(p, "policy", ctx)
    if policy not in PILOT_POLICIES:
        raise ScenarioError(f"{ctx}: unknown policy '{policy}' (known: {PILOT_POLICIES})")
    if policy == "segments":
        segs = _need(p, "segments", ctx)
        if not isinstance(segs, list) or not segs:
            raise ScenarioError(f"{ctx}: segments must be a non-empty list")
        for i, s in enumerate(segs):
            _reject_unknown(s, {"until", "v_target", "z_ref", "accel_limit"}, f"{ctx}.segments[{i}]")
            _num(_need(s, "until", f"{ctx}.segments[{i}]"), f"{ctx}.segments[{i}].until")
            _vec3(_need(s, "v_target", f"{ctx}.segments[{i}]"), f"{ctx}.segments[{i}].v_target")
    return p


def _quad_scenario_from_dict(d: dict, name: str) -> QuadScenario:
    geo = _need(d, "geofence", name)
    _reject_unknown(geo, _GEOFENCE_KEYS, f"{name}.geofence")
    box = GeofenceBox(
        _vec3(_need(geo, "center", f"{name}.geofence"), f"{name}.geofence.center"),
        _vec3(_need(geo, "half_extents", f"{name}.geofence"), f"{name}.geofence.half_extents"),
    )

    fd = d.get("filter", {})
    _reject_unknown(fd, _FILTER_KEYS, f"{name}.filter")
    try:
        fp = FilterParams(**{k: _num(v, f"{name}.filter.{k}") for k, v in fd.items()})
    except ValueError as e:
        raise ScenarioError(f"{name}.filter: {e}") from e

    fl = d.get("flow", {})
    _reject_unknown(fl, _FLOW_KEYS, f"{name}.flow")
    try:
        flow = FlowConfig(
            horizon=_num(fl.get("horizon", 3.0), f"{name}.flow.horizon"),
            dt=_num(fl.get("dt", 0.01), f"{name}.flow.dt"),
        )
    except ValueError as e:
        raise ScenarioError(f"{name}.flow: {e}") from e

    qd = d.get("quad", {})
    _reject_unknown(qd, _QUAD_KEYS, f"{name}.quad")
    try:
        qp = QuadParams(**{k: _num(v, f"{name}.quad.{k}") for k, v in qd.items()})
    except ValueError as e:
        raise ScenarioError(f"{name}.quad: {e}") from e

    st = _need(d, "start", name)
    _reject_unknown(st, _START_KEYS, f"{name}.start")
    start_p = _vec3(_need(st, "p", f"{name}.start"), f"{name}.start.p")
    start_v = _vec3(st.get("v", [0.0, 0.0, 0.0]), f"{name}.start.v")

    control_dt = _num(d.get("control_dt", 0.0025), f"{name}.control_dt")
    physics_dt = _num(d.get("physics_dt", 0.0005), f"{name}.physics_dt")
    if control_dt <= 0.0 or physics_dt <= 0.0:
        raise ScenarioError(f"{name}: control_dt and physics_dt must be positive")
    sub = control_dt / physics_dt
    if abs(sub - round(sub)) > 1e-9 or round(sub) < 1:
        raise ScenarioError(f"{name}: control_dt must be an integer multiple of physics_dt")

    duration = _num(_need(d, "duration", name), f"{name}.duration")
    if duration < 0.0:
        raise ScenarioError(f"{name}: duration must be nonnegative")

    pilot = _validate_pilot(_need(d, "pilot", name))

    allow_unsafe = d.get("allow_unsafe_start", False)
    if not isinstance(allow_unsafe, bool):
        raise ScenarioError(f"{name}.allow_unsafe_start: expected a boolean")

    return QuadScenario(
        name=name,
        duration=duration,
        control_dt=control_dt,
        physics_dt=physics_dt,
        geofence=box,
        filter_params=fp,
        flow=flow,
        quad_params=qp,
        start_p=start_p,
        start_v=start_v,
        pilot=pilot,
        allow_unsafe_start=allow_unsafe,
        seed=int(d.get("seed", 0)),
    )


def scenario_from_dict(d: dict) -> Loaded:
    _reject_unknown(d, _TOP_KEYS, "scenario")
    ver = d.get("schema_version", SCENARIO_SCHEMA_VERSION)
    if ver != SCENARIO_SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema_version {ver}")
    name = d.get("name", "unnamed")
    plant = d.get("plant", "quad")

    if plant == "pendulum":
        cd = _need(d, "compare", name)
        _reject_unknown(cd, _COMPARE_KEYS, f"{name}.compare")
        low = cd.get("low", {"beta": 5.0, "alpha": 1.0})
        high = cd.get("high", {"beta": 30.0, "alpha": 5.0})
        for label, g in (("low", low), ("high", high)):
            _reject_unknown(g, _GAIN_KEYS, f"{name}.compare.{label}")
        return CompareScenario(
            name=name,
            u_des=_num(cd.get("u_des", 2.0), f"{name}.compare.u_des"),
            duration=_num(cd.get("duration", 10.0), f"{name}.compare.duration"),
            control_dt=_num(cd.get("control_dt", 0.0025), f"{name}.compare.control_dt"),
            physics_dt=_num(cd.get("physics_dt", 0.0005), f"{name}.compare.physics_dt"),
            low=dict(low),
            high=dict(high),
            h_band=_num(cd.get("h_band", 0.2), f"{name}.compare.h_band"),
            seed=int(d.get("seed", 0)),
        )
    if plant != "quad":
        raise ScenarioError(f"unknown plant '{plant}'")

    if "flights" in d:
        flights = d["flights"]
        if not isinstance(flights, list) or not flights:
            raise ScenarioError("flights must be a non-empty list")
        base = {k: v for k, v in d.items() if k not in ("flights", "name")}
        out = []
        for i, fdict in enumerate(flights):
            _reject_unknown(fdict, _FLIGHT_KEYS, f"flights[{i}]")
            merged = dict(base)
            fname = fdict.get("name", f"flight{i}")
            for k in ("duration", "start", "pilot", "allow_unsafe_start"):
                if k in fdict:
                    merged[k] = fdict[k]
            out.append(_quad_scenario_from_dict(merged, f"{name}.{fname}"))
        return FlightSuite(name=name, flights=tuple(out))

    return _quad_scenario_from_dict(d, name)


def apply_overrides(d: dict, overrides: Sequence[str]) -> dict:
    """Apply dotted-key overrides (filter.beta=0.1) onto the raw scenario
    mapping.  Paths must already exist or name a known schema key at that
    level; values are YAML-parsed and must match the existing type."""
    out = dict(d)
    known_children = {
        "geofence": _GEOFENCE_KEYS,
        "filter": _FILTER_KEYS,
        "flow": _FLOW_KEYS,
        "quad": _QUAD_KEYS,
        "start": _START_KEYS,
        "pilot": _PILOT_KEYS,
        "compare": _COMPARE_KEYS,
    }
    for ov in overrides:
        if "=" not in ov:
            raise ScenarioError(f"override '{ov}' is not of the form key=value")
        key, _, raw = ov.partition("=")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ScenarioError(f"override '{ov}': unparseable value: {e}") from e
        parts = key.split(".")
        node = out
        for depth, part in enumerate(parts[:-1]):
            path = ".".join(parts[: depth + 1])
            if part not in node:
                if depth == 0 and part in known_children:
                    node[part] = {}
                else:
                    raise ScenarioError(f"override '{ov}': unknown section '{path}'")
            child = node[part]
            if not isinstance(child, dict):
                raise ScenarioError(f"override '{ov}': '{path}' is not a section")
            node[part] = dict(child)
            node = node[part]
        leaf = parts[-1]
        parent = parts[0] if len(parts) > 1 else None
        allowed = known_children.get(parent, _TOP_KEYS) if parent else _TOP_KEYS
        if leaf not in node and leaf not in allowed:
            raise ScenarioError(f"override '{ov}': unknown key '{key}'")
        if leaf in node:
            old = node[leaf]
            same_kind = (
                isinstance(value, type(old))
                or (isinstance(old, (int, float)) and isinstance(value, (int, float))
                    and not isinstance(old, bool) and not isinstance(value, bool))
                or (isinstance(old, list) and isinstance(value, list))
            )
            if old is not None and value is not None and not same_kind:
                raise ScenarioError(
                    f"override '{ov}': type mismatch ({type(value).__name__} vs {type(old).__name__})"
                )
        node[leaf] = value
    return out


def load_scenario(path: Union[str, Path], overrides: Sequence[str] = ()) -> Loaded:
    with open(path) as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: scenario file must hold a mapping")
    if overrides:
        raw = apply_overrides(raw, overrides)
    return scenario_from_dict(raw)


# ---------------------------------------------------------------------------
# pilots


def _chase_into(
    x: np.ndarray,
    u_out: np.ndarray,
    v_target: np.ndarray,
    z_ref: float,
    accel_limit: float,
    qp: QuadParams,
    qpa: np.ndarray,
    kp: float,
    kz: float,
    kdz: float,
) -> None:
    ax = kp * (v_target[0] - x[7])
    ay = kp * (v_target[1] - x[8])
    az = kz * (z_ref - x[2]) + kdz * (v_target[2] - x[9]) + qp.gravity
    ah = np.hypot(ax, ay)
    if ah > accel_limit:
        ax *= accel_limit / ah
        ay *= accel_limit / ah
    _k.accel_cmd_into(x, ax, ay, az, 5.0, qpa, u_out)


def make_pilot(pilot: dict, scenario: QuadScenario) -> PilotSource:
    """Build the scripted pilot for a scenario; returns None ticks for radio
    silence (the harness then applies the 100 ms hold-then-zeros rule)."""
    policy = pilot["policy"]
    qp = scenario.quad_params
    qpa = qp.as_array()

    if policy == "zero":
        u = np.zeros(4)
        return lambda t, x: u

    if policy == "hover":
        u = np.array([qp.hover_throttle, 0.0, 0.0, 0.0])
        return lambda t, x: u

    if policy == "raw":
        u = np.zeros(4)
        u[0] = float(pilot.get("throttle", qp.hover_throttle))
        u[1:4] = np.asarray(pilot.get("rates", [0.0, 0.0, 0.0]), dtype=np.float64)
        return lambda t, x: u

    if policy == "silence":
        until = float(pilot.get("until", 0.5))
        u = np.array([qp.hover_throttle, 0.0, 0.0, 0.0])

        def src(t, x):
            return u if t < until else None

        return src

    if policy == "velocity_chase":
        v_target = np.asarray(pilot.get("v_target", [0.0, 0.0, 0.0]), dtype=np.float64)
        z_ref = float(pilot.get("z_ref", scenario.start_p[2]))
        accel_limit = float(pilot.get("accel_limit", 24.0))
        kp = float(pilot.get("kp", 2.0))
        kz = float(pilot.get("kz", 2.0))
        kdz = float(pilot.get("kdz", 3.0))
        u = np.zeros(4)

        def src(t, x):
            _chase_into(x, u, v_target, z_ref, accel_limit, qp, qpa, kp, kz, kdz)
            return u

        return src

    if policy == "segments":
        segs = []
        for s in pilot["segments"]:
            segs.append(
                (
                    float(s["until"]),
                    np.asarray(s["v_target"], dtype=np.float64),
                    float(s.get("z_ref", scenario.start_p[2])),
                    float(s.get("accel_limit", 12.0)),
                )
            )
        u = np.zeros(4)

        def src(t, x):
            for until, v_target, z_ref, accel_limit in segs:
                if t < until:
                    _chase_into(x, u, v_target, z_ref, accel_limit, qp, qpa, 2.0, 2.0, 3.0)
                    return u
            return None  # past the script: radio goes quiet

        return src

    raise ScenarioError(f"unknown pilot policy '{policy}'")


# ---------------------------------------------------------------------------
# the loop


def run_scenario(s: QuadScenario, pilot_source: Optional[PilotSource] = None) -> TelemetryLog:
    """Closed-loop run; returns the telemetry log (log.violated marks a fence
    crossing, which also stops the run early)."""
    filt = GeofenceFilter(s.geofence, s.filter_params, s.quad_params, s.flow)
    filt.warm_up()

    x = QuadState(p_w=s.start_p.copy(), v_w=s.start_v.copy()).as_array()
    if not s.allow_unsafe_start and filt.hI(x) <= 0.0:
        raise UnsafeStartError(
            f"{s.name}: initial state is outside the invariant set (hI <= 0); "
            "set allow_unsafe_start to run anyway"
        )

    pilot = pilot_source if pilot_source is not None else make_pilot(s.pilot, s)
    log = TelemetryLog(s.n_ticks + 1)
    out = np.zeros(_k.OUT_DIM)
    scr = np.zeros((_k.SCRATCH_ROWS, _k.STATE_DIM))
    qpa = s.quad_params.as_array()
    zeros4 = np.zeros(4)

    held = np.zeros(4)
    have_held = False
    t_last_msg = -np.inf

    def desired(t: float) -> np.ndarray:
        nonlocal have_held, t_last_msg
        u = pilot(t, x)
        if u is not None:
            held[:] = u
            have_held = True
            t_last_msg = t
        if not have_held or (t - t_last_msg) > RADIO_TIMEOUT_S:
            return zeros4
        return held

    sub = s.substeps
    for k in range(s.n_ticks):
        t = k * s.control_dt
        u_des = desired(t)
        filt.filter_into(x, u_des, out)
        log.append(t, x, u_des, out[0:4], out[5], out[4], out[6])
        for _ in range(sub):
            _k.quad_plant_step(x, out[0:4], qpa, s.physics_dt, scr)
        if _k.box_h(x[0], x[1], x[2], filt._box_true) < 0.0:
            log.violated = True
            t_end = (k + 1) * s.control_dt
            u_des = desired(t_end)
            filt.filter_into(x, u_des, out)
            log.append(t_end, x, u_des, out[0:4], out[5], out[4], out[6])
            return log

    t_end = s.n_ticks * s.control_dt
    u_des = desired(t_end)
    filt.filter_into(x, u_des, out)
    log.append(t_end, x, u_des, out[0:4], out[5], out[4], out[6])
    return log


# ---------------------------------------------------------------------------
# benchmarking


@dataclass
class BenchReport:
    n: int
    median_ms: float
    p99_ms: float
    alloc_blocks_delta: int
    n_steps: int

    def summary(self) -> str:
        if self.n == 0:
            return "bench: no samples"
        return (
            f"bench over {self.n} calls ({self.n_steps}-step rollout): "
            f"median {self.median_ms:.3f} ms, p99 {self.p99_ms:.3f} ms, "
            f"net allocated-block delta {self.alloc_blocks_delta}"
        )


def representative_states(box: GeofenceBox, n: int, seed: int = 0) -> np.ndarray:
    """Random in-box states with speeds up to sprint scale, for benching."""
    rng = np.random.default_rng(seed)
    xs = np.zeros((n, _k.STATE_DIM))
    for i in range(n):
        xs[i, 0:3] = box.center + rng.uniform(-0.8, 0.8, 3) * box.half_extents
        q = rng.normal(size=4)
        xs[i, 3:7] = q / np.linalg.norm(q)
        xs[i, 7:10] = rng.uniform(-30.0, 30.0, 3)
        xs[i, 10:13] = rng.uniform(-2.0, 2.0, 3)
    return xs


def bench_filter(
    filt: Optional[GeofenceFilter] = None, n: int = 1000, seed: int = 0
) -> BenchReport:
    """Steady-state per-call timing and allocation audit of the hot path."""
    if filt is None:
        filt = GeofenceFilter(
            GeofenceBox(np.array([0.0, 0.0, 10.0]), np.array([10.0, 10.0, 9.5]))
        )
    n_steps = filt.flow.n_steps
    if n == 0:
        return BenchReport(0, float("nan"), float("nan"), 0, n_steps)

    xs = representative_states(filt.box, n, seed)
    rng = np.random.default_rng(seed + 1)
    us = np.column_stack(
        [
            rng.uniform(0.0, 1.0, n),
            rng.uniform(-10.0, 10.0, (n, 3)),
        ]
    )
    out = np.zeros(_k.OUT_DIM)

    filt.warm_up()
    for i in range(min(n, 50)):
        filt.filter_into(xs[i], us[i], out)

    times = np.empty(n)
    for i in range(n):
        t0 = time.perf_counter_ns()
        filt.filter_into(xs[i], us[i], out)
        times[i] = time.perf_counter_ns() - t0

    gc.collect()
    b0 = sys.getallocatedblocks()
    for i in range(n):
        filt.filter_into(xs[i], us[i], out)
    delta = sys.getallocatedblocks() - b0

    return BenchReport(
        n=n,
        median_ms=float(np.median(times) / 1e6),
        p99_ms=float(np.percentile(times, 99) / 1e6),
        alloc_blocks_delta=int(delta),
        n_steps=n_steps,
    )
