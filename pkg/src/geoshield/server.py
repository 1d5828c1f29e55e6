"""Cockpit session server: websocket stick input in, shielded 400 Hz sim loop
in the middle, decimated telemetry out.

Wire protocol (JSON text frames, `version` mandatory on every message):

  client -> server
    {"version": 1, "type": "control",
     "payload": {"action": "start", "scenario": "<id>", "max_ticks": 0}}
    {"version": 1, "type": "control", "payload": {"action": "fly" | "stop" | "status"}}
    {"version": 1, "type": "input",
     "payload": {"seq": 1, "timestamp_ms": 0.0, "throttle": 0.3,
                  "roll_rate": 0.0, "pitch_rate": 0.0, "yaw_rate": 0.0}}

  server -> client
    {"version": 1, "type": "control",  "payload": {"event": ..., ...}}
    {"version": 1, "type": "error",    "payload": {"message": ..., ...}}
    {"version": 1, "type": "geofence", "payload": {"center", "half_extents", "margin"}}
    {"version": 1, "type": "telemetry", "payload": TelemetryFrame fields}

The control loop runs on its own thread and owns the sim state exclusively;
the socket side exchanges data with it through latest-wins cells (input in,
newest log row index out), so a stalled or slow client never blocks a tick.
Rate axes arrive normalized to [-1, 1] and are scaled by the plant's rate
limit; input silence is measured in sim time and falls to zero commands after
100 ms, the same radio-loss rule the scenario harness applies.

Session phases: idle -> armed (start) -> flying (first input or "fly") ->
violated-halt (fence crossing, terminal).  A normal stop returns to idle.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from . import _kernels as _k
from .harness import QuadScenario, RADIO_TIMEOUT_S, load_scenario
from .safety_filter import GeofenceFilter
from .telemetry import (
    COL_HI,
    COL_LAMBDA,
    COL_VPERP,
    TelemetryLog,
)

PROTOCOL_VERSION = 1
TELEMETRY_HZ = 60.0
MAX_SESSION_S = 600.0

PHASE_IDLE = "idle"
PHASE_ARMED = "armed"
PHASE_FLYING = "flying"
PHASE_VIOLATED = "violated-halt"


def shipped_quad_scenarios() -> dict[str, Path]:
    import importlib.resources

    root = importlib.resources.files("geoshield") / "scenarios"
    out = {}
    for p in root.iterdir():
        if not p.name.endswith(".yaml"):
            continue
        try:
            loaded = load_scenario(Path(str(p)))
        except Exception:
            continue
        if isinstance(loaded, QuadScenario):
            out[p.name[: -len(".yaml")]] = Path(str(p))
    return out


@dataclass
class _InputCell:
    """Latest-wins handoff from the socket reader to the control loop."""

    gen: int = 0
    u_des: np.ndarray = field(default_factory=lambda: np.zeros(4))
    last_seq: int = -1

    def put(self, u: np.ndarray, seq: int) -> None:
        self.u_des = u  # whole-array swap, readers never see a torn write
        self.last_seq = seq
        self.gen += 1


class Session:
    """One piloted run: sim loop thread plus the state the socket side reads."""

    def __init__(self, sid: int, scenario: QuadScenario, turbo: bool, max_ticks: int = 0):
        self.sid = sid
        self.scenario = scenario
        self.turbo = turbo
        self.max_ticks = int(max_ticks)
        self.phase = PHASE_IDLE
        self.input = _InputCell()
        self.malformed = 0
        self.input_age_ms = 0.0
        self.latest_row = -1
        self.fly_requested = False
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

        self.filt = GeofenceFilter(
            scenario.geofence, scenario.filter_params, scenario.quad_params, scenario.flow
        )
        cap = int(round(MAX_SESSION_S / scenario.control_dt)) + 2
        self.log = TelemetryLog(cap)
        self.jitter_s = np.zeros(cap)
        self.ticks = 0

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        self.filt.warm_up()
        x = np.zeros(13)
        x[0:3] = self.scenario.start_p
        x[3] = 1.0
        x[7:10] = self.scenario.start_v
        if self.filt.hI(x) <= 0.0:
            raise ValueError("scenario start state is outside the invariant set")
        self._x = x
        self.phase = PHASE_ARMED
        self._thread = threading.Thread(target=self._run, name=f"geoshield-loop-{self.sid}", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        if self.phase not in (PHASE_VIOLATED,):
            self.phase = PHASE_IDLE

    @property
    def active(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    # -- the loop -----------------------------------------------------------

    def _run(self) -> None:
        s = self.scenario
        dt = s.control_dt
        substeps = s.substeps
        qpa = s.quad_params.as_array()
        hover = np.array([s.quad_params.hover_throttle, 0.0, 0.0, 0.0])
        zeros4 = np.zeros(4)
        u_des = np.zeros(4)
        out = np.zeros(11)
        scr = np.zeros((_k.SCRATCH_ROWS, _k.STATE_DIM))
        box = s.geofence.as_array()
        x = self._x

        seen_gen = 0
        last_input_t = -1e18  # sim time of the newest accepted input
        t = 0.0
        k = 0
        t0 = time.perf_counter()
        while not self._stop.is_set():
            if not self.turbo:
                deadline = t0 + (k + 1) * dt
                now = time.perf_counter()
                lag = now - deadline
                if lag < 0.0:
                    # hybrid pacing: coarse sleep, then spin out the remainder
                    if -lag > 0.0015:
                        time.sleep(-lag - 0.001)
                    while (now := time.perf_counter()) < deadline:
                        pass
                    lag = now - deadline
                if k < self.jitter_s.shape[0]:
                    self.jitter_s[k] = max(lag, 0.0)

            cell = self.input
            if cell.gen != seen_gen:
                seen_gen = cell.gen
                last_input_t = t
                if self.phase == PHASE_ARMED:
                    self.phase = PHASE_FLYING
            if self.fly_requested and self.phase == PHASE_ARMED:
                self.phase = PHASE_FLYING
            age = t - last_input_t
            self.input_age_ms = min(age, 1e15) * 1e3

            if self.phase == PHASE_ARMED:
                u_des[:] = hover
            elif age <= RADIO_TIMEOUT_S:
                u_des[:] = cell.u_des
            else:
                u_des[:] = zeros4

            self.filt.filter_into(x, u_des, out)
            self.log.append(t, x, u_des, out[0:4], out[5], out[4], out[6])
            self.latest_row = self.log.n - 1

            for _ in range(substeps):
                _k.quad_plant_step(x, out[0:4], qpa, s.physics_dt, scr)
            t = (k + 1) * dt
            k += 1
            self.ticks = k

            d = np.abs(x[0:3] - box[0:3])
            if np.any(d > box[3:6]):
                self.log.append(t, x, u_des, out[0:4], out[5], out[4], out[6])
                self.log.violated = True
                self.latest_row = self.log.n - 1
                self.phase = PHASE_VIOLATED
                return
            if self.log.n >= self.log.capacity - 1:
                break
            if self.max_ticks and k >= self.max_ticks:
                break
        if self.phase != PHASE_VIOLATED:
            self.phase = PHASE_IDLE

    # -- stats --------------------------------------------------------------

    def stats(self) -> dict:
        j = self.jitter_s[: self.ticks]
        have = j.size > 0 and not self.turbo
        return {
            "session": self.sid,
            "phase": self.phase,
            "ticks": self.ticks,
            "malformed": self.malformed,
            "violated": bool(self.log.violated),
            "jitter_p50_ms": float(np.percentile(j, 50) * 1e3) if have else None,
            "jitter_p99_ms": float(np.percentile(j, 99) * 1e3) if have else None,
        }


def _msg(mtype: str, payload: dict) -> dict:
    return {"version": PROTOCOL_VERSION, "type": mtype, "payload": payload}


def _parse_input(payload: dict, rate_limit: float) -> Optional[tuple[np.ndarray, int]]:
    """Validated (u_des, seq) from an input payload, or None if malformed."""
    try:
        seq = int(payload["seq"])
        thr = float(payload["throttle"])
        rates = [float(payload[k]) for k in ("roll_rate", "pitch_rate", "yaw_rate")]
    except (KeyError, TypeError, ValueError):
        return None
    if not (0.0 <= thr <= 1.0) or not all(-1.0 <= r <= 1.0 for r in rates):
        return None
    u = np.array([thr, rates[0] * rate_limit, rates[1] * rate_limit, rates[2] * rate_limit])
    if not np.all(np.isfinite(u)):
        return None
    return u, seq


def create_app(
    scenarios: Optional[dict[str, Path]] = None,
    turbo: bool = False,
    display_latency_ms: float = 0.0,
) -> FastAPI:
    """App factory.  turbo drops real-time pacing (tests); display_latency_ms
    delays outgoing telemetry to mimic an FPV link, default off."""
    app = FastAPI()
    table = scenarios if scenarios is not None else shipped_quad_scenarios()
    sessions: dict[int, Session] = {}
    counter = {"next": 1}

    @app.get("/scenarios")
    def list_scenarios():
        return JSONResponse(sorted(table))

    @app.get("/log/{sid}")
    def get_log(sid: int):
        ses = sessions.get(sid)
        if ses is None:
            return PlainTextResponse("unknown session", status_code=404)
        import io

        buf = io.StringIO()
        ses.log.to_csv(buf)
        return PlainTextResponse(buf.getvalue(), media_type="text/csv")

    @app.get("/stats/{sid}")
    def get_stats(sid: int):
        ses = sessions.get(sid)
        if ses is None:
            return JSONResponse({"message": "unknown session"}, status_code=404)
        return JSONResponse(ses.stats())

    async def telemetry_pump(ws: WebSocket, ses: Session):
        """Send the newest logged row at the decimation rate; lossy on lag."""
        sent_row = -1
        sent_phase = None
        period = 1.0 / TELEMETRY_HZ
        delay = max(display_latency_ms, 0.0) / 1e3
        while True:
            await asyncio.sleep(period)
            if ses.phase != sent_phase:
                sent_phase = ses.phase
                await ws.send_text(json.dumps(_msg("control", {"event": "phase", "phase": sent_phase})))
            idx = ses.latest_row
            if idx < 0 or idx == sent_row:
                continue
            sent_row = idx
            row = ses.log.rows[idx].copy()
            if delay:
                await asyncio.sleep(delay)
            frame = {
                "t": row[0],
                "position": row[1:4].tolist(),
                "quaternion": row[4:8].tolist(),
                "velocity": row[8:11].tolist(),
                "u_des": row[14:18].tolist(),
                "u_cmd": row[18:22].tolist(),
                "h_I": row[COL_HI],
                "lambda": row[COL_LAMBDA],
                "v_perp": row[COL_VPERP],
                "phase": ses.phase,
                "input_age_ms": ses.input_age_ms,
                "session": ses.sid,
            }
            await ws.send_text(json.dumps(_msg("telemetry", frame)))

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        ses: Optional[Session] = None
        pump: Optional[asyncio.Task] = None

        async def send(mtype: str, payload: dict):
            await ws.send_text(json.dumps(_msg(mtype, payload)))

        try:
            while True:
                try:
                    raw = await ws.receive_text()
                except WebSocketDisconnect:
                    break
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    if ses is not None:
                        ses.malformed += 1
                    await send("error", {"message": "not JSON"})
                    continue
                if not isinstance(msg, dict) or msg.get("version") != PROTOCOL_VERSION:
                    if ses is not None:
                        ses.malformed += 1
                    await send("error", {"message": f"missing or wrong version (want {PROTOCOL_VERSION})"})
                    continue
                mtype = msg.get("type")
                payload = msg.get("payload") or {}

                if mtype == "input":
                    if ses is None or not ses.active:
                        continue  # stick noise with no session: ignore silently
                    parsed = _parse_input(payload, ses.scenario.quad_params.rate_limit)
                    if parsed is None:
                        ses.malformed += 1
                        continue
                    u, seq = parsed
                    if seq <= ses.input.last_seq:
                        continue  # stale or replayed
                    ses.input.put(u, seq)
                    continue

                if mtype != "control":
                    await send("error", {"message": f"unknown message type '{mtype}'"})
                    continue

                action = payload.get("action")
                if action == "start":
                    if ses is not None and ses.active and ses.phase in (PHASE_ARMED, PHASE_FLYING):
                        await send("error", {"message": "session already running; stop it first"})
                        continue
                    name = payload.get("scenario")
                    if name not in table:
                        await send(
                            "error",
                            {"message": f"unknown scenario '{name}'", "available": sorted(table)},
                        )
                        continue
                    sc = load_scenario(table[name])
                    try:
                        new = Session(counter["next"], sc, turbo, int(payload.get("max_ticks", 0)))
                        new.start()
                    except ValueError as e:
                        await send("error", {"message": str(e)})
                        continue
                    counter["next"] += 1
                    ses = new
                    sessions[ses.sid] = ses
                    g = sc.geofence
                    await send(
                        "control",
                        {"event": "started", "session": ses.sid, "scenario": name, "phase": ses.phase},
                    )
                    await send(
                        "geofence",
                        {
                            "center": g.center.tolist(),
                            "half_extents": g.half_extents.tolist(),
                            "margin": sc.filter_params.margin,
                        },
                    )
                    if pump is not None:
                        pump.cancel()
                    pump = asyncio.create_task(telemetry_pump(ws, ses))
                elif action == "fly":
                    if ses is None or not ses.active:
                        await send("error", {"message": "no active session"})
                        continue
                    ses.fly_requested = True
                    await send("control", {"event": "fly-requested"})
                elif action == "stop":
                    if ses is None:
                        await send("error", {"message": "no session"})
                        continue
                    ses.stop()
                    await send("control", {"event": "stopped", **ses.stats()})
                elif action == "status":
                    await send("control", {"event": "status", **(ses.stats() if ses else {"phase": PHASE_IDLE})})
                else:
                    await send("error", {"message": f"unknown action '{action}'"})
        finally:
            if pump is not None:
                pump.cancel()
            if ses is not None:
                ses.stop()

    return app
