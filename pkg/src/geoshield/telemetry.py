"""Per-tick flight records and derived run metrics.

A log holds one row per control tick plus a terminal row, in a fixed 25
column layout (documented below); metrics reduce a log to the handful of
numbers the regression scenarios assert on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from geoshield.safety_filter import GeofenceBox

CSV_HEADER = (
    "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,"
    "throttle_des,wdx_des,wdy_des,wdz_des,"
    "throttle_cmd,wx_cmd,wy_cmd,wz_cmd,hI,lambda,vperp"
)
N_COLS = 25

COL_T = 0
COL_P = slice(1, 4)
COL_Q = slice(4, 8)
COL_V = slice(8, 11)
COL_W = slice(11, 14)
COL_UDES = slice(14, 18)
COL_UCMD = slice(18, 22)
COL_HI = 22
COL_LAMBDA = 23
COL_VPERP = 24

METRICS_SCHEMA_VERSION = 1


class TelemetryLog:
    """Append-only, preallocated row store; t strictly increasing."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self._rows = np.zeros((capacity, N_COLS))
        self.n = 0
        self.violated = False

    def append(
        self,
        t: float,
        x: np.ndarray,
        u_des: np.ndarray,
        u_cmd: np.ndarray,
        h_i: float,
        lam: float,
        v_perp: float,
    ) -> None:
        if self.n >= self._rows.shape[0]:
            raise ValueError("log capacity exceeded")
        if self.n > 0 and t <= self._rows[self.n - 1, COL_T]:
            raise ValueError("t must be strictly increasing")
        r = self._rows[self.n]
        r[COL_T] = t
        r[1:14] = x
        r[COL_UDES] = u_des
        r[COL_UCMD] = u_cmd
        r[COL_HI] = h_i
        r[COL_LAMBDA] = lam
        r[COL_VPERP] = v_perp
        self.n += 1

    @property
    def rows(self) -> np.ndarray:
        return self._rows[: self.n]

    @property
    def capacity(self) -> int:
        return self._rows.shape[0]

    def to_csv(self, path: str) -> None:
        np.savetxt(path, self.rows, delimiter=",", header=CSV_HEADER, comments="", fmt="%.9g")

    @classmethod
    def from_csv(cls, path: str) -> "TelemetryLog":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != N_COLS:
            raise ValueError("unexpected column count")
        log = cls(max(data.shape[0], 1))
        log._rows[: data.shape[0]] = data
        log.n = data.shape[0]
        return log


@dataclass
class Metrics:
    top_speed: float
    min_h: float
    min_face_distance: float
    min_lambda: float
    stop_distance_to_face: float
    max_command_step: float
    duration: float
    n_rows: int
    violated: bool

    def to_json(self, path: str) -> None:
        payload = {"schema_version": METRICS_SCHEMA_VERSION}
        payload.update(asdict(self))
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")

    def summary(self) -> str:
        return (
            f"top_speed      {self.top_speed:8.3f} m/s\n"
            f"min_h          {self.min_h:8.3f} m^2\n"
            f"min_face_dist  {self.min_face_distance:8.3f} m\n"
            f"min_lambda     {self.min_lambda:8.4f}\n"
            f"stop_distance  {self.stop_distance_to_face:8.3f} m\n"
            f"max_cmd_step   {self.max_command_step:8.4f}\n"
            f"violated       {self.violated}"
        )


def _active_face_distance(p: np.ndarray, box: GeofenceBox) -> float:
    """Plain-meters distance to the face that attains the min in the squared
    clearance (the axis the shield is actually fighting)."""
    d = p - box.center
    clear2 = box.half_extents**2 - d**2
    i = int(np.argmin(clear2))
    return float(box.half_extents[i] - abs(d[i]))


def compute_metrics(log: TelemetryLog, box: GeofenceBox, rate_limit: float = 10.0) -> Metrics:
    if log.n == 0:
        raise ValueError("empty log")
    rows = log.rows
    p = rows[:, COL_P]
    v = rows[:, COL_V]
    speeds = np.linalg.norm(v, axis=1)
    d = p - box.center
    clear2 = box.half_extents**2 - d**2
    min_h = float(np.min(clear2))

    face_dist = np.empty(log.n)
    for k in range(log.n):
        i = int(np.argmin(clear2[k]))
        face_dist[k] = box.half_extents[i] - abs(d[k, i])

    # stop point: lock onto the face the run actually engaged (global minimum
    # of per-axis face distance), then find the first tick the approach speed
    # toward that face drops below 0.1 m/s after the peak-approach tick.
    # Undefined (nan) when the run never built up approach speed.
    per_axis_dist = box.half_extents[None, :] - np.abs(d)
    flat = int(np.argmin(per_axis_dist))
    k_eng, ax = divmod(flat, 3)
    side = math.copysign(1.0, d[k_eng, ax]) if d[k_eng, ax] != 0.0 else 1.0
    approach = side * v[:, ax]
    eng_dist = box.half_extents[ax] - side * d[:, ax]

    stop_distance = float("nan")
    peak_k = int(np.argmax(approach))
    if approach[peak_k] > 0.5:
        for k in range(peak_k, log.n):
            if approach[k] < 0.1:
                stop_distance = float(eng_dist[k])
                break

    u_norm = rows[:, COL_UCMD].copy()
    u_norm[:, 1:] /= rate_limit
    max_step = float(np.max(np.abs(np.diff(u_norm, axis=0)))) if log.n > 1 else 0.0

    return Metrics(
        top_speed=float(np.max(speeds)),
        min_h=min_h,
        min_face_distance=float(np.min(face_dist)),
        min_lambda=float(np.min(rows[:, COL_LAMBDA])),
        stop_distance_to_face=stop_distance,
        max_command_step=max_step,
        duration=float(rows[-1, COL_T]),
        n_rows=log.n,
        violated=bool(min_h < 0.0),
    )


@dataclass
class Engagement:
    """One close approach to the fence and the retreat that followed."""

    t_enter: float
    t_exit: float
    min_face_distance: float
    retreat: float


def find_engagements(
    log: TelemetryLog, box: GeofenceBox, engage_dist: float = 2.0
) -> list[Engagement]:
    """Segment a run into fence engagements and measure the retreat depth
    achieved after each one (gain in active-face distance before the next
    engagement starts, or before the run ends)."""
    rows = log.rows
    p = rows[:, COL_P]
    t = rows[:, COL_T]
    d = p - box.center
    clear2 = box.half_extents**2 - d**2
    n = log.n
    face_dist = np.empty(n)
    for k in range(n):
        i = int(np.argmin(clear2[k]))
        face_dist[k] = box.half_extents[i] - abs(d[k, i])

    engagements: list[Engagement] = []
    k = 0
    while k < n:
        if face_dist[k] < engage_dist:
            start = k
            while k < n and face_dist[k] < engage_dist:
                k += 1
            end = k  # first tick back outside the engagement band
            nxt = n
            j = k
            while j < n:
                if face_dist[j] < engage_dist:
                    nxt = j
                    break
                j += 1
            dmin = float(np.min(face_dist[start:end]))
            after = face_dist[end:nxt]
            retreat = float(np.max(after) - dmin) if after.size else 0.0
            engagements.append(
                Engagement(
                    t_enter=float(t[start]),
                    t_exit=float(t[min(end, n - 1)]),
                    min_face_distance=dmin,
                    retreat=retreat,
                )
            )
        else:
            k += 1
    return engagements
