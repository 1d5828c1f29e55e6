"""Geofence shield: safe sets, backup controller, regulation blend.

The shield keeps a quadrotor inside an axis-aligned box without ever taking
authority away discontinuously.  Safety of a state is judged by rolling the
backup controller forward (see ``flow``/``_kernels``) and taking the worst
clearance along the way; the pilot's command is then blended with the backup
command through a regulation gain that decays to zero as that clearance
shrinks, scaled by how fast the vehicle is actually closing on the nearest
face.

Units: box clearances are in m² (squared-distance form), speeds in m/s.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from geoshield import _kernels as _k
from geoshield.flow import FlowConfig
from geoshield.pendulum import PendulumState
from geoshield.quadrotor import QuadCommand, QuadParams, QuadState


@dataclass(frozen=True)
class GeofenceBox:
    """Axis-aligned flight box: stay-inside region for the vehicle center."""

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    half_extents: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 10.0]))

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=np.float64))
        if self.center.shape != (3,) or self.half_extents.shape != (3,):
            raise ValueError("center and half_extents must be 3-vectors")
        if not np.all(self.half_extents > 0.0):
            raise ValueError("half_extents must be positive")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.center, self.half_extents])

    def shrunk(self, margin: float) -> "GeofenceBox":
        """Box pulled in by margin meters on every face."""
        if margin < 0.0 or np.any(self.half_extents <= margin):
            raise ValueError("margin must be nonnegative and smaller than every half extent")
        return GeofenceBox(self.center.copy(), self.half_extents - margin)


@dataclass(frozen=True)
class FilterParams:
    """Shield tuning.

    beta is the regulation decay gain (per m² of clearance, per m/s of
    approach speed in the scaled form); delta is the push-back depth of the
    backup velocity field in clearance units (m²); epsilon bounds the speed
    the backup must reach by the end of the horizon; margin shrinks the box
    the shield enforces, absorbing one-tick overshoot and rollout model error.
    terminal_weight steepens the terminal speed term so a tight epsilon does
    not flatten the blended gain far from the fence.
    """

    beta: float = 0.5
    delta: float = 1.0
    epsilon: float = 0.1
    v_floor: float = 1.0
    K_v: float = 3.0
    K_q: float = 5.0
    v_backup_max: float = 2.0
    terminal_weight: float = 1000.0
    margin: float = 0.6

    def __post_init__(self) -> None:
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.v_floor <= 0.0:
            raise ValueError("v_floor must be positive")
        if self.K_v <= 0.0 or self.K_q <= 0.0:
            raise ValueError("gains must be positive")
        if self.v_backup_max <= 0.0:
            raise ValueError("v_backup_max must be positive")
        if self.terminal_weight <= 0.0:
            raise ValueError("terminal_weight must be positive")
        if self.margin < 0.0:
            raise ValueError("margin must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.beta,
                self.delta,
                self.epsilon,
                self.v_floor,
                self.K_v,
                self.K_q,
                self.v_backup_max,
                self.terminal_weight,
            ]
        )


@dataclass(frozen=True)
class FilterOutput:
    """One shield evaluation, unpacked for telemetry."""

    u_cmd: QuadCommand
    lam: float
    h_I: float
    v_perp: float
    backup_cmd: QuadCommand


def geofence_h(p: np.ndarray, box: GeofenceBox) -> float:
    """Squared clearance to the nearest face: min over axes of r² − d²."""
    p = np.asarray(p, dtype=np.float64)
    d = p - box.center
    return float(np.min(box.half_extents**2 - d**2))


def backup_set_h(v: np.ndarray, eps: float = 0.1) -> float:
    """Membership margin of the slow set: eps − |v|."""
    return float(eps - np.linalg.norm(np.asarray(v, dtype=np.float64)))


def backup_desired_velocity(
    p: np.ndarray, box: GeofenceBox, delta: float = 1.0, v_max: float = 2.0
) -> np.ndarray:
    """Per-axis push-back field: zero where the axis clearance exceeds delta,
    else a velocity toward the interior growing with the deficit, saturated."""
    p = np.asarray(p, dtype=np.float64)
    d = p - box.center
    clear = box.half_extents**2 - d**2
    v_des = np.zeros(3)
    for i in range(3):
        if clear[i] < delta:
            mag = min(delta - clear[i], v_max)
            v_des[i] = -np.sign(d[i]) * mag if d[i] != 0.0 else 0.0
            # dead center with zero clearance deficit cannot happen for a
            # valid box (clear = r^2 >= delta would be needed); d == 0 with
            # clear < delta means r^2 < delta, push direction undefined, hold.
    return v_des


def backup_controller(
    x: QuadState, box: GeofenceBox, fp: FilterParams, qp: QuadParams
) -> QuadCommand:
    """Velocity-tracking cascade used as the backup policy.

    Acceleration demand K_v·(v_des − v) + g·e_z is realized as a throttle
    (inverse thrust curve) plus body rates that rotate the current body z
    axis onto the demand direction with gain K_q; yaw rate is left at zero.
    """
    u = np.empty(4)
    _k.backup_cmd_into(
        x.as_array(), box.as_array(), qp.as_array(), fp.K_v, fp.K_q, fp.v_backup_max, fp.delta, u
    )
    return QuadCommand.from_array(u)


def regulation_lambda(h_I: float, v_perp: float, fp: FilterParams, scaled: bool = True) -> float:
    """Blend gain in [0,1]: 0 at (or past) the boundary, 1 deep inside.

    Scaled form divides the clearance by the approach speed so the gain
    starts falling earlier the faster the vehicle closes in.
    """
    if scaled:
        return float(_k.lambda_scaled(fp.beta, h_I, v_perp, fp.v_floor))
    return float(_k.lambda_plain(fp.beta, h_I))


def perpendicular_speed(x: QuadState, box: GeofenceBox) -> float:
    """Speed toward the face with the least squared clearance, floored at 0.

    Ties take the largest approach speed among the tied faces.  The two faces
    of an axis are treated as increasingly tied toward the axis midplane, so
    the value fades to the unsigned axis speed there instead of snapping when
    the nearer-face identity flips.
    """
    return float(_k.vperp_of(x.as_array(), box.as_array()))


class GeofenceFilter:
    """Stateful shield instance: owns the rollout buffers for one control loop.

    All heavy work happens in compiled kernels over flat float64 arrays; the
    buffers here are allocated once so the per-tick path does not touch the
    allocator.  One instance per control loop; instances are independent.
    """

    def __init__(
        self,
        box: GeofenceBox,
        params: Optional[FilterParams] = None,
        quad_params: Optional[QuadParams] = None,
        flow: Optional[FlowConfig] = None,
    ):
        self.box = box
        self.params = params if params is not None else FilterParams()
        self.quad_params = quad_params if quad_params is not None else QuadParams()
        self.flow = flow if flow is not None else FlowConfig(horizon=3.0, dt=0.01)
        if np.any(box.half_extents <= self.params.margin):
            raise ValueError("every half extent must exceed the inflation margin")

        self._qp = self.quad_params.as_array()
        self._fp = self.params.as_array()
        self._box_true = box.as_array()
        self._box_eff = box.shrunk(self.params.margin).as_array() if self.params.margin > 0.0 else box.as_array()
        self._n_steps = self.flow.n_steps
        self._dt = self.flow.dt
        self._traj = np.zeros((self._n_steps + 1, _k.STATE_DIM))
        self._scr = np.zeros((_k.SCRATCH_ROWS, _k.STATE_DIM))
        self._out = np.zeros(_k.OUT_DIM)

    def warm_up(self) -> None:
        """Trigger kernel compilation off the timed path."""
        x = QuadState(p_w=self.box.center.copy()).as_array()
        u = np.array([self.quad_params.hover_throttle, 0.0, 0.0, 0.0])
        self.filter_into(x, u, self._out)

    def hI(self, x: np.ndarray | QuadState) -> float:
        """Rollout barrier value at a state (margin-shrunk box)."""
        if isinstance(x, QuadState):
            x = x.as_array()
        return float(
            _k.quad_hI(
                np.asarray(x, dtype=np.float64),
                self._box_eff,
                self._qp,
                self._fp,
                self._dt,
                self._n_steps,
                self._traj,
                self._scr,
            )
        )

    def filter_into(self, x: np.ndarray, u_des: np.ndarray, out: np.ndarray) -> None:
        """Allocation-free path: flat arrays in, 11-slot result out.

        out layout: [u_cmd(4), lambda, h_I, v_perp, backup_cmd(4)].
        """
        _k.quad_filter_into(
            x,
            u_des,
            self._box_true,
            self._box_eff,
            self._qp,
            self._fp,
            self._dt,
            self._n_steps,
            self._traj,
            self._scr,
            out,
        )

    def filter_command(self, x: QuadState, u_des: QuadCommand) -> FilterOutput:
        """Convenience wrapper over filter_into; allocates its return value."""
        self.filter_into(x.as_array(), u_des.as_array(), self._out)
        o = self._out
        return FilterOutput(
            u_cmd=QuadCommand.from_array(o[0:4]),
            lam=float(o[4]),
            h_I=float(o[5]),
            v_perp=float(o[6]),
            backup_cmd=QuadCommand.from_array(o[7:11]),
        )


# ---------------------------------------------------------------------------
# pendulum variant


@dataclass(frozen=True)
class PendulumFilterParams:
    """Shield tuning for the damped-pendulum testbed (plain blend form)."""

    f1: float = 9.0
    f2: float = 6.6
    beta: float = 5.0
    terminal_weight: float = 100.0
    horizon: float = 2.0
    dt: float = 0.01

    def __post_init__(self) -> None:
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        if self.terminal_weight <= 0.0:
            raise ValueError("terminal_weight must be positive")
        FlowConfig(self.horizon, self.dt)  # validates the grid

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


class PendulumShield:
    """Pendulum shield: linear state-feedback backup, plain regulation blend."""

    def __init__(self, params: Optional[PendulumFilterParams] = None):
        self.params = params if params is not None else PendulumFilterParams()

    def backup(self, theta: float, theta_dot: float) -> float:
        return -(self.params.f1 * theta + self.params.f2 * theta_dot)

    def hI(self, theta: float, theta_dot: float) -> float:
        p = self.params
        return float(_k.pend_hI(theta, theta_dot, p.f1, p.f2, p.terminal_weight, p.dt, p.n_steps))

    def filter(self, theta: float, theta_dot: float, u_des: float) -> tuple[float, float, float]:
        """Returns (u_cmd, lambda, h_I)."""
        p = self.params
        u, lam, h_i = _k.pend_filter(
            theta, theta_dot, u_des, p.f1, p.f2, p.beta, p.terminal_weight, p.dt, p.n_steps
        )
        return float(u), float(lam), float(h_i)


def pendulum_filter(
    x: PendulumState, u_des: float, params: Optional[PendulumFilterParams] = None
) -> float:
    """Blended torque command for the pendulum; scalar in, scalar out."""
    p = params if params is not None else PendulumFilterParams()
    u, _, _ = _k.pend_filter(
        x.theta, x.theta_dot, u_des, p.f1, p.f2, p.beta, p.terminal_weight, p.dt, p.n_steps
    )
    return float(u)
