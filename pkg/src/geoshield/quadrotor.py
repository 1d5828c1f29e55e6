"""Rigid-body quadrotor model.

State is a 13-vector: position in world frame, attitude as a scalar-first unit
quaternion taking body-frame vectors into the world frame, world-frame velocity,
and body-frame angular rate.  The control input is a normalized collective
throttle plus a body-rate setpoint tracked by a first-order inner loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# flat state layout used by the integrator kernels
IDX_P = slice(0, 3)
IDX_Q = slice(3, 7)
IDX_V = slice(7, 10)
IDX_W = slice(10, 13)
STATE_DIM = 13
COMMAND_DIM = 4


def _default_thrust_poly() -> tuple[float, float, float]:
    # Coefficients solved so that hover sits at throttle 0.30 and full throttle
    # gives a thrust-to-weight ratio of 4 for the default 0.6 kg airframe.
    weight = 0.6 * 9.81
    a2 = (0.3 * 4.0 * weight - weight) / (0.3 - 0.09)
    a1 = 4.0 * weight - a2
    return (0.0, a1, a2)


@dataclass
class QuadParams:
    """Physical and inner-loop parameters of the vehicle."""

    mass: float = 0.6
    gravity: float = 9.81
    rate_gain: float = 50.0          # first-order body-rate loop bandwidth (1/s)
    thrust_poly: tuple[float, float, float] = field(default_factory=_default_thrust_poly)
    rate_limit: float = 10.0         # rad/s, per-axis bound on commanded rates
    drag_coeff: float = 0.0          # linear velocity drag (1/s), off by default

    def __post_init__(self) -> None:
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if self.gravity <= 0.0:
            raise ValueError("gravity must be positive")
        if self.rate_limit <= 0.0:
            raise ValueError("rate_limit must be positive")
        if thrust_from_throttle(1.0, self) <= self.mass * self.gravity:
            raise ValueError("full-throttle thrust must exceed weight")

    @property
    def max_thrust(self) -> float:
        return thrust_from_throttle(1.0, self)

    @property
    def hover_throttle(self) -> float:
        return throttle_from_thrust(self.mass * self.gravity, self)

    def as_array(self) -> np.ndarray:
        a0, a1, a2 = self.thrust_poly
        return np.array(
            [self.mass, self.gravity, self.rate_gain, a0, a1, a2, self.rate_limit, self.drag_coeff],
            dtype=np.float64,
        )


@dataclass
class QuadState:
    p_w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    v_w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_b: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        self.p_w = np.asarray(self.p_w, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64)
        self.v_w = np.asarray(self.v_w, dtype=np.float64)
        self.omega_b = np.asarray(self.omega_b, dtype=np.float64)
        if abs(np.linalg.norm(self.q) - 1.0) > 1e-9:
            raise ValueError("attitude quaternion must have unit norm")

    def as_array(self) -> np.ndarray:
        x = np.empty(STATE_DIM)
        x[IDX_P] = self.p_w
        x[IDX_Q] = self.q
        x[IDX_V] = self.v_w
        x[IDX_W] = self.omega_b
        return x

    @staticmethod
    def from_array(x: np.ndarray) -> "QuadState":
        return QuadState(x[IDX_P].copy(), x[IDX_Q].copy(), x[IDX_V].copy(), x[IDX_W].copy())


@dataclass
class QuadCommand:
    """Normalized collective throttle plus a body-rate setpoint."""

    throttle: float = 0.0
    omega_des: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        self.omega_des = np.asarray(self.omega_des, dtype=np.float64)
        if not 0.0 <= self.throttle <= 1.0:
            raise ValueError("throttle must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.throttle, *self.omega_des])

    @staticmethod
    def from_array(u: np.ndarray) -> "QuadCommand":
        return QuadCommand(float(u[0]), u[1:4].copy())

    def clamped(self, params: QuadParams) -> "QuadCommand":
        rl = params.rate_limit
        return QuadCommand(
            float(np.clip(self.throttle, 0.0, 1.0)),
            np.clip(self.omega_des, -rl, rl),
        )


def thrust_from_throttle(throttle: float, params: QuadParams) -> float:
    """Static throttle-to-thrust map, a second-order polynomial in newtons."""
    a0, a1, a2 = params.thrust_poly
    return a0 + a1 * throttle + a2 * throttle * throttle


def throttle_from_thrust(thrust: float, params: QuadParams) -> float:
    """Inverse of the thrust polynomial, clamped to the valid throttle range."""
    a0, a1, a2 = params.thrust_poly
    if abs(a2) < 1e-12:
        t = (thrust - a0) / a1
    else:
        disc = a1 * a1 - 4.0 * a2 * (a0 - thrust)
        if disc < 0.0:
            return 0.0
        t = (-a1 + np.sqrt(disc)) / (2.0 * a2)
    return float(np.clip(t, 0.0, 1.0))


def quat_multiply(q: np.ndarray, r: np.ndarray) -> np.ndarray:
    qw, qx, qy, qz = q
    rw, rx, ry, rz = r
    return np.array(
        [
            qw * rw - qx * rx - qy * ry - qz * rz,
            qw * rx + rw * qx + qy * rz - qz * ry,
            qw * ry + rw * qy + qz * rx - qx * rz,
            qw * rz + rw * qz + qx * ry - qy * rx,
        ]
    )


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate a body-frame vector into the world frame."""
    qw = q[0]
    qv = q[1:4]
    t = 2.0 * np.cross(qv, v)
    return v + qw * t + np.cross(qv, t)


def rotation_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quad_deriv(x: np.ndarray, u: np.ndarray, params: QuadParams) -> np.ndarray:
    """Time derivative of the 13-state vector under a throttle/body-rate command.

    Accepts and returns flat arrays in the layout documented at module top.
    The quaternion derivative does not preserve norm; integrators renormalize
    after each step.
    """
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    q = x[IDX_Q]
    v = x[IDX_V]
    omega = x[IDX_W]

    thrust = thrust_from_throttle(u[0], params)
    body_z = quat_rotate(q, np.array([0.0, 0.0, 1.0]))

    dx = np.empty(STATE_DIM)
    dx[IDX_P] = v
    dx[IDX_Q] = 0.5 * quat_multiply(q, np.array([0.0, omega[0], omega[1], omega[2]]))
    dx[IDX_V] = body_z * (thrust / params.mass) - params.drag_coeff * v
    dx[9] -= params.gravity
    dx[IDX_W] = params.rate_gain * (u[1:4] - omega)
    return dx
