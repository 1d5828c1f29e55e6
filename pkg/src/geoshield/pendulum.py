"""Torque-controlled inverted pendulum, the small testbed plant.

State is (angle from upright, angular rate); dynamics are
theta_ddot = sin(theta) + u with unit constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_DIM = 2


@dataclass
class PendulumState:
    theta: float = 0.0
    theta_dot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.theta_dot])

    @staticmethod
    def from_array(x: np.ndarray) -> "PendulumState":
        return PendulumState(float(x[0]), float(x[1]))


def pendulum_deriv(x: np.ndarray, u: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.array([x[1], np.sin(x[0]) + u])
