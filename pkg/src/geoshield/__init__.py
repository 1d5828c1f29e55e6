"""Shared-control geofence shield for a simulated quadrotor, with a pendulum testbed."""

from geoshield.quadrotor import QuadCommand, QuadParams, QuadState, quad_deriv, thrust_from_throttle
from geoshield.pendulum import PendulumState, pendulum_deriv
from geoshield.flow import FlowConfig, TrajectoryBuffer, implicit_barrier, rollout_backup
from geoshield.safety_filter import (
    FilterOutput,
    FilterParams,
    GeofenceBox,
    GeofenceFilter,
    PendulumFilterParams,
    PendulumShield,
    backup_controller,
    backup_desired_velocity,
    backup_set_h,
    geofence_h,
    pendulum_filter,
    perpendicular_speed,
    regulation_lambda,
)

__version__ = "0.1.0"
