"""Fixed-step forward rollout of a closed-loop backup policy.

The engine integrates ``xdot = deriv(x, backup(x))`` with classic RK4 on a
fixed grid into a preallocated buffer, then reduces the trajectory to a single
barrier value: the minimum of a running safety margin over every sample and a
terminal membership margin at the horizon.  Rollouts that blow up are cut
short and treated as unsafe (barrier = -inf).

This module is plant-agnostic and takes plain callables; the quadrotor hot
path uses the fused compiled equivalent in ``_kernels`` and is tested against
this one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

DIVERGE_NORM = 1e6


@dataclass(frozen=True)
class FlowConfig:
    """Rollout grid: n_steps uniform RK4 steps covering horizon seconds."""

    horizon: float
    dt: float

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        n = self.horizon / self.dt
        if abs(n - round(n)) > 1e-9 or abs(round(n) * self.dt - self.horizon) > 1e-12:
            raise ValueError("horizon must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n_samples(self) -> int:
        return self.n_steps + 1


class TrajectoryBuffer:
    """Fixed-capacity sample store for one rollout; never grows after init.

    Owns the RK4 stage scratch as well, so the integration loop itself does
    not create arrays (the user-supplied callables may).
    """

    def __init__(self, n_steps: int, state_dim: int):
        if n_steps < 1 or state_dim < 1:
            raise ValueError("n_steps and state_dim must be positive")
        self.capacity = n_steps + 1
        self.state_dim = state_dim
        self.times = np.zeros(self.capacity)
        self.states = np.zeros((self.capacity, state_dim))
        self.n_valid = 0
        self.diverged = False
        self._stages = np.zeros((4, state_dim))
        self._xs = np.zeros(state_dim)

    @classmethod
    def for_config(cls, cfg: FlowConfig, state_dim: int) -> "TrajectoryBuffer":
        return cls(cfg.n_steps, state_dim)

    @property
    def complete(self) -> bool:
        return self.n_valid == self.capacity and not self.diverged


def rollout_backup(
    x0: np.ndarray,
    backup: Callable[[np.ndarray], object],
    deriv: Callable[[np.ndarray, object], np.ndarray],
    cfg: FlowConfig,
    out: TrajectoryBuffer,
    post_step: Optional[Callable[[np.ndarray], None]] = None,
) -> bool:
    """Fill ``out`` with the closed-loop flow from x0. Returns False on divergence.

    ``post_step`` may patch each freshly written sample in place (used to keep
    quaternion blocks on the unit sphere).  The buffer is reused across calls
    and also provides the stage scratch, so no arrays are created here beyond
    whatever the callables themselves return.
    """
    if out.capacity != cfg.n_samples:
        raise ValueError("buffer capacity does not match flow config")
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (out.state_dim,):
        raise ValueError("state dimension mismatch")

    dt = cfg.dt
    out.states[0] = x0
    out.times[0] = 0.0
    out.n_valid = 1
    out.diverged = False

    k1, k2, k3, k4 = out._stages
    xs = out._xs
    for k in range(cfg.n_steps):
        xp = out.states[k]
        k1[:] = deriv(xp, backup(xp))
        np.multiply(k1, 0.5 * dt, out=xs)
        xs += xp
        k2[:] = deriv(xs, backup(xs))
        np.multiply(k2, 0.5 * dt, out=xs)
        xs += xp
        k3[:] = deriv(xs, backup(xs))
        np.multiply(k3, dt, out=xs)
        xs += xp
        k4[:] = deriv(xs, backup(xs))

        xn = out.states[k + 1]
        np.add(k2, k3, out=xn)
        xn *= 2.0
        xn += k1
        xn += k4
        xn *= dt / 6.0
        xn += xp
        if post_step is not None:
            post_step(xn)
        np.abs(xn, out=xs)
        peak = float(xs.max())
        if not math.isfinite(peak) or peak > DIVERGE_NORM:
            out.diverged = True
            return False
        out.times[k + 1] = (k + 1) * dt
        out.n_valid = k + 2
    return True


def implicit_barrier(
    traj: TrajectoryBuffer,
    h: Callable[[np.ndarray], float],
    h_terminal: Callable[[np.ndarray], float],
) -> float:
    """Reduce a rollout to its barrier value.

    min over all valid samples of h, and of h_terminal at the horizon sample.
    An incomplete (diverged) rollout is unsafe by definition.
    """
    if not traj.complete:
        return -np.inf
    m = np.inf
    for k in range(traj.n_valid):
        hk = float(h(traj.states[k]))
        if hk < m:
            m = hk
    ht = float(h_terminal(traj.states[traj.n_valid - 1]))
    if ht < m:
        m = ht
    return m


def hI(
    x0: np.ndarray,
    backup: Callable[[np.ndarray], object],
    deriv: Callable[[np.ndarray, object], np.ndarray],
    cfg: FlowConfig,
    h: Callable[[np.ndarray], float],
    h_terminal: Callable[[np.ndarray], float],
    workspace: Optional[TrajectoryBuffer] = None,
    post_step: Optional[Callable[[np.ndarray], None]] = None,
) -> float:
    """Barrier value at x0 under the given backup policy and safety margins."""
    x0 = np.asarray(x0, dtype=np.float64)
    if workspace is None:
        workspace = TrajectoryBuffer(cfg.n_steps, x0.shape[0])
    rollout_backup(x0, backup, deriv, cfg, workspace, post_step=post_step)
    return implicit_barrier(workspace, h, h_terminal)
