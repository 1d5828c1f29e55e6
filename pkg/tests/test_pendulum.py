"""Pendulum plant tests against closed-form mechanics."""

import numpy as np

from geoshield.pendulum import PendulumState, pendulum_deriv


def _rk4(x, u_of, dt, n):
    for _ in range(n):
        k1 = pendulum_deriv(x, u_of(x))
        k2 = pendulum_deriv(x + 0.5 * dt * k1, u_of(x + 0.5 * dt * k1))
        k3 = pendulum_deriv(x + 0.5 * dt * k2, u_of(x + 0.5 * dt * k2))
        k4 = pendulum_deriv(x + dt * k3, u_of(x + dt * k3))
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def test_deriv_point_values():
    assert np.allclose(pendulum_deriv(np.array([0.0, 0.0]), 0.0), [0.0, 0.0])
    assert np.allclose(pendulum_deriv(np.array([0.0, 1.0]), 0.0), [1.0, 0.0])
    assert np.allclose(pendulum_deriv(np.array([np.pi / 2, 0.0]), -1.0), [0.0, 0.0])


def test_affine_in_torque():
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.uniform(-2, 2, 2)
        ua, ub = rng.uniform(-5, 5, 2)
        da = pendulum_deriv(x, ua)
        db = pendulum_deriv(x, ub)
        dm = pendulum_deriv(x, 0.5 * (ua + ub))
        assert np.allclose(dm, 0.5 * (da + db), atol=1e-14)


def test_unforced_energy_conserved():
    # E = thd^2/2 + cos(th) is a first integral of theta_ddot = sin(theta)
    x = np.array([0.4, 0.0])
    e0 = 0.5 * x[1] ** 2 + np.cos(x[0])
    x = _rk4(x, lambda s: 0.0, 0.001, 5000)
    e1 = 0.5 * x[1] ** 2 + np.cos(x[0])
    assert abs(e1 - e0) < 1e-9


def test_gravity_cancellation_gives_uniform_rotation():
    # u = -sin(theta) zeroes the acceleration, so theta advances linearly
    x0 = np.array([0.2, 1.5])
    x = _rk4(x0, lambda s: -np.sin(s[0]), 0.001, 2000)
    assert abs(x[0] - (x0[0] + x0[1] * 2.0)) < 1e-9
    assert abs(x[1] - x0[1]) < 1e-9


def test_small_angle_growth_rate():
    # near upright the unforced plant is theta_ddot = theta: theta(t) = theta0*cosh(t)
    th0 = 1e-4
    x = _rk4(np.array([th0, 0.0]), lambda s: 0.0, 0.001, 1000)
    assert abs(x[0] - th0 * np.cosh(1.0)) < 1e-9 * np.cosh(1.0)


def test_rk4_fourth_order_convergence():
    x0 = np.array([0.9, -0.3])
    ref = _rk4(x0, lambda s: 0.0, 1.0 / 2560, 2560)
    errs = []
    for n in (10, 20, 40):
        xn = _rk4(x0, lambda s: 0.0, 1.0 / n, n)
        errs.append(np.max(np.abs(xn - ref)))
    # halving the step should cut the error by about 2^4
    assert errs[0] / errs[1] > 12.0
    assert errs[1] / errs[2] > 12.0


def test_state_round_trip():
    s = PendulumState(0.3, -1.2)
    assert np.allclose(s.as_array(), [0.3, -1.2])
    s2 = PendulumState.from_array(np.array([0.3, -1.2]))
    assert s2 == s
