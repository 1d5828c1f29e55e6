"""Shield component tests: fence geometry, backup law, regulation, blending."""

import numpy as np
import pytest

from geoshield.harness import representative_states
from geoshield.quadrotor import QuadCommand, QuadParams, QuadState
from geoshield.safety_filter import (
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

BOX = GeofenceBox(np.array([0.0, 0.0, 10.0]), np.array([10.0, 10.0, 10.0]))


def test_geofence_h_point_values():
    assert geofence_h(np.array([0.0, 0.0, 10.0]), BOX) == pytest.approx(100.0, abs=1e-12)
    assert geofence_h(np.array([9.0, 0.0, 10.0]), BOX) == pytest.approx(19.0, abs=1e-12)
    assert geofence_h(np.array([10.0, 0.0, 10.0]), BOX) == pytest.approx(0.0, abs=1e-12)
    assert geofence_h(np.array([0.0, -11.0, 10.0]), BOX) < 0.0
    # min over axes, not a product: worst axis wins
    assert geofence_h(np.array([9.0, 5.0, 10.0]), BOX) == pytest.approx(19.0, abs=1e-12)


def test_backup_set_h_is_speed_margin():
    assert backup_set_h(np.array([3.0, 4.0, 0.0])) == pytest.approx(-4.9, abs=1e-12)
    assert backup_set_h(np.zeros(3)) == pytest.approx(0.1, abs=1e-15)
    assert backup_set_h(np.zeros(3), eps=0.5) == pytest.approx(0.5, abs=1e-15)


def test_backup_desired_velocity_field():
    box = GeofenceBox(np.zeros(3), np.array([10.0, 10.0, 10.0]))
    # deep interior: no push
    assert np.all(backup_desired_velocity(np.array([5.0, -5.0, 2.0]), box, delta=4.0) == 0.0)
    # near +x and -y faces: pushed toward the interior, saturated at v_max
    v = backup_desired_velocity(np.array([9.9, -9.95, 0.0]), box, delta=4.0, v_max=2.0)
    assert v[0] == pytest.approx(-2.0)
    assert v[1] == pytest.approx(2.0)
    assert v[2] == 0.0
    # sub-saturation magnitude grows with the clearance deficit
    v = backup_desired_velocity(np.array([9.9, 0.0, 0.0]), box, delta=4.0, v_max=5.0)
    assert v[0] == pytest.approx(-(4.0 - (100.0 - 9.9**2)), abs=1e-12)


def test_regulation_lambda_forms():
    fp = FilterParams(beta=1.0)
    assert regulation_lambda(1.0, 0.0, fp, scaled=False) == pytest.approx(1.0 - np.exp(-1.0))
    assert regulation_lambda(0.0, 0.0, fp, scaled=False) == 0.0
    assert regulation_lambda(-5.0, 3.0, fp) == 0.0
    fp2 = FilterParams(beta=0.5, v_floor=1.0)
    # fast approach stretches the decay: denominator is max(v_perp, v_floor)
    assert regulation_lambda(2.0, 4.0, fp2) == pytest.approx(1.0 - np.exp(-0.25))
    assert regulation_lambda(2.0, 0.2, fp2) == pytest.approx(1.0 - np.exp(-1.0))


def test_perpendicular_speed_cases():
    box = GeofenceBox(np.zeros(3), np.array([10.0, 10.0, 10.0]))

    def vp(p, v):
        return perpendicular_speed(QuadState(p_w=np.array(p), v_w=np.array(v)), box)

    assert vp([9.0, 0.0, 0.0], [3.0, 0.0, 0.0]) == pytest.approx(3.0)
    assert vp([9.0, 0.0, 0.0], [-3.0, 0.0, 0.0]) == 0.0  # retreating: floored
    assert vp([9.0, 0.0, 0.0], [3.0, -5.0, 0.0]) == pytest.approx(3.0)  # x face binds
    assert vp([-9.0, 0.0, 0.0], [-4.0, 0.0, 0.0]) == pytest.approx(4.0)
    assert vp([9.0, 9.0, 0.0], [1.0, 2.0, 0.0]) == pytest.approx(2.0)  # tie: worst face
    assert vp([0.0, 0.0, 0.0], [1.0, -2.0, 0.5]) == pytest.approx(2.0)  # center: all tied
    # inner half of the axis: opposing faces count as partly tied, so the
    # retreat gate fades toward the unsigned speed instead of snapping at 0
    assert vp([2.5, 0.0, 0.0], [-4.0, 0.0, 0.0]) == pytest.approx(4.0 * 0.5)
    assert vp([0.01, 0.0, 0.0], [-4.0, 0.0, 0.0]) == pytest.approx(4.0, abs=0.01)
    assert vp([-0.01, 0.0, 0.0], [-4.0, 0.0, 0.0]) == pytest.approx(4.0, abs=0.01)


def test_backup_controller_hover_at_center():
    fp = FilterParams()
    qp = QuadParams()
    u = backup_controller(QuadState(p_w=BOX.center.copy()), BOX, fp, qp)
    assert u.throttle == pytest.approx(qp.hover_throttle, abs=1e-12)
    assert np.all(u.omega_des == 0.0)


def test_backup_controller_pushes_off_a_face():
    fp = FilterParams(delta=4.0)  # deep band so the push saturates at v_backup_max
    qp = QuadParams()
    # just inside the +x face: the demand tilts the thrust axis, so a pitch
    # rate appears and the throttle rises above hover to keep altitude
    u = backup_controller(QuadState(p_w=np.array([9.95, 0.0, 10.0])), BOX, fp, qp)
    assert abs(u.omega_des[1]) > 0.1
    assert u.throttle > qp.hover_throttle
    # already retreating fast enough: demand shrinks back toward hover
    u2 = backup_controller(
        QuadState(p_w=np.array([9.95, 0.0, 10.0]), v_w=np.array([-2.0, 0.0, 0.0])), BOX, fp, qp
    )
    assert abs(u2.omega_des[1]) < abs(u.omega_des[1])


def test_center_hover_barrier_and_transparency():
    filt = GeofenceFilter(BOX)
    filt.warm_up()
    x = QuadState(p_w=BOX.center.copy())
    # frozen: shrunk half extent 9.4 m, clearance 9.4^2 at the center, and the
    # backup rollout parks there, so the running min is the first sample
    assert filt.hI(x) == pytest.approx(9.4**2, abs=1e-9)

    u_des = QuadCommand(0.55, np.array([1.25, -0.5, 2.0]))
    out = filt.filter_command(x, u_des)
    assert out.lam == 1.0  # exp(-0.5*88.36) underflows the blend entirely
    assert out.h_I == pytest.approx(9.4**2, abs=1e-9)
    assert out.v_perp == 0.0
    assert np.max(np.abs(out.u_cmd.as_array() - u_des.as_array())) < 1e-14


def test_boundary_handoff_is_bit_exact():
    filt = GeofenceFilter(BOX)
    filt.warm_up()
    # sprinting at the wall from close range: the rollout cannot save this,
    # so the shield must hand over to the backup verbatim
    x = QuadState(p_w=np.array([9.9, 0.0, 10.0]), v_w=np.array([25.0, 0.0, 0.0]))
    out = filt.filter_command(x, QuadCommand(1.0, np.array([0.0, 0.0, 0.0])))
    assert out.h_I <= 0.0
    assert out.lam == 0.0
    assert np.array_equal(out.u_cmd.as_array(), out.backup_cmd.as_array())


def test_lambda_zero_iff_barrier_nonpositive():
    filt = GeofenceFilter(BOX)
    filt.warm_up()
    xs = representative_states(BOX, 120, seed=21)
    us = np.array([0.7, 2.0, -1.0, 0.5])
    out = np.zeros(11)
    for i in range(xs.shape[0]):
        filt.filter_into(xs[i], us, out)
        lam, h_i = out[4], out[5]
        if h_i <= 0.0:
            assert lam == 0.0
        elif h_i > 1e-6:
            assert lam > 0.0


def test_outputs_always_clamped_and_lambda_in_range():
    filt = GeofenceFilter(BOX)
    filt.warm_up()
    rng = np.random.default_rng(4)
    xs = representative_states(BOX, 200, seed=4)
    out = np.zeros(11)
    for i in range(xs.shape[0]):
        u_des = np.array([rng.uniform(-0.5, 1.5), *rng.uniform(-15, 15, 3)])
        filt.filter_into(xs[i], u_des, out)
        assert 0.0 <= out[0] <= 1.0
        assert np.all(np.abs(out[1:4]) <= 10.0 + 1e-12)
        assert 0.0 <= out[4] <= 1.0
        assert np.isfinite(out[5]) or out[5] == -np.inf
        # the blend interpolates, so each component lies between its endpoints
        lo = np.minimum(out[7:11], np.clip(u_des, [0, -10, -10, -10], [1, 10, 10, 10]))
        hi = np.maximum(out[7:11], np.clip(u_des, [0, -10, -10, -10], [1, 10, 10, 10]))
        assert np.all(out[0:4] >= lo - 1e-12) and np.all(out[0:4] <= hi + 1e-12)


def test_filter_command_matches_filter_into():
    filt = GeofenceFilter(BOX)
    filt.warm_up()
    x = QuadState(p_w=np.array([6.0, -2.0, 14.0]), v_w=np.array([8.0, 0.0, 1.0]))
    u = QuadCommand(0.8, np.array([1.0, 2.0, -3.0]))
    out = np.zeros(11)
    filt.filter_into(x.as_array(), u.as_array(), out)
    fo = filt.filter_command(x, u)
    assert np.array_equal(fo.u_cmd.as_array(), out[0:4])
    assert fo.lam == out[4] and fo.h_I == out[5] and fo.v_perp == out[6]


def test_barrier_decreases_toward_the_fence():
    filt = GeofenceFilter(BOX)
    filt.warm_up()
    h_center = filt.hI(QuadState(p_w=np.array([0.0, 0.0, 10.0])))
    h_mid = filt.hI(QuadState(p_w=np.array([8.0, 0.0, 10.0])))
    h_edge = filt.hI(QuadState(p_w=np.array([9.3, 0.0, 10.0])))
    assert h_center > h_mid > h_edge


def test_validation():
    with pytest.raises(ValueError):
        GeofenceBox(np.zeros(3), np.array([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        GeofenceBox(np.zeros(2), np.ones(3))
    with pytest.raises(ValueError):
        BOX.shrunk(10.0)
    with pytest.raises(ValueError):
        FilterParams(beta=0.0)
    with pytest.raises(ValueError):
        FilterParams(margin=-0.1)
    with pytest.raises(ValueError):
        GeofenceFilter(GeofenceBox(np.zeros(3), np.array([0.5, 10.0, 10.0])))
    with pytest.raises(ValueError):
        PendulumFilterParams(beta=-1.0)
    with pytest.raises(ValueError):
        PendulumFilterParams(horizon=1.0, dt=0.3)


def test_pendulum_shield_blend_is_internally_consistent():
    shield = PendulumShield()
    assert shield.backup(0.3, -0.2) == pytest.approx(-1.38, abs=1e-12)
    assert shield.hI(0.0, 0.0) > 0.0

    rng = np.random.default_rng(9)
    from geoshield.pendulum import PendulumState

    for _ in range(50):
        th, thd = rng.uniform(-1.2, 1.2), rng.uniform(-1.6, 1.6)
        u_des = rng.uniform(-4, 4)
        u, lam, h_i = shield.filter(th, thd, u_des)
        assert 0.0 <= lam <= 1.0
        ub = shield.backup(th, thd)
        assert u == pytest.approx(ub + lam * (u_des - ub), abs=1e-12)
        assert pendulum_filter(PendulumState(th, thd), u_des) == pytest.approx(u, abs=1e-15)
        if h_i <= 0.0:
            assert u == ub


def test_pendulum_barrier_sign_structure():
    shield = PendulumShield()
    # far outside the admissible band there is no saving rollout
    assert shield.hI(1.4, 1.5) <= 0.0
    # gently displaced, at rest: comfortably safe
    assert shield.hI(0.2, 0.0) > 0.0
