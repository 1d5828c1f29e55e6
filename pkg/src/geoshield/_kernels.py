"""Compiled inner loops shared by the flow engine, the filter, and the harness.

Everything here operates on flat float64 arrays so the per-call cost stays in
machine code and the real-time entry points allocate nothing.  Layouts:

    quad state x (13,): px py pz  qw qx qy qz  vx vy vz  wx wy wz
    quad command u (4,): throttle  wx_des wy_des wz_des
    quad params qp (8,): mass gravity rate_gain a0 a1 a2 rate_limit drag
    box (6,):            cx cy cz  rx ry rz
    filter params fp (8,): beta delta epsilon v_floor k_v k_q v_backup_max terminal_weight
    filter output out (11,): u_cmd(4) lambda hI vperp backup_cmd(4)

Rollout scratch is (6, 13): four RK4 stage slopes, one stage state, one
command row.  Divergent rollouts are cut short and reported through the
returned step count; the barrier evaluator maps them to -inf.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

STATE_DIM = 13
SCRATCH_ROWS = 6
OUT_DIM = 11

# pendulum backup set: angle within pi/12 rad of upright, rate within 0.1 rad/s
PEND_BS_ANGLE2 = (math.pi / 12.0) ** 2
PEND_BS_RATE2 = 0.01

_DIVERGE_POS = 1.0e6
_DIVERGE_VEL = 1.0e5


@njit(cache=True)
def thrust_of(throttle, qp):
    return qp[3] + qp[4] * throttle + qp[5] * throttle * throttle


@njit(cache=True)
def throttle_of(thrust, qp):
    a0 = qp[3]
    a1 = qp[4]
    a2 = qp[5]
    if abs(a2) < 1e-12:
        t = (thrust - a0) / a1
    else:
        disc = a1 * a1 - 4.0 * a2 * (a0 - thrust)
        if disc < 0.0:
            return 0.0
        t = (-a1 + math.sqrt(disc)) / (2.0 * a2)
    if t < 0.0:
        return 0.0
    if t > 1.0:
        return 1.0
    return t


@njit(cache=True)
def quad_deriv_into(x, u, qp, dx):
    mass = qp[0]
    grav = qp[1]
    cgain = qp[2]
    drag = qp[7]
    qw = x[3]
    qx = x[4]
    qy = x[5]
    qz = x[6]
    wx = x[10]
    wy = x[11]
    wz = x[12]

    dx[0] = x[7]
    dx[1] = x[8]
    dx[2] = x[9]

    dx[3] = 0.5 * (-qx * wx - qy * wy - qz * wz)
    dx[4] = 0.5 * (qw * wx + qy * wz - qz * wy)
    dx[5] = 0.5 * (qw * wy + qz * wx - qx * wz)
    dx[6] = 0.5 * (qw * wz + qx * wy - qy * wx)

    # thrust acts along the body z axis expressed in world coordinates
    zbx = 2.0 * (qx * qz + qw * qy)
    zby = 2.0 * (qy * qz - qw * qx)
    zbz = qw * qw - qx * qx - qy * qy + qz * qz
    f = thrust_of(u[0], qp) / mass
    dx[7] = zbx * f - drag * x[7]
    dx[8] = zby * f - drag * x[8]
    dx[9] = zbz * f - grav - drag * x[9]

    dx[10] = cgain * (u[1] - x[10])
    dx[11] = cgain * (u[2] - x[11])
    dx[12] = cgain * (u[3] - x[12])


@njit(cache=True)
def accel_cmd_into(x, ax, ay, az, kq, qp, u_out):
    """Throttle plus tilt rates realizing a desired specific-force vector.

    The attitude error is the minimal rotation taking the current body z axis
    onto the desired direction, expressed in the body frame; the yaw rate is
    left at zero.  Near-zero desired force falls back to a hover hold.

    Rotor thrust cannot point below the horizon in upright flight, so the
    vertical component is floored at 0.1 g: a downward demand turns into
    "cut throttle and stay level" instead of an attitude flip.
    """
    mass = qp[0]
    grav = qp[1]
    rlim = qp[6]
    if az < 0.1 * grav:
        az = 0.1 * grav
    anorm = math.sqrt(ax * ax + ay * ay + az * az)
    if anorm < 1e-6:
        u_out[0] = throttle_of(mass * grav, qp)
        u_out[1] = 0.0
        u_out[2] = 0.0
        u_out[3] = 0.0
        return
    u_out[0] = throttle_of(mass * anorm, qp)
    zdx = ax / anorm
    zdy = ay / anorm
    zdz = az / anorm
    qw = x[3]
    qx = x[4]
    qy = x[5]
    qz = x[6]
    zbx = 2.0 * (qx * qz + qw * qy)
    zby = 2.0 * (qy * qz - qw * qx)
    zbz = qw * qw - qx * qx - qy * qy + qz * qz
    cx = zby * zdz - zbz * zdy
    cy = zbz * zdx - zbx * zdz
    cz = zbx * zdy - zby * zdx
    s = math.sqrt(cx * cx + cy * cy + cz * cz)
    c = zbx * zdx + zby * zdy + zbz * zdz
    if s < 1e-9:
        if c > 0.0:
            ebx = 0.0
            eby = 0.0
        else:
            # pointing opposite: flip about the body x axis
            ebx = math.pi
            eby = 0.0
    else:
        angle = math.atan2(s, c)
        k = angle / s
        ewx = cx * k
        ewy = cy * k
        ewz = cz * k
        r11 = 1.0 - 2.0 * (qy * qy + qz * qz)
        r21 = 2.0 * (qx * qy + qw * qz)
        r31 = 2.0 * (qx * qz - qw * qy)
        r12 = 2.0 * (qx * qy - qw * qz)
        r22 = 1.0 - 2.0 * (qx * qx + qz * qz)
        r32 = 2.0 * (qy * qz + qw * qx)
        ebx = r11 * ewx + r21 * ewy + r31 * ewz
        eby = r12 * ewx + r22 * ewy + r32 * ewz
    wdx = kq * ebx
    wdy = kq * eby
    if wdx > rlim:
        wdx = rlim
    elif wdx < -rlim:
        wdx = -rlim
    if wdy > rlim:
        wdy = rlim
    elif wdy < -rlim:
        wdy = -rlim
    u_out[1] = wdx
    u_out[2] = wdy
    u_out[3] = 0.0


@njit(cache=True)
def box_h(px, py, pz, box):
    m = math.inf
    for i in range(3):
        p = px
        if i == 1:
            p = py
        elif i == 2:
            p = pz
        d = p - box[i]
        r = box[3 + i]
        c = r * r - d * d
        if c < m:
            m = c
    return m


@njit(cache=True)
def backup_cmd_into(x, box, qp, kv, kq, vmax, delta, u_out):
    # stop-and-push-back velocity setpoint, per axis
    vdes0 = 0.0
    vdes1 = 0.0
    vdes2 = 0.0
    for i in range(3):
        d = x[i] - box[i]
        r = box[3 + i]
        clear = r * r - d * d
        if clear < delta:
            vd = delta - clear
            if d > 0.0:
                vd = -vd
            elif d == 0.0:
                vd = 0.0
            if vd > vmax:
                vd = vmax
            elif vd < -vmax:
                vd = -vmax
            if i == 0:
                vdes0 = vd
            elif i == 1:
                vdes1 = vd
            else:
                vdes2 = vd

    ax = kv * (vdes0 - x[7])
    ay = kv * (vdes1 - x[8])
    az = kv * (vdes2 - x[9]) + qp[1]
    accel_cmd_into(x, ax, ay, az, kq, qp, u_out)


@njit(cache=True)
def _step_valid(xn):
    for j in range(STATE_DIM):
        if not math.isfinite(xn[j]):
            return False
    for j in range(3):
        if abs(xn[j]) > _DIVERGE_POS:
            return False
        if abs(xn[7 + j]) > _DIVERGE_VEL:
            return False
    return True


@njit(cache=True)
def _renorm_quat(xn):
    n = math.sqrt(xn[3] * xn[3] + xn[4] * xn[4] + xn[5] * xn[5] + xn[6] * xn[6])
    if n < 1e-12:
        return False
    inv = 1.0 / n
    xn[3] *= inv
    xn[4] *= inv
    xn[5] *= inv
    xn[6] *= inv
    return True


@njit(cache=True)
def backup_rollout_into(x0, box, qp, kv, kq, vmax, delta, dt, n_steps, traj, scr):
    """Integrate the closed loop under the backup controller with classic RK4.

    Fills traj[0..n] and returns the number of completed steps; anything short
    of n_steps means the rollout diverged and was cut off.
    """
    xs = scr[0]
    k1 = scr[1]
    k2 = scr[2]
    k3 = scr[3]
    k4 = scr[4]
    ut = scr[5]

    for j in range(STATE_DIM):
        traj[0, j] = x0[j]

    for k in range(n_steps):
        xp = traj[k]

        backup_cmd_into(xp, box, qp, kv, kq, vmax, delta, ut)
        quad_deriv_into(xp, ut, qp, k1)

        for j in range(STATE_DIM):
            xs[j] = xp[j] + 0.5 * dt * k1[j]
        backup_cmd_into(xs, box, qp, kv, kq, vmax, delta, ut)
        quad_deriv_into(xs, ut, qp, k2)

        for j in range(STATE_DIM):
            xs[j] = xp[j] + 0.5 * dt * k2[j]
        backup_cmd_into(xs, box, qp, kv, kq, vmax, delta, ut)
        quad_deriv_into(xs, ut, qp, k3)

        for j in range(STATE_DIM):
            xs[j] = xp[j] + dt * k3[j]
        backup_cmd_into(xs, box, qp, kv, kq, vmax, delta, ut)
        quad_deriv_into(xs, ut, qp, k4)

        xn = traj[k + 1]
        for j in range(STATE_DIM):
            xn[j] = xp[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])

        if not _renorm_quat(xn):
            return k
        if not _step_valid(xn):
            return k
    return n_steps


@njit(cache=True)
def traj_barrier(traj, n_done, n_steps, box, eps, terminal_weight):
    """Min of the fence margin along the rollout plus the weighted stop condition."""
    if n_done < n_steps:
        return -math.inf
    m = math.inf
    for k in range(n_steps + 1):
        h = box_h(traj[k, 0], traj[k, 1], traj[k, 2], box)
        if h < m:
            m = h
    vx = traj[n_steps, 7]
    vy = traj[n_steps, 8]
    vz = traj[n_steps, 9]
    hb = terminal_weight * (eps - math.sqrt(vx * vx + vy * vy + vz * vz))
    if hb < m:
        m = hb
    return m


@njit(cache=True)
def quad_hI(x, box_eff, qp, fp, dt, n_steps, traj, scr):
    n_done = backup_rollout_into(x, box_eff, qp, fp[4], fp[5], fp[6], fp[1], dt, n_steps, traj, scr)
    return traj_barrier(traj, n_done, n_steps, box_eff, fp[2], fp[7])


@njit(cache=True)
def vperp_of(x, box):
    """Approach speed toward the face currently pinching the fence margin.

    Zero when moving away.  The two opposing faces of an axis count as tied
    near its midplane, where the nearer-face identity flips, so the gate
    fades linearly to the unsigned speed over the inner half of the axis;
    the command law stays continuous while crossing the midplane at speed.
    """
    c0 = box[3] * box[3] - (x[0] - box[0]) * (x[0] - box[0])
    c1 = box[4] * box[4] - (x[1] - box[1]) * (x[1] - box[1])
    c2 = box[5] * box[5] - (x[2] - box[2]) * (x[2] - box[2])
    m = c0
    if c1 < m:
        m = c1
    if c2 < m:
        m = c2
    best = 0.0
    for i in range(3):
        c = c0
        if i == 1:
            c = c1
        elif i == 2:
            c = c2
        if c == m:
            d = x[i] - box[i]
            v = x[7 + i]
            if d > 0.0:
                a = v
            elif d < 0.0:
                a = -v
            else:
                a = abs(v)
            w = 1.0 - 2.0 * abs(d) / box[3 + i]
            if w > 0.0:
                fade = abs(v) * w
                if fade > a:
                    a = fade
            if a > best:
                best = a
    return best


@njit(cache=True)
def lambda_scaled(beta, h_i, v_perp, v_floor):
    hp = h_i if h_i > 0.0 else 0.0
    denom = v_perp if v_perp > v_floor else v_floor
    return 1.0 - math.exp(-beta * hp / denom)


@njit(cache=True)
def lambda_plain(beta, h_i):
    hp = h_i if h_i > 0.0 else 0.0
    return 1.0 - math.exp(-beta * hp)


@njit(cache=True)
def quad_filter_into(x, u_des, box_true, box_eff, qp, fp, dt, n_steps, traj, scr, out):
    """Full shield evaluation: rollout, barrier, regulation, blend, clamp."""
    kv = fp[4]
    kq = fp[5]
    vmax = fp[6]
    delta = fp[1]

    n_done = backup_rollout_into(x, box_eff, qp, kv, kq, vmax, delta, dt, n_steps, traj, scr)
    h_i = traj_barrier(traj, n_done, n_steps, box_eff, fp[2], fp[7])
    v_p = vperp_of(x, box_true)
    lam = lambda_scaled(fp[0], h_i, v_p, fp[3])

    ub = scr[5]
    backup_cmd_into(x, box_eff, qp, kv, kq, vmax, delta, ub)

    rlim = qp[6]
    for i in range(4):
        ui = ub[i] + lam * (u_des[i] - ub[i])
        if i == 0:
            if ui < 0.0:
                ui = 0.0
            elif ui > 1.0:
                ui = 1.0
        else:
            if ui < -rlim:
                ui = -rlim
            elif ui > rlim:
                ui = rlim
        out[i] = ui
    out[4] = lam
    out[5] = h_i
    out[6] = v_p
    out[7] = ub[0]
    out[8] = ub[1]
    out[9] = ub[2]
    out[10] = ub[3]


@njit(cache=True)
def quad_plant_step(x, u, qp, dt, scr):
    """One zero-order-hold RK4 step of the open-loop plant, in place."""
    xs = scr[0]
    k1 = scr[1]
    k2 = scr[2]
    k3 = scr[3]
    k4 = scr[4]

    quad_deriv_into(x, u, qp, k1)
    for j in range(STATE_DIM):
        xs[j] = x[j] + 0.5 * dt * k1[j]
    quad_deriv_into(xs, u, qp, k2)
    for j in range(STATE_DIM):
        xs[j] = x[j] + 0.5 * dt * k2[j]
    quad_deriv_into(xs, u, qp, k3)
    for j in range(STATE_DIM):
        xs[j] = x[j] + dt * k3[j]
    quad_deriv_into(xs, u, qp, k4)
    for j in range(STATE_DIM):
        x[j] = x[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    _renorm_quat(x)


# ---------------------------------------------------------------------------
# pendulum


@njit(cache=True)
def pend_h(th, thd):
    a = 1.0 - th * th
    b = 2.0 - thd * thd
    return a if a < b else b


@njit(cache=True)
def pend_backup_h(th, thd):
    a = PEND_BS_ANGLE2 - th * th
    b = PEND_BS_RATE2 - thd * thd
    return a if a < b else b


@njit(cache=True)
def pend_hI(th, thd, f1, f2, terminal_weight, dt, n_steps):
    """Barrier along the linear-feedback braking rollout, fused scan."""
    m = pend_h(th, thd)
    a = th
    b = thd
    for _ in range(n_steps):
        # RK4 on (theta, theta_dot) under u = -(f1*theta + f2*theta_dot)
        k1a = b
        k1b = math.sin(a) - f1 * a - f2 * b
        a2 = a + 0.5 * dt * k1a
        b2 = b + 0.5 * dt * k1b
        k2a = b2
        k2b = math.sin(a2) - f1 * a2 - f2 * b2
        a3 = a + 0.5 * dt * k2a
        b3 = b + 0.5 * dt * k2b
        k3a = b3
        k3b = math.sin(a3) - f1 * a3 - f2 * b3
        a4 = a + dt * k3a
        b4 = b + dt * k3b
        k4a = b4
        k4b = math.sin(a4) - f1 * a4 - f2 * b4
        a = a + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        b = b + (dt / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        if not (math.isfinite(a) and math.isfinite(b)) or abs(a) > 1e3 or abs(b) > 1e3:
            return -math.inf
        h = pend_h(a, b)
        if h < m:
            m = h
    hb = terminal_weight * pend_backup_h(a, b)
    if hb < m:
        m = hb
    return m


@njit(cache=True)
def pend_filter(th, thd, u_des, f1, f2, beta, terminal_weight, dt, n_steps):
    """Regulated blend for the pendulum. Returns (u_cmd, lambda, hI)."""
    h_i = pend_hI(th, thd, f1, f2, terminal_weight, dt, n_steps)
    lam = lambda_plain(beta, h_i)
    ub = -(f1 * th + f2 * thd)
    u = ub + lam * (u_des - ub)
    return u, lam, h_i


@njit(cache=True)
def pend_filter_u(th, thd, u_des, f1, f2, beta, terminal_weight, dt, n_steps):
    """Command-only variant for the hot control loop (scalar return)."""
    h_i = pend_hI(th, thd, f1, f2, terminal_weight, dt, n_steps)
    lam = lambda_plain(beta, h_i)
    ub = -(f1 * th + f2 * thd)
    return ub + lam * (u_des - ub)


@njit(cache=True)
def pend_plant_step(th, thd, u, dt):
    k1a = thd
    k1b = math.sin(th) + u
    a2 = th + 0.5 * dt * k1a
    b2 = thd + 0.5 * dt * k1b
    k2a = b2
    k2b = math.sin(a2) + u
    a3 = th + 0.5 * dt * k2a
    b3 = thd + 0.5 * dt * k2b
    k3a = b3
    k3b = math.sin(a3) + u
    a4 = th + dt * k3a
    b4 = thd + dt * k3b
    k4a = b4
    k4b = math.sin(a4) + u
    return (
        th + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        thd + (dt / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
    )


