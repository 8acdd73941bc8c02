"""Geometric position/attitude controllers, motor mixing and the
bounce-hover phase machine.

The position controller is the standard SE(3) design: desired force from a
PD law plus gravity feedforward, thrust as its projection on the body
z-axis, desired attitude built from the force direction and the yaw
heading, torque from the rotation-matrix attitude error. The attitude-only
controller holds a level pose at a vanishing thrust floor while the robot
falls or the spring compresses.
"""

from enum import IntEnum

import numpy as np
from numba import njit

from .params import (RobotParams, ControlGains, BhcConfig, SimulationFault)
from .rotations import rot_z, cross3, _vee


class BhcPhase(IntEnum):
    POSITION_HOLD = 0
    DESCEND = 1
    COMPRESSION = 2
    REBOUND = 3
    ASCEND = 4


PHASE_NAMES = ("PositionHold", "Descend", "Compression", "Rebound", "Ascend")

# Control modes returned by the supervisor.
MODE_POSITION = 0
MODE_ATTITUDE = 1

# Status for impossible phase/contact combinations.
BHC_OK = 0
BHC_IMPOSSIBLE = 1


@njit(cache=True)
def _att_torque(R, R_d, w, kR, kw, I_body):
    """-kR * e_R - kw * w + w x I w with e_R = 0.5 vee(Rd^T R - R^T Rd)."""
    E = R_d.T @ R - R.T @ R_d
    e_R = 0.5 * _vee(E)
    return -kR * e_R - kw * w + cross3(w, I_body @ w)


@njit(cache=True)
def _position_control(r, v, R, w, r_d, psi_d, kx, kv, kR, kw, m, g, I_body):
    F = -kx * (r - r_d) - kv * v
    F[2] += m * g
    b3_cur = R[:, 2]
    f_q = max(0.0, F[0] * b3_cur[0] + F[1] * b3_cur[1] + F[2] * b3_cur[2])

    nF = np.sqrt(F[0] * F[0] + F[1] * F[1] + F[2] * F[2])
    R_d = rot_z(psi_d)
    if nF >= 1e-9:
        b3 = F / nF
        b1c = np.array([np.cos(psi_d), np.sin(psi_d), 0.0])
        b2 = cross3(b3, b1c)
        n2 = np.sqrt(b2[0] * b2[0] + b2[1] * b2[1] + b2[2] * b2[2])
        if n2 >= 1e-9:
            b2 = b2 / n2
            b1 = cross3(b2, b3)
            R_d = np.empty((3, 3))
            for i in range(3):
                R_d[i, 0] = b1[i]
                R_d[i, 1] = b2[i]
                R_d[i, 2] = b3[i]
    tau = _att_torque(R, R_d, w, kR, kw, I_body)
    return f_q, tau


def position_control(state, r_d, psi_d, gains: ControlGains,
                     params: RobotParams):
    """Full geometric control toward r_d at yaw psi_d: (f_q, tau)."""
    return _position_control(state.r, state.v, state.R, state.w,
                             np.asarray(r_d, dtype=float), float(psi_d),
                             gains.kx, gains.kv, gains.kR, gains.kw,
                             params.m, params.g, params.inertia())


@njit(cache=True)
def _attitude_control(R, w, psi_d, eps, kR, kw, I_body):
    R_d = rot_z(psi_d)
    tau = _att_torque(R, R_d, w, kR, kw, I_body)
    return eps, tau


def attitude_control(state, psi_d, gains: ControlGains, cfg: BhcConfig,
                     params: RobotParams):
    """Attitude-only control: level at the desired yaw, thrust floor eps."""
    return _attitude_control(state.R, state.w, float(psi_d), cfg.epsilon,
                             gains.kR, gains.kw, params.inertia())


@njit(cache=True)
def _mix(f_q, tau, arm, k_yaw, f_max):
    """X-configuration allocation, clamped to [0, f_max] per rotor.

    Rotor order: 1 front-right, 2 rear-right, 3 rear-left, 4 front-left;
    the effective roll/pitch arm is arm/sqrt(2). Returns the forces and the
    number of rotors that clamped.
    """
    d = arm / np.sqrt(2.0)
    base = 0.25 * f_q
    rx = tau[0] / (4.0 * d)
    ry = tau[1] / (4.0 * d)
    rz = tau[2] / (4.0 * k_yaw)
    f = np.array([
        base - rx - ry - rz,
        base - rx + ry + rz,
        base + rx + ry - rz,
        base + rx - ry + rz,
    ])
    sat = 0
    for i in range(4):
        if f[i] < 0.0:
            f[i] = 0.0
            sat += 1
        elif f[i] > f_max:
            f[i] = f_max
            sat += 1
    return f, sat


def mix(f_q, tau, params: RobotParams):
    """Map (f_q, tau) to four rotor forces; saturation silently clamps."""
    f, _ = _mix(float(f_q), np.asarray(tau, dtype=float),
                params.arm, params.k_yaw, params.f_rotor_max)
    return f


@njit(cache=True)
def _recombine(f, arm, k_yaw):
    """Allocation matrix applied forward: rotor forces -> (f_q, tau)."""
    d = arm / np.sqrt(2.0)
    f_q = f[0] + f[1] + f[2] + f[3]
    tau = np.array([
        d * (-f[0] - f[1] + f[2] + f[3]),
        d * (-f[0] + f[1] + f[2] - f[3]),
        k_yaw * (-f[0] + f[1] - f[2] + f[3]),
    ])
    return f_q, tau


def recombine(forces, params: RobotParams):
    """(f_q, tau) produced by the given rotor forces."""
    return _recombine(np.asarray(forces, dtype=float),
                      params.arm, params.k_yaw)


def allocation_matrix(params: RobotParams):
    """4x4 matrix A with A @ forces = (f_q, tau_x, tau_y, tau_z)."""
    d = params.arm / np.sqrt(2.0)
    s = params.k_yaw
    return np.array([
        [1.0, 1.0, 1.0, 1.0],
        [-d, -d, d, d],
        [-d, d, d, -d],
        [-s, s, -s, s],
    ])


@njit(cache=True)
def _bhc_step(phase, r, w, in_contact, dL_rate, r_d, sphere_radius,
              w_thresh, dwell_time, t_in_phase):
    """One supervisor evaluation: (new phase, control mode, status).

    The descend gate (inside the acceptance sphere, angular rate below
    threshold, dwell elapsed) applies both to the cold-start hold and to
    every re-entry after a bounce.
    """
    dx = r[0] - r_d[0]
    dy = r[1] - r_d[1]
    dz = r[2] - r_d[2]
    in_sphere = np.sqrt(dx * dx + dy * dy + dz * dz) <= sphere_radius
    w_ok = np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) < w_thresh
    may_drop = in_sphere and w_ok and t_in_phase >= dwell_time

    status = BHC_OK
    if phase == 0:  # PositionHold
        if may_drop:
            return 1, MODE_ATTITUDE, status
        return 0, MODE_POSITION, status
    if phase == 1:  # Descend
        if in_contact:
            return 2, MODE_ATTITUDE, status
        return 1, MODE_ATTITUDE, status
    if phase == 2:  # Compression
        if not in_contact:
            return 2, MODE_ATTITUDE, BHC_IMPOSSIBLE
        if dL_rate > 0.0:
            return 3, MODE_POSITION, status
        return 2, MODE_ATTITUDE, status
    if phase == 3:  # Rebound
        if not in_contact:
            return 4, MODE_POSITION, status
        return 3, MODE_POSITION, status
    # Ascend
    if may_drop:
        return 1, MODE_ATTITUDE, status
    return 4, MODE_POSITION, status


def bhc_step(phase, state, pogo, cfg: BhcConfig, t_in_phase=float("inf")):
    """Advance the phase machine one evaluation.

    t_in_phase gates the dwell before a drop; the default (inf) makes the
    dwell check a no-op for direct calls.
    """
    new_phase, mode, status = _bhc_step(
        int(phase), state.r, state.w, pogo.in_contact, pogo.dL_rate,
        cfg.r_d_array(), cfg.sphere_radius, cfg.w_thresh, cfg.dwell_time,
        float(t_in_phase))
    if status == BHC_IMPOSSIBLE:
        raise SimulationFault(
            f"impossible phase/contact combination: {PHASE_NAMES[phase]} "
            "while not in contact")
    return BhcPhase(new_phase), mode
