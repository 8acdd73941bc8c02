"""Compiled closed-loop trial kernel.

One call runs the whole supervisor -> controller -> mixer -> noise ->
dynamics pipeline for a full trial at the fixed step. Noise is pre-drawn
by the caller (standard normals per step and rotor, plus one clamped
ground-tilt angle per potential touchdown) so the kernel itself is pure
numerics and bitwise reproducible for a given seed.

Recorded series follow a sample-at-t convention: row i holds the state and
supervisor phase at time i*dt together with the rotor forces applied over
[i*dt, (i+1)*dt). The final row repeats the evaluation at t_f for
inspection; its forces are never applied and are excluded from the energy
integral.
"""

import numpy as np
from numba import njit

from .control import _bhc_step, _position_control, _attitude_control, \
    _mix, _recombine, MODE_POSITION, BHC_OK
from .dynamics import _step_core, _spring_force, STATUS_OK

STATUS_BHC_IMPOSSIBLE = 3


@njit(cache=True)
def run_trial_kernel(n, dt, bounce_mode,
                     m, g, k, b, l0, l_min, k_stop, c_stop, arm, k_yaw, f_max,
                     freeze_inertia, I_body, I_inv,
                     kx, kv, kR, kw,
                     r_d, psi_d, sphere_radius, w_thresh, eps, dwell,
                     sigma_f, rotor_noise, ground_angles,
                     r0, v0, R0, w0):
    r = r0.copy()
    v = v0.copy()
    R = R0.copy()
    w = w0.copy()
    in_contact = False
    p_c = np.zeros(3)
    dL = 0.0
    dL_rate = 0.0
    tilt_axis = np.array([0.0, 1.0, 0.0])
    tilt_angle = 0.0

    phase = 0  # PositionHold
    settle_time = 0.0  # time the drop conditions have held continuously
    touchdowns = 0
    saturations = 0
    status = STATUS_OK
    fault_step = -1

    r_series = np.empty((n + 1, 3))
    phase_series = np.empty(n + 1, dtype=np.int8)
    spring_len = np.empty(n + 1)
    spring_f = np.empty(n + 1)
    forces = np.empty((n + 1, 4))
    fq_tau = np.empty((n + 1, 4))

    for i in range(n + 1):
        # state sample at t = i*dt (phase recorded before this sample's
        # transition so the series starts at PositionHold)
        r_series[i, 0] = r[0]
        r_series[i, 1] = r[1]
        r_series[i, 2] = r[2]
        phase_series[i] = phase
        if in_contact:
            spring_len[i] = l0 + dL
            spring_f[i] = _spring_force(dL, dL_rate, k, b, l0, l_min,
                                        k_stop, c_stop)
        else:
            spring_len[i] = l0
            spring_f[i] = 0.0

        # supervisor; the dwell gate wants the drop conditions (inside the
        # sphere, angular rate below threshold) held for dwell seconds
        if bounce_mode:
            new_phase, mode, bstat = _bhc_step(
                phase, r, w, in_contact, dL_rate, r_d, sphere_radius,
                w_thresh, dwell, settle_time)
            if bstat != BHC_OK:
                status = STATUS_BHC_IMPOSSIBLE
                fault_step = i
                break
            if new_phase != phase:
                settle_time = 0.0
            elif new_phase == 0 or new_phase == 4:  # PositionHold / Ascend
                dx = r[0] - r_d[0]
                dy = r[1] - r_d[1]
                dz = r[2] - r_d[2]
                in_sphere = (np.sqrt(dx * dx + dy * dy + dz * dz)
                             <= sphere_radius)
                w_ok = (np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
                        < w_thresh)
                settle_time = settle_time + dt if (in_sphere and w_ok) else 0.0
            phase = new_phase
        else:
            mode = MODE_POSITION

        # controller and mixer
        if mode == MODE_POSITION:
            f_q_c, tau_c = _position_control(r, v, R, w, r_d, psi_d,
                                             kx, kv, kR, kw, m, g, I_body)
        else:
            f_q_c, tau_c = _attitude_control(R, w, psi_d, eps, kR, kw, I_body)
        f4, sat = _mix(f_q_c, tau_c, arm, k_yaw, f_max)
        saturations += sat

        # actuation noise, then the command the dynamics actually sees
        if sigma_f > 0.0:
            for j in range(4):
                fj = f4[j] + sigma_f * rotor_noise[i, j]
                if fj < 0.0:
                    fj = 0.0
                    saturations += 1
                elif fj > f_max:
                    fj = f_max
                    saturations += 1
                f4[j] = fj
        f_q_a, tau_a = _recombine(f4, arm, k_yaw)
        forces[i, 0] = f4[0]
        forces[i, 1] = f4[1]
        forces[i, 2] = f4[2]
        forces[i, 3] = f4[3]
        fq_tau[i, 0] = f_q_a
        fq_tau[i, 1] = tau_a[0]
        fq_tau[i, 2] = tau_a[1]
        fq_tau[i, 3] = tau_a[2]

        if i == n:
            break  # final row records state and the unapplied command

        (r, v, R, w, in_contact, p_c, dL, dL_rate, tilt_axis, tilt_angle,
         step_status, touchdowns) = _step_core(
            r, v, R, w, in_contact, p_c, dL, dL_rate,
            tilt_axis, tilt_angle, ground_angles, touchdowns,
            f_q_a, tau_a, m, g, k, b, l0, l_min, k_stop, c_stop,
            I_body, I_inv, freeze_inertia, dt)
        if step_status != STATUS_OK:
            status = step_status
            fault_step = i
            break

    return (status, fault_step, saturations, touchdowns, r, v, R, w,
            r_series, phase_series, spring_len, spring_f, forces, fq_tau)
