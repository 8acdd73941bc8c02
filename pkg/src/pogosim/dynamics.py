"""Hybrid flight/contact equations of motion and the fixed-step integrator.

Two regimes: free flight (thrust + gravity, Euler rotational dynamics about
the center of mass) and ground contact, where the leg tip acts as a
no-slip pivot. In contact the translational equation keeps the thrust plus
the spring force, while the rotational equation runs about the pivot with
the parallel-axis inertia and the gravity moment.

The integrator is a kick-drift-kick (velocity Verlet) scheme: positions
advance with a half-step velocity, accelerations are re-evaluated at the
new pose (after resolving touchdown/liftoff), and velocities finish with
the second half-kick. Contact forces are stiff; this scheme holds
mechanical energy to well under 1% per bounce where a plain first-order
update drifts by several percent.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .params import RobotParams, NoiseConfig, SimulationFault
from .rotations import E3, exp_so3, inv3, cross3, parallel_axis

# Status codes shared with the trial loop.
STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_FLOOR_COLLAPSE = 2


@dataclass
class RigidState:
    """Pose and twist of the body frame in the world frame."""

    r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    w: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self):
        return RigidState(self.r.copy(), self.v.copy(),
                          self.R.copy(), self.w.copy())


@dataclass
class PogoState:
    """Contact flag, pivot point and spring deformation state.

    tilt_axis/tilt_angle hold the ground-tilt draw made at touchdown; the
    spring force direction for the whole contact is the body z-axis rotated
    by tilt_angle about tilt_axis (identity when the angle is zero).
    """

    in_contact: bool = False
    p_c: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dL: float = 0.0
    dL_rate: float = 0.0
    tilt_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    tilt_angle: float = 0.0

    def copy(self):
        return PogoState(self.in_contact, self.p_c.copy(), self.dL,
                         self.dL_rate, self.tilt_axis.copy(), self.tilt_angle)


@dataclass
class ControlCommand:
    """Collective thrust, body torque and the per-rotor forces they map to.

    f_q and tau are the values the dynamics sees, i.e. recombined from the
    post-noise, post-clamp rotor forces.
    """

    f_q: float = 0.0
    tau: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotor_forces: np.ndarray = field(default_factory=lambda: np.zeros(4))


@njit(cache=True)
def _spring_force(dL, dL_rate, k, b, l0, l_min, k_stop, c_stop):
    f = max(0.0, -k * dL - b * dL_rate)
    l = l0 + dL
    if l < l_min:
        # bottoming out dissipates: unilateral penalty spring with
        # stiffness-proportional damping (c_stop = b * k_stop / k)
        f += max(0.0, k_stop * (l_min - l) - c_stop * dL_rate)
    return f


def spring_force(dL, dL_rate, params: RobotParams):
    """Leg force: spring-damper, one-sided (pushes, never pulls), plus a
    stiff damped penalty spring below the mechanical stop at l_min."""
    return _spring_force(dL, dL_rate, params.k, params.b,
                         params.l0, params.l_min, params.k_stop,
                         params.c_stop)


@njit(cache=True)
def _tip_position(r, R, l):
    return r - l * R[:, 2]


def tip_position(state: RigidState, l):
    """World position of the leg tip for leg length l."""
    return _tip_position(state.r, state.R, l)


def detect_touchdown(state: RigidState, params: RobotParams):
    """Contact point if the relaxed-leg tip is at or below the floor,
    else None. The returned point has z clamped onto the ground plane."""
    tip = _tip_position(state.r, state.R, params.l0)
    if tip[2] <= 0.0:
        return np.array([tip[0], tip[1], 0.0])
    return None


@njit(cache=True)
def _contact_geometry(r, v, R, w, p_c, l0):
    """Leg length, deformation and deformation rate for a fixed pivot.

    l is the projection of (r - p_c) on the body z-axis; its analytic time
    derivative uses d/dt(R e3) = R hat(w) e3.
    """
    d = r - p_c
    b3 = R[:, 2]
    l = b3[0] * d[0] + b3[1] * d[1] + b3[2] * d[2]
    # R @ (w x e3)
    wxe3 = cross3(w, np.array([0.0, 0.0, 1.0]))
    b3dot = R @ wxe3
    l_rate = (b3dot[0] * d[0] + b3dot[1] * d[1] + b3dot[2] * d[2]
              + b3[0] * v[0] + b3[1] * v[1] + b3[2] * v[2])
    return l, l - l0, l_rate


def contact_spring_state(state: RigidState, p_c, params: RobotParams):
    """(dL, dL_rate) while pivoting about p_c. Faults if the geometry has
    collapsed through the floor (l <= 0)."""
    l, dL, dL_rate = _contact_geometry(state.r, state.v, state.R, state.w,
                                       np.asarray(p_c, dtype=float), params.l0)
    if l <= 0.0:
        raise SimulationFault("contact geometry collapsed (l <= 0)")
    return dL, dL_rate


@njit(cache=True)
def _flight_accel(v, R, w, f_q, tau, m, g, I_body, I_inv):
    r_dd = (f_q / m) * R[:, 2]
    r_dd[2] -= g
    w_d = I_inv @ (tau - cross3(w, I_body @ w))
    return r_dd, w_d


def flight_accel(state: RigidState, cmd: ControlCommand, params: RobotParams):
    """Free-flight accelerations: thrust along body z, gravity, and Euler
    rotational dynamics about the center of mass."""
    I = params.inertia()
    return _flight_accel(state.v, state.R, state.w, cmd.f_q,
                         np.asarray(cmd.tau, dtype=float),
                         params.m, params.g, I, np.linalg.inv(I))


@njit(cache=True)
def _tilted_dir(b3, axis, angle):
    """Rodrigues rotation of the body z-axis by the held ground-tilt draw."""
    if angle == 0.0:
        return b3.copy()
    c = np.cos(angle)
    s = np.sin(angle)
    axb = cross3(axis, b3)
    adb = axis[0] * b3[0] + axis[1] * b3[1] + axis[2] * b3[2]
    return b3 * c + axb * s + axis * (adb * (1.0 - c))


@njit(cache=True)
def _tilt_axis_for(R):
    """Horizontal axis normal to the plane spanned by body z and world z.

    Degenerates to world y when the body is upright.
    """
    b3 = R[:, 2]
    ax = np.array([-b3[1], b3[0], 0.0])  # z cross b3
    n = np.sqrt(ax[0] * ax[0] + ax[1] * ax[1])
    if n < 1e-12:
        return np.array([0.0, 1.0, 0.0])
    return ax / n


def tilted_spring_dir(R, angle):
    """Unit spring-force direction: body z rotated by `angle` about the
    horizontal axis perpendicular to the (body z, world z) plane."""
    R = np.asarray(R, dtype=float)
    return _tilted_dir(R[:, 2].copy(), _tilt_axis_for(R), float(angle))


def perturb_spring_direction(R, cfg: NoiseConfig, rng):
    """Draw the per-touchdown ground-tilt angle and return the resulting
    spring direction. The draw is N(0, (5*sigma)^2) radians, clamped to
    +-max_ground_tilt; one draw per touchdown, held for that contact."""
    G = 5.0 * cfg.sigma * rng.standard_normal()
    G = float(np.clip(G, -cfg.max_ground_tilt, cfg.max_ground_tilt))
    return tilted_spring_dir(R, G)


def perturb_rotor_forces(forces, cfg: NoiseConfig, params: RobotParams, rng):
    """Additive Gaussian force noise, std sigma times the per-rotor hover
    force, drawn in rotor order 1..4, clamped to [0, f_rotor_max]."""
    draws = rng.standard_normal(4)
    noisy = np.asarray(forces, dtype=float) + cfg.sigma * params.f_hover * draws
    return np.clip(noisy, 0.0, params.f_rotor_max)


@njit(cache=True)
def _contact_accel(r, v, R, w, p_c, tilt_axis, tilt_angle,
                   f_q, tau, m, g, k, b, l0, l_min, k_stop, c_stop,
                   I_body, freeze_inertia):
    l, dL, dL_rate = _contact_geometry(r, v, R, w, p_c, l0)
    # Total leg force magnitude per the spring law (one-sided, with the
    # hard stop). Its direction splits: the elastic ground reaction (up to
    # the raw spring share) follows the possibly tilted contact-patch
    # normal, while the damper (internal spring imperfections) and the
    # mechanical stop act along the leg axis.
    f_total = _spring_force(dL, dL_rate, k, b, l0, l_min, k_stop, c_stop)
    f_el = min(max(0.0, -k * dL), f_total)
    f_ax = f_total - f_el
    u_s = _tilted_dir(R[:, 2].copy(), tilt_axis, tilt_angle)

    r_dd = ((f_q + f_ax) / m) * R[:, 2] + (f_el / m) * u_s
    r_dd[2] -= g

    d = l0 if freeze_inertia else l
    Ip = parallel_axis(I_body, m, d)
    # gravity moment in the body frame: l e3 x (R^T (-m g e3))
    g_body = R.T @ np.array([0.0, 0.0, -m * g])
    m_g = cross3(l * np.array([0.0, 0.0, 1.0]), g_body)
    w_d = inv3(Ip) @ (tau + m_g - cross3(w, Ip @ w))
    return r_dd, w_d


def contact_accel(state: RigidState, pogo: PogoState, cmd: ControlCommand,
                  params: RobotParams):
    """Contact-regime accelerations: thrust plus the (possibly tilted)
    spring force translationally; pivot rotation with parallel-axis inertia
    and the gravity moment."""
    return _contact_accel(state.r, state.v, state.R, state.w, pogo.p_c,
                          pogo.tilt_axis, pogo.tilt_angle,
                          cmd.f_q, np.asarray(cmd.tau, dtype=float),
                          params.m, params.g, params.k, params.b,
                          params.l0, params.l_min, params.k_stop,
                          params.c_stop, params.inertia(),
                          params.freeze_contact_inertia)


@njit(cache=True)
def _accel(r, v, R, w, in_contact, p_c, tilt_axis, tilt_angle,
           f_q, tau, m, g, k, b, l0, l_min, k_stop, c_stop, I_body, I_inv,
           freeze_inertia):
    if in_contact:
        return _contact_accel(r, v, R, w, p_c, tilt_axis, tilt_angle,
                              f_q, tau, m, g, k, b, l0, l_min, k_stop,
                              c_stop, I_body, freeze_inertia)
    return _flight_accel(v, R, w, f_q, tau, m, g, I_body, I_inv)


# Contact dynamics are integrated at dt / CONTACT_SUBSTEPS. The flight
# regime is benign at the control step, but the hard stop is stiff enough
# that resolving a bounce at the raw control step distorts the impulse.
CONTACT_SUBSTEPS = 10


@njit(cache=True)
def _substep(r, v, R, w, in_contact, p_c, dL, dL_rate,
             tilt_axis, tilt_angle, ground_angles, angle_idx,
             f_q, tau, m, g, k, b, l0, l_min, k_stop, c_stop,
             I_body, I_inv, freeze_inertia, dt):
    """One kick-drift-kick update of length dt with contact transitions."""
    a0, wd0 = _accel(r, v, R, w, in_contact, p_c, tilt_axis, tilt_angle,
                     f_q, tau, m, g, k, b, l0, l_min, k_stop, c_stop,
                     I_body, I_inv, freeze_inertia)
    v_h = v + 0.5 * dt * a0
    w_h = w + 0.5 * dt * wd0
    r_n = r + dt * v_h
    R_n = R @ exp_so3(w_h, dt)

    status = STATUS_OK
    if in_contact:
        l, dL, dL_rate = _contact_geometry(r_n, v_h, R_n, w_h, p_c, l0)
        if l <= 0.0:
            status = STATUS_FLOOR_COLLAPSE
        elif dL >= 0.0:
            in_contact = False
            dL = 0.0
            dL_rate = 0.0
            tilt_angle = 0.0
    else:
        tip = _tip_position(r_n, R_n, l0)
        if tip[2] <= 0.0:
            in_contact = True
            p_c = np.array([tip[0], tip[1], 0.0])
            tilt_axis = _tilt_axis_for(R_n)
            tilt_angle = ground_angles[min(angle_idx, len(ground_angles) - 1)]
            angle_idx += 1
            l, dL, dL_rate = _contact_geometry(r_n, v_h, R_n, w_h, p_c, l0)
            if l <= 0.0:
                status = STATUS_FLOOR_COLLAPSE

    if status == STATUS_OK:
        a1, wd1 = _accel(r_n, v_h, R_n, w_h, in_contact, p_c,
                         tilt_axis, tilt_angle,
                         f_q, tau, m, g, k, b, l0, l_min, k_stop, c_stop,
                         I_body, I_inv, freeze_inertia)
        v_n = v_h + 0.5 * dt * a1
        w_n = w_h + 0.5 * dt * wd1
        if in_contact:
            # expose the deformation rate at the final velocities
            _, dL, dL_rate = _contact_geometry(r_n, v_n, R_n, w_n, p_c, l0)
    else:
        v_n = v_h
        w_n = w_h

    if status == STATUS_OK:
        ok = True
        for i in range(3):
            ok = ok and np.isfinite(r_n[i]) and np.isfinite(v_n[i]) \
                and np.isfinite(w_n[i])
        if not ok:
            status = STATUS_NONFINITE

    return (r_n, v_n, R_n, w_n, in_contact, p_c, dL, dL_rate,
            tilt_axis, tilt_angle, status, angle_idx)


@njit(cache=True)
def _step_core(r, v, R, w, in_contact, p_c, dL, dL_rate,
               tilt_axis, tilt_angle, ground_angles, angle_idx,
               f_q, tau, m, g, k, b, l0, l_min, k_stop, c_stop,
               I_body, I_inv, freeze_inertia, dt):
    """One control-step update under a held command.

    A flight step that stays clear of the ground commits in a single
    update; any step touching the contact regime is redone as
    CONTACT_SUBSTEPS shorter substeps. ground_angles[angle_idx:] supplies
    the tilt draws for touchdowns (one consumed per touchdown event); the
    returned index reports consumption.
    """
    if not in_contact:
        out = _substep(r, v, R, w, in_contact, p_c, dL, dL_rate,
                       tilt_axis, tilt_angle, ground_angles, angle_idx,
                       f_q, tau, m, g, k, b, l0, l_min, k_stop, c_stop,
                       I_body, I_inv, freeze_inertia, dt)
        if not out[4] and out[10] == STATUS_OK:
            return out

    h = dt / CONTACT_SUBSTEPS
    state = (r, v, R, w, in_contact, p_c, dL, dL_rate, tilt_axis,
             tilt_angle, STATUS_OK, angle_idx)
    for _ in range(CONTACT_SUBSTEPS):
        state = _substep(state[0], state[1], state[2], state[3], state[4],
                         state[5], state[6], state[7], state[8], state[9],
                         ground_angles, state[11],
                         f_q, tau, m, g, k, b, l0, l_min, k_stop, c_stop,
                         I_body, I_inv, freeze_inertia, h)
        if state[10] != STATUS_OK:
            break
    return state


def step(state: RigidState, pogo: PogoState, cmd: ControlCommand,
         params: RobotParams, dt, ground_angle=0.0):
    """Advance one step of duration dt under a held command.

    Contact transitions are resolved after the kinematic update: touchdown
    fixes the pivot (adopting `ground_angle` as the contact's tilt draw),
    liftoff clears the contact once the deformation returns to zero.
    """
    I = params.inertia()
    (r, v, R, w, in_c, p_c, dL, dL_rate, t_ax, t_an, status, _) = _step_core(
        state.r, state.v, state.R, state.w,
        pogo.in_contact, pogo.p_c, pogo.dL, pogo.dL_rate,
        pogo.tilt_axis, pogo.tilt_angle,
        np.array([float(ground_angle)]), 0,
        float(cmd.f_q), np.asarray(cmd.tau, dtype=float),
        params.m, params.g, params.k, params.b, params.l0, params.l_min,
        params.k_stop, params.c_stop, I, np.linalg.inv(I),
        params.freeze_contact_inertia, float(dt))
    if status == STATUS_NONFINITE:
        raise SimulationFault("state diverged (non-finite values)")
    if status == STATUS_FLOOR_COLLAPSE:
        raise SimulationFault("contact geometry collapsed (l <= 0)")
    return (RigidState(r, v, R, w),
            PogoState(in_c, p_c, dL, dL_rate, t_ax, t_an))
