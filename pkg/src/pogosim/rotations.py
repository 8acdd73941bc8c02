"""SO(3) helpers and inertia utilities shared by the dynamics and controllers.

Vectors are plain float64 numpy arrays of shape (3,), rotation matrices are
(3, 3) arrays with R mapping body-frame vectors into the world frame.
"""

import numpy as np
from numba import njit

# Skew-symmetry acceptance tolerance for vee(); well above double-precision
# noise, well below any physical scale in the simulation.
SKEW_TOL = 1e-9

E3 = np.array([0.0, 0.0, 1.0])


@njit(cache=True)
def hat(w):
    """Skew matrix of w, so that hat(w) @ u == cross(w, u)."""
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


@njit(cache=True)
def _vee(S):
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def vee(S):
    """Inverse of hat(). Rejects matrices that are not skew-symmetric."""
    S = np.asarray(S, dtype=float)
    if np.max(np.abs(S + S.T)) > SKEW_TOL:
        raise ValueError("vee: input is not skew-symmetric within tolerance")
    return _vee(S)


@njit(cache=True)
def exp_so3(w, dt):
    """Rodrigues rotation by angle ||w||*dt about axis w.

    Falls back to the second-order series for tiny angles so the result is
    exactly orthonormal-to-roundoff in both branches.
    """
    nw = np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    th = nw * dt
    K = hat(w)
    if th < 1e-8:
        # sin(th)/nw -> dt, (1-cos(th))/nw^2 -> dt^2/2 as th -> 0
        a = dt
        b = 0.5 * dt * dt
    else:
        a = np.sin(th) / nw
        b = (1.0 - np.cos(th)) / (nw * nw)
    return np.eye(3) + a * K + b * (K @ K)


@njit(cache=True)
def rot_z(psi):
    """Rotation about the world z-axis by yaw angle psi."""
    c = np.cos(psi)
    s = np.sin(psi)
    return np.array([
        [c, -s, 0.0],
        [s, c, 0.0],
        [0.0, 0.0, 1.0],
    ])


@njit(cache=True)
def parallel_axis(I_com, m, d):
    """Inertia about a pivot offset d along body z below the center of mass.

    The offset is perpendicular to x and y, so only the transverse terms
    pick up the m*d^2 shift; the zz term is unchanged.
    """
    Ip = I_com.copy()
    md2 = m * d * d
    Ip[0, 0] += md2
    Ip[1, 1] += md2
    return Ip


@njit(cache=True)
def inv3(A):
    """Cofactor inverse of a 3x3 matrix (no LAPACK call in the hot loop)."""
    a, b, c = A[0, 0], A[0, 1], A[0, 2]
    d, e, f = A[1, 0], A[1, 1], A[1, 2]
    g, h, i = A[2, 0], A[2, 1], A[2, 2]
    A00 = e * i - f * h
    A01 = c * h - b * i
    A02 = b * f - c * e
    det = a * A00 + d * A01 + g * A02
    inv = np.empty((3, 3))
    inv[0, 0] = A00 / det
    inv[0, 1] = A01 / det
    inv[0, 2] = A02 / det
    inv[1, 0] = (f * g - d * i) / det
    inv[1, 1] = (a * i - c * g) / det
    inv[1, 2] = (c * d - a * f) / det
    inv[2, 0] = (d * h - e * g) / det
    inv[2, 1] = (b * g - a * h) / det
    inv[2, 2] = (a * e - b * d) / det
    return inv


@njit(cache=True)
def cross3(a, b):
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
