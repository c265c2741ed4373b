"""Rotation helpers: skew matrices, x-y-z Euler angles, axis-angle maps.

Conventions used throughout the package: rotation matrices map body
coordinates into world coordinates; Euler angles are [phi, psi, gamma]
about the x, y, z axes applied in that order,

    R = Rx(phi) @ Ry(psi) @ Rz(gamma)

all angles in radians.
"""
from __future__ import annotations

import math

import numpy as np

Z_AXIS = np.array([0.0, 0.0, 1.0])

_GIMBAL_EPS = 1e-9
_ANGLE_EPS = 1e-12


class GimbalLockError(ValueError):
    """Euler-rate mapping requested too close to psi = +/- pi/2."""


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def cross(a, b) -> np.ndarray:
    """3-vector cross product (np.cross has heavy dispatch overhead for
    single small vectors, and the recursions call this thousands of times
    per simulated second)."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def skew(v) -> np.ndarray:
    """3x3 matrix [v]_x with [v]_x @ w == cross(v, w)."""
    vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
    return np.array([[0.0, -vz, vy],
                     [vz, 0.0, -vx],
                     [-vy, vx, 0.0]])


def vee(W) -> np.ndarray:
    """Inverse of skew for an (approximately) antisymmetric matrix."""
    return 0.5 * np.array([W[2, 1] - W[1, 2], W[0, 2] - W[2, 0], W[1, 0] - W[0, 1]])


def euler_to_rot(euler) -> np.ndarray:
    """Rotation matrix for x-y-z Euler angles [phi, psi, gamma]."""
    phi, psi, gamma = euler
    return rot_x(phi) @ rot_y(psi) @ rot_z(gamma)


def rot_to_euler(R) -> tuple[np.ndarray, bool]:
    """Invert euler_to_rot; returns (euler, gimbal_locked).

    psi is reported in (-pi/2, pi/2).  When |R[0,2]| is within 1e-9 of 1 the
    x and z rotations are degenerate: gamma is set to 0, the free angle is
    folded into phi and the flag comes back True.
    """
    s_psi = float(R[0, 2])
    if abs(s_psi) >= 1.0 - _GIMBAL_EPS:
        psi = math.copysign(0.5 * math.pi, s_psi)
        phi = math.atan2(math.copysign(1.0, s_psi) * R[1, 0], R[1, 1])
        return np.array([phi, psi, 0.0]), True
    psi = math.asin(s_psi)
    phi = math.atan2(-R[1, 2], R[2, 2])
    gamma = math.atan2(-R[0, 1], R[0, 0])
    return np.array([phi, psi, gamma]), False


def axis_angle_to_rot(axis, angle: float) -> np.ndarray:
    """Rodrigues formula: I + sin(a) [v]_x + (1 - cos(a)) [v]_x^2."""
    s = skew(axis)
    return np.eye(3) + math.sin(angle) * s + (1.0 - math.cos(angle)) * (s @ s)


def rotvec_to_rot(w) -> np.ndarray:
    """Rotation matrix for a rotation vector (axis * angle)."""
    angle = float(np.linalg.norm(w))
    if angle < 1e-12:
        s = skew(w)
        return np.eye(3) + s + 0.5 * (s @ s)
    return axis_angle_to_rot(np.asarray(w, float) / angle, angle)


def rot_to_axis_angle(R) -> tuple[np.ndarray, float]:
    """Extract (unit axis, angle in [0, pi]) from a rotation matrix.

    Identity maps to axis [0, 0, 1] with angle 0.  At angle pi the
    antisymmetric part vanishes and the axis is recovered from the diagonal;
    the sign is fixed so the first nonzero component is positive.
    """
    c = max(-1.0, min(1.0, 0.5 * (float(np.trace(R)) - 1.0)))
    angle = math.acos(c)
    if angle < _ANGLE_EPS:
        return Z_AXIS.copy(), 0.0
    if c <= -1.0 + 1e-12:
        # R == 2 a a^T - I at angle pi
        a = np.sqrt(np.maximum((np.diag(R) + 1.0) * 0.5, 0.0))
        k = int(np.argmax(a))
        for j in range(3):
            if j != k:
                a[j] = R[k, j] / (2.0 * a[k])
        for comp in a:
            if abs(comp) > 1e-9:
                if comp < 0.0:
                    a = -a
                break
        return a / np.linalg.norm(a), math.pi
    # R - R^T = 2 sin(angle) [axis]_x
    axis = vee(R - R.T) / (2.0 * math.sin(angle))
    return axis, angle


def euler_rates_from_omega(euler, omega_world) -> np.ndarray:
    """Map world angular velocity to x-y-z Euler angle rates.

    Raises GimbalLockError when |psi| is within 1e-3 of pi/2, where the
    mapping matrix blows up.
    """
    phi, psi, _ = euler
    if abs(psi) >= 0.5 * math.pi - 1e-3:
        raise GimbalLockError(f"euler-rate mapping singular at psi={psi:.6f} rad")
    cphi, sphi = math.cos(phi), math.sin(phi)
    cpsi, tpsi = math.cos(psi), math.tan(psi)
    m = np.array([[1.0, sphi * tpsi, -cphi * tpsi],
                  [0.0, cphi, sphi],
                  [0.0, -sphi / cpsi, cphi / cpsi]])
    return m @ np.asarray(omega_world, float)


def orthonormalize(R) -> np.ndarray:
    """Project a near-rotation matrix back onto SO(3)."""
    u, _, vt = np.linalg.svd(R)
    out = u @ vt
    if np.linalg.det(out) < 0.0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out
