"""Serial-chain forward kinematics and world-frame motion recursions.

The chain hangs from a floating platform: frame 0 is the platform body
frame, frames 1..5 sit at the arm joints.  Joint 5 is a fixed wrist that
carries the end-effector body, so only joints 1..4 move.

Each joint transform composes Rx(alpha) * Tx(a) * Rz(theta) * Tz(d); the
offset of frame i seen from frame i-1 is therefore constant, which is what
the velocity and acceleration recursions rely on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rotations import cross, rot_x, rot_z

N_LINKS = 5
N_JOINTS = 4


class JointLimitError(ValueError):
    pass


@dataclass(frozen=True)
class CraigRow:
    """One joint description: link length a [m], twist alpha [rad],
    offset d [m] and the constant part of the joint angle [rad]."""
    a: float
    alpha: float
    d: float
    theta_offset: float = 0.0


@dataclass(frozen=True)
class ArmModel:
    rows: tuple[CraigRow, ...]
    mount_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    joint_limit: float = math.radians(150.0)

    def __post_init__(self):
        if len(self.rows) != N_LINKS:
            raise ValueError(f"arm needs exactly {N_LINKS} rows, got {len(self.rows)}")
        for r in self.rows:
            if r.a < 0.0 or not np.isfinite([r.a, r.alpha, r.d, r.theta_offset]).all():
                raise ValueError(f"bad joint row {r}")
        object.__setattr__(self, "mount_offset", np.asarray(self.mount_offset, float))

    def check_limits(self, joints) -> None:
        joints = np.asarray(joints, float)
        if joints.shape != (N_JOINTS,):
            raise ValueError(f"expected {N_JOINTS} joint angles, got shape {joints.shape}")
        bad = np.abs(joints) > self.joint_limit
        if bad.any():
            i = int(np.argmax(bad))
            raise JointLimitError(
                f"joint {i + 1} angle {joints[i]:.4f} rad exceeds limit "
                f"+/-{self.joint_limit:.4f} rad")


def craig_transform(row: CraigRow, theta: float) -> np.ndarray:
    """Homogeneous transform Rx(alpha) Tx(a) Rz(theta_offset + theta) Tz(d)."""
    th = row.theta_offset + theta
    T = np.eye(4)
    T[:3, :3] = rot_x(row.alpha) @ rot_z(th)
    T[:3, 3] = [row.a, -math.sin(row.alpha) * row.d, math.cos(row.alpha) * row.d]
    return T


@dataclass
class FrameSet:
    """World-frame poses (and, once filled, motion) of the platform and links.

    Index 0 is the platform; 1..5 the joint frames.  rel[i] is the constant
    offset of frame i's origin in frame i-1 coordinates; axis[i] the world
    direction of joint i's rotation axis.
    """
    R: np.ndarray          # (6,3,3)
    P: np.ndarray          # (6,3) frame origins
    Pc: np.ndarray         # (6,3) body centers of mass
    rel: np.ndarray        # (6,3)
    axis: np.ndarray       # (6,3)
    com: np.ndarray        # (6,3) body-frame COM offsets used to build Pc
    omega: np.ndarray | None = None     # (6,3)
    pdot: np.ndarray | None = None      # (6,3) frame-origin velocities
    pcdot: np.ndarray | None = None     # (6,3) COM velocities
    omega_dot: np.ndarray | None = None
    pdd: np.ndarray | None = None
    pcdd: np.ndarray | None = None

    @property
    def has_velocities(self) -> bool:
        return self.omega is not None


def forward_kinematics(arm: ArmModel, R_A, P_A, joints, com_offsets) -> FrameSet:
    """Pose pass: world rotation, origin and COM of every body.

    com_offsets is (6,3): row 0 the platform COM offset (must be zero, the
    platform frame origin is its COM), rows 1..5 the link COMs in their own
    frames.
    """
    arm.check_limits(joints)
    R_A = np.asarray(R_A, float)
    P_A = np.asarray(P_A, float)
    com = np.asarray(com_offsets, float)

    R = np.empty((6, 3, 3))
    P = np.empty((6, 3))
    Pc = np.empty((6, 3))
    rel = np.zeros((6, 3))
    axis = np.empty((6, 3))

    R[0] = R_A
    P[0] = P_A
    Pc[0] = P_A + R_A @ com[0]
    axis[0] = R_A[:, 2]

    thetas = list(joints) + [0.0]
    for i in range(1, 6):
        row = arm.rows[i - 1]
        T = craig_transform(row, thetas[i - 1])
        off = T[:3, 3]
        if i == 1:
            off = off + arm.mount_offset
        rel[i] = off
        R[i] = R[i - 1] @ T[:3, :3]
        P[i] = P[i - 1] + R[i - 1] @ off
        Pc[i] = P[i] + R[i] @ com[i]
        axis[i] = R[i][:, 2]
    return FrameSet(R=R, P=P, Pc=Pc, rel=rel, axis=axis, com=com)


def velocity_recursion(fs: FrameSet, omega_A, v_A, joint_rates) -> FrameSet:
    """Fill world angular/linear velocities down the chain."""
    rates = list(np.asarray(joint_rates, float)) + [0.0]
    omega = np.empty((6, 3))
    pdot = np.empty((6, 3))
    pcdot = np.empty((6, 3))
    omega[0] = np.asarray(omega_A, float)
    pdot[0] = np.asarray(v_A, float)
    pcdot[0] = pdot[0] + cross(omega[0], fs.R[0] @ fs.com[0])
    for i in range(1, 6):
        omega[i] = omega[i - 1] + rates[i - 1] * fs.axis[i]
        pdot[i] = pdot[i - 1] + cross(omega[i - 1], fs.R[i - 1] @ fs.rel[i])
        pcdot[i] = pdot[i] + cross(omega[i], fs.R[i] @ fs.com[i])
    fs.omega, fs.pdot, fs.pcdot = omega, pdot, pcdot
    return fs


def acceleration_recursion(fs: FrameSet, omega_dot_A, pdd_A,
                           joint_rates, joint_accels) -> FrameSet:
    """Fill world angular/linear accelerations; velocities must be present."""
    if not fs.has_velocities:
        raise ValueError("velocity recursion must run before accelerations")
    rates = list(np.asarray(joint_rates, float)) + [0.0]
    accels = list(np.asarray(joint_accels, float)) + [0.0]
    wd = np.empty((6, 3))
    pdd = np.empty((6, 3))
    pcdd = np.empty((6, 3))
    wd[0] = np.asarray(omega_dot_A, float)
    pdd[0] = np.asarray(pdd_A, float)
    c0 = fs.R[0] @ fs.com[0]
    pcdd[0] = pdd[0] + cross(wd[0], c0) + cross(fs.omega[0], cross(fs.omega[0], c0))
    for i in range(1, 6):
        wd[i] = (wd[i - 1]
                 + cross(fs.omega[i], rates[i - 1] * fs.axis[i])
                 + accels[i - 1] * fs.axis[i])
        v_rel = fs.R[i - 1] @ fs.rel[i]
        pdd[i] = (pdd[i - 1] + cross(wd[i - 1], v_rel)
                  + cross(fs.omega[i - 1], cross(fs.omega[i - 1], v_rel)))
        c = fs.R[i] @ fs.com[i]
        pcdd[i] = (pdd[i] + cross(wd[i], c)
                   + cross(fs.omega[i], cross(fs.omega[i], c)))
    fs.omega_dot, fs.pdd, fs.pcdd = wd, pdd, pcdd
    return fs
