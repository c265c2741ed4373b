"""World-frame Newton-Euler dynamics of the platform-arm assembly.

Instead of a two-pass sweep, the per-body force/moment balances and the
acceleration recursions are stacked into one square linear system whose
unknowns are the platform accelerations, every joint interaction wrench and
every link acceleration:

    X = [wdot_A, Pdd_A, f_1..f_5, tau_1..tau_5,
         wdot_1..wdot_5, Pdd_1..Pdd_5, Pcdd_1..Pcdd_5]      (81 scalars)

Solving it in one shot yields the arm reaction wrench on the platform
without any simplifying assumption, which is what the dynamic-compensation
controller feeds on.

All quantities are world-frame.  Wrenches are 6-vectors ordered
[force (N), torque (N m)]; gravity is a plain acceleration vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kinematics
from .allocation import RotorConfig
from .kinematics import ArmModel, FrameSet, N_LINKS
from .rotations import cross, skew

N_UNKNOWNS = 6 + 15 * N_LINKS  # 81

# column offsets into X
_COL_WD_A = 0
_COL_PDD_A = 3
_COL_F = 6
_COL_TAU = _COL_F + 3 * N_LINKS
_COL_WD = _COL_TAU + 3 * N_LINKS
_COL_PDD = _COL_WD + 3 * N_LINKS
_COL_PCDD = _COL_PDD + 3 * N_LINKS

_I3 = np.eye(3)


class InternalSolveError(RuntimeError):
    """The coupled dynamics system could not be solved to tolerance."""


@dataclass(frozen=True)
class BodyParams:
    """Mass, body-frame inertia about the COM, and COM offset in the body frame."""
    mass: float
    inertia: np.ndarray
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "inertia", np.asarray(self.inertia, float))
        object.__setattr__(self, "com", np.asarray(self.com, float))
        if not self.mass > 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.inertia.shape != (3, 3) or not np.allclose(self.inertia, self.inertia.T):
            raise ValueError("inertia must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(self.inertia).min() <= 0.0:
            raise ValueError("inertia must be positive definite")


@dataclass(frozen=True)
class SystemModel:
    """Complete physical description: platform, five links, arm geometry,
    rotor layout and gravity."""
    platform: BodyParams
    links: tuple[BodyParams, ...]
    arm: ArmModel
    rotors: RotorConfig
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    ext_wrench: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        object.__setattr__(self, "gravity", np.asarray(self.gravity, float))
        object.__setattr__(self, "ext_wrench", np.asarray(self.ext_wrench, float))
        if len(self.links) != N_LINKS:
            raise ValueError(f"need {N_LINKS} links, got {len(self.links)}")
        if np.linalg.norm(self.platform.com) > 0.0:
            raise ValueError("platform COM offset must be zero: the platform "
                             "frame origin is taken as its center of mass")

    def com_offsets(self) -> np.ndarray:
        out = np.zeros((6, 3))
        for i, body in enumerate(self.links):
            out[i + 1] = body.com
        return out

    def masses(self) -> np.ndarray:
        return np.array([self.platform.mass] + [b.mass for b in self.links])

    @property
    def total_mass(self) -> float:
        return float(self.masses().sum())

    def frames(self, R_A, P_A, joints) -> FrameSet:
        return kinematics.forward_kinematics(self.arm, R_A, P_A, joints,
                                             self.com_offsets())


@dataclass
class InternalSolution:
    """Unpacked solution of the coupled system."""
    omega_dot_A: np.ndarray
    pdd_A: np.ndarray
    f: np.ndarray            # (5,3) wrench force on link i from its parent
    tau: np.ndarray          # (5,3)
    link_omega_dot: np.ndarray
    link_pdd: np.ndarray
    link_pcdd: np.ndarray
    residual: float

    @classmethod
    def from_vector(cls, x: np.ndarray, residual: float) -> "InternalSolution":
        return cls(
            omega_dot_A=x[_COL_WD_A:_COL_WD_A + 3].copy(),
            pdd_A=x[_COL_PDD_A:_COL_PDD_A + 3].copy(),
            f=x[_COL_F:_COL_F + 15].reshape(5, 3).copy(),
            tau=x[_COL_TAU:_COL_TAU + 15].reshape(5, 3).copy(),
            link_omega_dot=x[_COL_WD:_COL_WD + 15].reshape(5, 3).copy(),
            link_pdd=x[_COL_PDD:_COL_PDD + 15].reshape(5, 3).copy(),
            link_pcdd=x[_COL_PCDD:_COL_PCDD + 15].reshape(5, 3).copy(),
            residual=residual,
        )


def world_inertia(R, I_body) -> np.ndarray:
    """Inertia tensor rotated into the world frame: R I R^T."""
    R = np.asarray(R, float)
    return R @ np.asarray(I_body, float) @ R.T


def _sl(col: int) -> slice:
    return slice(col, col + 3)


def assemble(model: SystemModel, fs: FrameSet, joint_rates, joint_accels,
             u_wrench, ext_wrench=None) -> tuple[np.ndarray, np.ndarray]:
    """Build the 81x81 system M @ X = b for the current kinematic state.

    fs must carry velocities.  u_wrench is the rotor wrench acting on the
    platform (world frame, about the platform origin); ext_wrench the wrench
    the end-effector exerts on the environment (enters link 5's balance with
    opposite sign).
    """
    if not fs.has_velocities:
        raise ValueError("assemble needs a FrameSet with velocities")
    u_wrench = np.asarray(u_wrench, float)
    if u_wrench.shape != (6,):
        raise ValueError(f"u_wrench must be a 6-vector, got {u_wrench.shape}")
    ext = model.ext_wrench if ext_wrench is None else np.asarray(ext_wrench, float)
    rates = list(np.asarray(joint_rates, float)) + [0.0]
    accels = list(np.asarray(joint_accels, float)) + [0.0]

    g = model.gravity
    M = np.zeros((N_UNKNOWNS, N_UNKNOWNS))
    b = np.zeros(N_UNKNOWNS)

    # platform rotational / translational balance
    I_A = world_inertia(fs.R[0], model.platform.inertia)
    r_A_out = fs.P[1] - fs.P[0]
    M[0:3, _sl(_COL_WD_A)] = I_A
    M[0:3, _sl(_COL_F)] = skew(r_A_out)
    M[0:3, _sl(_COL_TAU)] = _I3
    b[0:3] = u_wrench[3:6] - cross(fs.omega[0], I_A @ fs.omega[0])
    M[3:6, _sl(_COL_PDD_A)] = model.platform.mass * _I3
    M[3:6, _sl(_COL_F)] = _I3
    b[3:6] = u_wrench[0:3] + model.platform.mass * g

    for i in range(1, 6):
        body = model.links[i - 1]
        k = i - 1
        r0 = 6 + 15 * k
        col_f = _COL_F + 3 * k
        col_tau = _COL_TAU + 3 * k
        col_wd = _COL_WD + 3 * k
        col_pdd = _COL_PDD + 3 * k
        col_pcdd = _COL_PCDD + 3 * k
        col_wd_prev = _COL_WD_A if i == 1 else col_wd - 3
        col_pdd_prev = _COL_PDD_A if i == 1 else col_pdd - 3

        I_i = world_inertia(fs.R[i], body.inertia)
        c_i = fs.R[i] @ fs.com[i]
        v_rel = fs.R[i - 1] @ fs.rel[i]
        r_in = fs.P[i] - fs.Pc[i]

        # rotational balance about the link COM
        rows = slice(r0, r0 + 3)
        M[rows, _sl(col_wd)] = I_i
        M[rows, _sl(col_f)] = -skew(r_in)
        M[rows, _sl(col_tau)] = -_I3
        b[rows] = -cross(fs.omega[i], I_i @ fs.omega[i])
        if i < 5:
            r_out = fs.P[i + 1] - fs.Pc[i]
            M[rows, _sl(col_f + 3)] = skew(r_out)
            M[rows, _sl(col_tau + 3)] = _I3
        else:
            r_out = fs.P[i] - fs.Pc[i]   # external wrench acts at the end frame
            b[rows] -= cross(r_out, ext[0:3]) + ext[3:6]

        # translational balance
        rows = slice(r0 + 3, r0 + 6)
        M[rows, _sl(col_pcdd)] = body.mass * _I3
        M[rows, _sl(col_f)] = -_I3
        b[rows] = body.mass * g
        if i < 5:
            M[rows, _sl(col_f + 3)] = _I3
        else:
            b[rows] -= ext[0:3]

        # angular acceleration recursion
        rows = slice(r0 + 6, r0 + 9)
        M[rows, _sl(col_wd)] = _I3
        M[rows, _sl(col_wd_prev)] = -_I3
        b[rows] = (cross(fs.omega[i], rates[i - 1] * fs.axis[i])
                   + accels[i - 1] * fs.axis[i])

        # frame-origin acceleration recursion
        rows = slice(r0 + 9, r0 + 12)
        M[rows, _sl(col_pdd)] = _I3
        M[rows, _sl(col_pdd_prev)] = -_I3
        M[rows, _sl(col_wd_prev)] = skew(v_rel)
        b[rows] = cross(fs.omega[i - 1], cross(fs.omega[i - 1], v_rel))

        # COM acceleration recursion
        rows = slice(r0 + 12, r0 + 15)
        M[rows, _sl(col_pcdd)] = _I3
        M[rows, _sl(col_pdd)] = -_I3
        M[rows, _sl(col_wd)] = skew(c_i)
        b[rows] = cross(fs.omega[i], cross(fs.omega[i], c_i))

    return M, b


def solve_internal(M: np.ndarray, b: np.ndarray) -> InternalSolution:
    """Direct dense solve with a residual acceptance check."""
    try:
        x = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as err:
        raise InternalSolveError(f"dynamics system is singular: {err}") from err
    residual = float(np.abs(M @ x - b).max())
    if residual >= 1e-8 * (1.0 + float(np.abs(b).max())):
        cond = float(np.linalg.cond(M))
        raise InternalSolveError(
            f"dynamics solve rejected: residual {residual:.3e}, "
            f"condition estimate {cond:.3e}")
    return InternalSolution.from_vector(x, residual)


def solve_dynamics(model: SystemModel, fs: FrameSet, joint_rates, joint_accels,
                   u_wrench, ext_wrench=None) -> InternalSolution:
    """Convenience wrapper: assemble then solve."""
    M, b = assemble(model, fs, joint_rates, joint_accels, u_wrench, ext_wrench)
    return solve_internal(M, b)


def solve_for_command(model: SystemModel, fs: FrameSet, joint_rates, joint_accels,
                      accel_des, ext_wrench=None) -> tuple[np.ndarray, InternalSolution]:
    """Invert the loop: find the rotor wrench that realizes the requested
    platform acceleration.

    accel_des is [linear acceleration (3), angular acceleration (3)].  The
    solved system is affine in the applied wrench, so one factorization plus
    a 6x6 solve pins the wrench exactly; the returned InternalSolution holds
    the interaction wrenches realized under that command.
    """
    accel_des = np.asarray(accel_des, float)
    M, b0 = assemble(model, fs, joint_rates, joint_accels, np.zeros(6), ext_wrench)
    # wrench injection: force into the translational rows, torque into the
    # rotational rows of the platform balance
    E = np.zeros((N_UNKNOWNS, 6))
    E[3:6, 0:3] = _I3
    E[0:3, 3:6] = _I3
    try:
        Y = np.linalg.solve(M, np.column_stack([b0, E]))
    except np.linalg.LinAlgError as err:
        raise InternalSolveError(f"dynamics system is singular: {err}") from err
    a0 = Y[0:6, 0]
    S = Y[0:6, 1:]
    d = np.concatenate([accel_des[3:6], accel_des[0:3]])  # X ordering: wdot first
    try:
        u = np.linalg.solve(S, d - a0)
    except np.linalg.LinAlgError as err:
        raise InternalSolveError("platform acceleration not controllable from "
                                 f"the wrench input: {err}") from err
    x = Y[:, 0] + Y[:, 1:] @ u
    residual = float(np.abs(M @ x - (b0 + E @ u)).max())
    return u, InternalSolution.from_vector(x, residual)


def composite_accels(model: SystemModel, fs: FrameSet, omega_A, v_A,
                     u_wrench) -> tuple[np.ndarray, np.ndarray]:
    """Locked-joint cross-check: treat platform plus links as one rigid body.

    Builds the composite mass, COM and inertia (parallel-axis) and applies a
    single-body Newton-Euler balance, then maps the COM acceleration back to
    the platform origin.  Only valid when all joint rates and accelerations
    are zero.
    """
    omega_A = np.asarray(omega_A, float)
    u_wrench = np.asarray(u_wrench, float)
    masses = model.masses()
    m_tot = masses.sum()
    p_cm = (masses[:, None] * fs.Pc).sum(axis=0) / m_tot

    I_cm = np.zeros((3, 3))
    bodies = [model.platform] + list(model.links)
    for i, body in enumerate(bodies):
        delta = fs.Pc[i] - p_cm
        I_cm += world_inertia(fs.R[i], body.inertia)
        I_cm += body.mass * ((delta @ delta) * _I3 - np.outer(delta, delta))

    force = u_wrench[0:3] + m_tot * model.gravity
    torque_cm = u_wrench[3:6] + cross(fs.P[0] - p_cm, u_wrench[0:3])
    pdd_cm = force / m_tot
    omega_dot = np.linalg.solve(I_cm, torque_cm - cross(omega_A, I_cm @ omega_A))
    r = fs.P[0] - p_cm
    pdd_A = pdd_cm + cross(omega_dot, r) + cross(omega_A, cross(omega_A, r))
    return omega_dot, pdd_A


def energy(model: SystemModel, fs: FrameSet) -> tuple[float, float]:
    """Total kinetic and potential energy of the assembly (needs velocities)."""
    if not fs.has_velocities:
        raise ValueError("energy needs a FrameSet with velocities")
    bodies = [model.platform] + list(model.links)
    ke = 0.0
    pe = 0.0
    for i, body in enumerate(bodies):
        I_w = world_inertia(fs.R[i], body.inertia)
        ke += 0.5 * body.mass * float(fs.pcdot[i] @ fs.pcdot[i])
        ke += 0.5 * float(fs.omega[i] @ (I_w @ fs.omega[i]))
        pe -= body.mass * float(model.gravity @ fs.Pc[i])
    return ke, pe
