"""Pose-error construction, PID law and the dynamic-compensation wrench.

Errors, gains and commands are 6-vectors with the translational block
first: e = [position error (m), attitude error (rad)].  The attitude error
is the axis-angle vector of R_desired @ R_current^T, i.e. the single fixed
world axis (scaled by the angle) that carries the current attitude onto the
desired one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .dynamics import SystemModel
from .kinematics import FrameSet
from .rotations import cross, rot_to_axis_angle

MODES = ("dc_pid", "plain_pid")


@dataclass(frozen=True)
class Gains:
    kp: np.ndarray
    ki: np.ndarray
    kd: np.ndarray
    integral_clamp: float = 2.0

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            v = np.asarray(getattr(self, name), float)
            if v.shape != (6,) or (v < 0.0).any():
                raise ValueError(f"{name} must be 6 nonnegative gains")
            object.__setattr__(self, name, v)
        if self.integral_clamp <= 0.0:
            raise ValueError("integral clamp must be positive")


@dataclass(frozen=True)
class ControllerConfig:
    gains: Gains
    mode: str = "dc_pid"
    # seconds of integral hold after a setpoint change (position block,
    # attitude block); holding rides out the transit so the integral keeps
    # its trim instead of winding up
    setpoint_hold: tuple = (2.5, 1.0)
    # per-axis cap on the commanded acceleration [m/s^2, rad/s^2]; keeps the
    # wrench demand inside the rotor envelope so force saturation cannot
    # bleed into the torque channels
    accel_limit: np.ndarray = field(
        default_factory=lambda: np.array([4.0, 4.0, 4.0, 6.0, 6.0, 6.0]))

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"controller mode must be one of {MODES}, got {self.mode!r}")
        hold = self.setpoint_hold
        if np.isscalar(hold):
            hold = (float(hold), float(hold))
        hold = (float(hold[0]), float(hold[1]))
        if hold[0] < 0.0 or hold[1] < 0.0:
            raise ValueError("setpoint_hold must be nonnegative")
        object.__setattr__(self, "setpoint_hold", hold)
        v = np.asarray(self.accel_limit, float)
        if v.shape != (6,) or (v <= 0.0).any():
            raise ValueError("accel_limit must be 6 positive numbers")
        object.__setattr__(self, "accel_limit", v)


@dataclass
class ControllerState:
    integral: np.ndarray = field(default_factory=lambda: np.zeros(6))
    prev_error: np.ndarray = field(default_factory=lambda: np.zeros(6))
    prev_time: float = 0.0
    primed: bool = False


def pose_error(P_current, R_current, P_desired, R_desired) -> np.ndarray:
    """6-vector pose error [P_d - P_c, axis*angle of R_d R_c^T]."""
    e = np.empty(6)
    e[0:3] = np.asarray(P_desired, float) - np.asarray(P_current, float)
    axis, angle = rot_to_axis_angle(np.asarray(R_desired, float) @ np.asarray(R_current, float).T)
    e[3:6] = angle * axis
    return e


def pid_step(e, state: ControllerState, dt: float, gains: Gains,
             rate=None, integrate: bool = True) -> np.ndarray:
    """One PID update on the pose error.

    The integral uses the trapezoid rule and is clamped per axis.  The
    derivative term prefers the measured twist (`rate` = [v, omega]): for a
    constant setpoint de/dt = -rate, and differencing bounded measurement
    noise at the control rate would swamp the loop.  Without `rate` it
    falls back to a backward difference of the error signal.

    `integrate` may be False or a per-axis boolean mask; masked-off axes
    hold their integral (anti-windup during commanded setpoint jumps)
    without resetting it.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    e = np.asarray(e, float)
    if not state.primed:
        state.prev_error = e.copy()
        state.primed = True
    gate = np.asarray(integrate, bool)
    if gate.any():
        state.integral += np.where(gate, 0.5 * dt * (e + state.prev_error), 0.0)
        np.clip(state.integral, -gains.integral_clamp, gains.integral_clamp,
                out=state.integral)
    if rate is not None:
        deriv = -np.asarray(rate, float)
    else:
        deriv = (e - state.prev_error) / dt
    u = gains.kp * e + gains.ki * state.integral + gains.kd * deriv
    state.prev_error = e.copy()
    state.prev_time += dt
    return u


def dynamic_compensation(model: SystemModel, fs: FrameSet, joint_rates,
                         joint_accels, accel_cmd=None,
                         ext_wrench=None) -> np.ndarray:
    """Feedforward wrench cancelling gravity, gyroscopic and arm-reaction
    terms of the platform balance.

    The arm reaction depends on the platform acceleration the command will
    produce, so the internal wrench is solved at the commanded acceleration
    (accel_cmd = [linear, angular], defaults to zero).  With the result,

        u_dc = [f_1 - G_A,
                omega x I omega + tau_1 + r x f_1]

    which, added to the inertia-scaled PID command, turns each axis of the
    platform into a plain double integrator.
    """
    accel = np.zeros(6) if accel_cmd is None else np.asarray(accel_cmd, float)
    _, sol = dynamics.solve_for_command(model, fs, joint_rates, joint_accels,
                                        accel, ext_wrench)
    f1 = sol.f[0]
    tau1 = sol.tau[0]
    I_A = dynamics.world_inertia(fs.R[0], model.platform.inertia)
    r_out = fs.P[1] - fs.P[0]
    u_dc = np.empty(6)
    u_dc[0:3] = f1 - model.platform.mass * model.gravity
    u_dc[3:6] = cross(fs.omega[0], I_A @ fs.omega[0]) + tau1 + cross(r_out, f1)
    return u_dc


def dc_pid(u_pid, u_dc, model: SystemModel, R_A) -> np.ndarray:
    """Combine: u = blockdiag(m_A I, I_A) u_pid + u_dc (world frame)."""
    u_pid = np.asarray(u_pid, float)
    I_A = dynamics.world_inertia(R_A, model.platform.inertia)
    u = np.empty(6)
    u[0:3] = model.platform.mass * u_pid[0:3] + np.asarray(u_dc, float)[0:3]
    u[3:6] = I_A @ u_pid[3:6] + np.asarray(u_dc, float)[3:6]
    return u


def plain_pid(u_pid, model: SystemModel, R_A) -> np.ndarray:
    """Ablation baseline: same PID scaling, but the feedforward is only the
    total nominal weight along world z (no arm-reaction terms)."""
    u_pid = np.asarray(u_pid, float)
    I_A = dynamics.world_inertia(R_A, model.platform.inertia)
    u = np.empty(6)
    u[0:3] = model.platform.mass * u_pid[0:3] - model.total_mass * model.gravity
    u[3:6] = I_A @ u_pid[3:6]
    return u
