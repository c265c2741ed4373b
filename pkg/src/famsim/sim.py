"""Closed-loop fixed-step simulation: true-plant integration, measurement
noise, parameter perturbation, command filtering/saturation, scenario
execution and metric extraction.

One scenario is one isolated state machine, fully deterministic for a given
(scenario, model) pair: the two RNG streams (parameter perturbation and
measurement noise) are spawned from the scenario seed.
"""
from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import allocation, control, dynamics, kinematics
from .control import ControllerConfig, ControllerState
from .dynamics import InternalSolveError, SystemModel
from .kinematics import N_JOINTS
from .rotations import euler_to_rot, orthonormalize, rot_to_euler, rotvec_to_rot


# allocation weighting used by the closed loop: keep unmet torque tiny at
# the expense of unmet force when the command leaves the attainable set
_ATTITUDE_PRIORITY = np.array([1.0, 1.0, 1.0, 50.0, 50.0, 50.0])


class SimAbort(RuntimeError):
    """Dynamics solve failed mid-run; carries the simulation time."""

    def __init__(self, t: float, scenario: str, cause: Exception):
        super().__init__(f"scenario {scenario!r} aborted at t={t:.4f} s: {cause}")
        self.t = t
        self.scenario = scenario


@dataclass(frozen=True)
class Setpoint:
    t: float
    position: np.ndarray
    euler: np.ndarray

    def rotation(self) -> np.ndarray:
        return euler_to_rot(self.euler)


@dataclass(frozen=True)
class NoiseConfig:
    pos_bound: float = 0.0   # m, uniform per axis
    ang_bound: float = 0.0   # rad, uniform per Euler axis

    def __post_init__(self):
        if self.pos_bound < 0.0 or self.ang_bound < 0.0:
            raise ValueError("noise bounds must be nonnegative")


@dataclass(frozen=True)
class JointTrajectory:
    """Prescribed joint motion: angles, rates and accelerations are inputs
    to the dynamics, not states.  'fixed' holds the initial angles;
    'sine_rate' drives one joint with rate = amplitude * sin(frequency t);
    'const_rate' ramps one joint at a constant rate = amplitude.
    """
    initial: np.ndarray
    kind: str = "fixed"
    joint: int = 3              # 1-based index for the driven joint
    amplitude: float = 0.0      # rad/s
    frequency: float = 1.0      # rad/s

    def __post_init__(self):
        object.__setattr__(self, "initial", np.asarray(self.initial, float))
        if self.initial.shape != (N_JOINTS,):
            raise ValueError(f"need {N_JOINTS} initial joint angles")
        if self.kind not in ("fixed", "sine_rate", "const_rate"):
            raise ValueError(f"unknown joint trajectory kind {self.kind!r}")
        if self.kind != "fixed" and not (1 <= self.joint <= N_JOINTS):
            raise ValueError(f"driven joint index {self.joint} out of range")

    def angles(self, t: float) -> np.ndarray:
        q = self.initial.copy()
        if self.kind == "sine_rate" and self.frequency != 0.0:
            j = self.joint - 1
            q[j] += self.amplitude * (1.0 - math.cos(self.frequency * t)) / self.frequency
        elif self.kind == "const_rate":
            q[self.joint - 1] += self.amplitude * t
        return q

    def rates(self, t: float) -> np.ndarray:
        qd = np.zeros(N_JOINTS)
        if self.kind == "sine_rate":
            qd[self.joint - 1] = self.amplitude * math.sin(self.frequency * t)
        elif self.kind == "const_rate":
            qd[self.joint - 1] = self.amplitude
        return qd

    def accels(self, t: float) -> np.ndarray:
        qdd = np.zeros(N_JOINTS)
        if self.kind == "sine_rate":
            qdd[self.joint - 1] = self.amplitude * self.frequency * math.cos(self.frequency * t)
        return qdd


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    initial_position: np.ndarray
    initial_euler: np.ndarray
    joints: JointTrajectory
    setpoints: tuple[Setpoint, ...]
    noise: NoiseConfig = NoiseConfig()
    uncertainty_pct: float = 0.0
    filter_tau: float = 0.04
    dt: float = 0.002
    duration: float = 10.0
    seed: int = 0
    mode: str | None = None          # None = use the model's controller mode
    controller_override: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "initial_position", np.asarray(self.initial_position, float))
        object.__setattr__(self, "initial_euler", np.asarray(self.initial_euler, float))
        if self.dt <= 0.0 or self.dt > 0.005:
            raise ValueError("dt must be in (0, 5 ms]")
        if self.duration < self.dt:
            raise ValueError("duration must cover at least one step")
        if not 0.0 <= self.uncertainty_pct <= 0.5:
            raise ValueError("uncertainty_pct must be in [0, 0.5]")
        if self.filter_tau < 0.0:
            raise ValueError("filter_tau must be nonnegative")
        if not self.setpoints or self.setpoints[0].t > 0.0:
            raise ValueError("setpoint schedule must start at t = 0")

    def setpoint_at(self, t: float) -> Setpoint:
        current = self.setpoints[0]
        for sp in self.setpoints[1:]:
            if sp.t <= t:
                current = sp
        return current

    def hold_integral(self, t: float, hold) -> np.ndarray:
        """Per-axis mask: True where the integral should keep accumulating.
        hold is (position window, attitude window) in seconds after a
        setpoint jump."""
        mask = np.ones(6, dtype=bool)
        for sp in self.setpoints[1:]:
            if sp.t <= t < sp.t + hold[0]:
                mask[0:3] = False
            if sp.t <= t < sp.t + hold[1]:
                mask[3:6] = False
        return mask


@dataclass
class SimState:
    R: np.ndarray
    P: np.ndarray
    omega: np.ndarray
    v: np.ndarray
    joints: np.ndarray
    joint_rates: np.ndarray
    t: float = 0.0
    controller: ControllerState = field(default_factory=ControllerState)
    filter_mem: np.ndarray = field(default_factory=lambda: np.zeros(6))


@dataclass(frozen=True)
class Measurement:
    """What the controller is allowed to see: noisy pose, clean twist and the
    commanded joint state."""
    P: np.ndarray
    R: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    joints: np.ndarray
    joint_rates: np.ndarray


@dataclass
class SimLog:
    scenario: str
    mode: str
    seed: int
    setpoints: tuple[Setpoint, ...]
    t: np.ndarray
    pose: np.ndarray        # (N,6) true [x y z phi psi gamma], rad
    pose_meas: np.ndarray   # (N,6)
    u_cmd: np.ndarray       # (N,6)
    u_filt: np.ndarray      # (N,6)
    omega_sq: np.ndarray    # (N,n)
    resid: np.ndarray       # (N,6)
    f1: np.ndarray          # (N,3)
    tau1: np.ndarray        # (N,3)

    def csv_header(self) -> list[str]:
        cols = ["t", "px", "py", "pz", "phi_deg", "psi_deg", "gamma_deg",
                "px_meas", "py_meas", "pz_meas",
                "phi_meas_deg", "psi_meas_deg", "gamma_meas_deg",
                "u_fx", "u_fy", "u_fz", "u_tx", "u_ty", "u_tz",
                "uf_fx", "uf_fy", "uf_fz", "uf_tx", "uf_ty", "uf_tz"]
        cols += [f"omega_sq_{i + 1}" for i in range(self.omega_sq.shape[1])]
        cols += ["res_fx", "res_fy", "res_fz", "res_tx", "res_ty", "res_tz",
                 "f1_x", "f1_y", "f1_z", "tau1_x", "tau1_y", "tau1_z"]
        return cols

    def write_csv(self, stream: io.TextIOBase) -> None:
        deg = 180.0 / math.pi
        stream.write(",".join(self.csv_header()) + "\n")
        for k in range(len(self.t)):
            row = [self.t[k]]
            row += list(self.pose[k, 0:3]) + list(self.pose[k, 3:6] * deg)
            row += list(self.pose_meas[k, 0:3]) + list(self.pose_meas[k, 3:6] * deg)
            row += list(self.u_cmd[k]) + list(self.u_filt[k])
            row += list(self.omega_sq[k]) + list(self.resid[k])
            row += list(self.f1[k]) + list(self.tau1[k])
            stream.write(",".join(format(x, ".10g") for x in row) + "\n")


def true_model(nominal: SystemModel, uncertainty_pct: float,
               rng: np.random.Generator) -> SystemModel:
    """Perturbed copy of the model: every mass, inertia diagonal entry and
    both rotor coefficients get an independent uniform factor in
    [1 - pct, 1 + pct].  Draw order is fixed so a seed pins the plant."""
    if not 0.0 <= uncertainty_pct <= 0.5:
        raise ValueError("uncertainty_pct must be in [0, 0.5]")
    if uncertainty_pct == 0.0:
        return nominal

    def factor(n=None):
        return rng.uniform(1.0 - uncertainty_pct, 1.0 + uncertainty_pct, size=n)

    def perturb_body(body: dynamics.BodyParams) -> dynamics.BodyParams:
        inertia = body.inertia.copy()
        inertia[np.diag_indices(3)] *= factor(3)
        return dynamics.BodyParams(mass=body.mass * float(factor()),
                                   inertia=inertia, com=body.com.copy())

    platform = perturb_body(nominal.platform)
    links = tuple(perturb_body(b) for b in nominal.links)
    rotors = dataclasses.replace(nominal.rotors,
                                 k_f=nominal.rotors.k_f * float(factor()),
                                 k_tau=nominal.rotors.k_tau * float(factor()))
    return dataclasses.replace(nominal, platform=platform, links=links, rotors=rotors)


def measure(state: SimState, noise: NoiseConfig,
            rng: np.random.Generator) -> Measurement:
    """Sensor model: position plus uniform noise, attitude composed with a
    small random rotation (uniform per-axis Euler noise); the twist and the
    commanded joint state pass through clean."""
    p = state.P + rng.uniform(-noise.pos_bound, noise.pos_bound, size=3)
    d_euler = rng.uniform(-noise.ang_bound, noise.ang_bound, size=3)
    R = state.R @ euler_to_rot(d_euler)
    return Measurement(P=p, R=R, v=state.v.copy(), omega=state.omega.copy(),
                       joints=state.joints.copy(), joint_rates=state.joint_rates.copy())


def filter_and_saturate(u, mem, tau: float, dt: float, lo, hi,
                        bypass=None) -> tuple[np.ndarray, np.ndarray]:
    """First-order lag toward u, then a hard clamp to the actuation envelope.

    `bypass` is added after the lag and before the clamp: the loop routes
    the rate-damping wrench through it, since that term is built from the
    noise-free twist and lagging it would cost closed-loop damping.
    Returns (emitted command, new filter memory)."""
    u = np.asarray(u, float)
    alpha = dt / (tau + dt) if tau > 0.0 else 1.0
    y = mem + alpha * (u - mem)
    out = y if bypass is None else y + np.asarray(bypass, float)
    return np.clip(out, lo, hi), y


def _frames_with_velocities(model: SystemModel, R, P, joints, omega, v, joint_rates):
    fs = model.frames(R, P, joints)
    return kinematics.velocity_recursion(fs, omega, v, joint_rates)


def step(model_true: SystemModel, state: SimState, omega_sq, dt: float,
         trajectory: JointTrajectory) -> tuple[SimState, dynamics.InternalSolution]:
    """Advance the true plant one tick under fixed rotor speeds.

    The platform pose integrates with a velocity-Verlet style update
    (position gains the half-step acceleration term, so uniform fields
    integrate exactly); the attitude composes the exact rotation of
    omega*dt + 0.5*omega_dot*dt^2 and is re-orthonormalized.  Joints follow
    their prescribed trajectory analytically.
    """
    if dt <= 0.0 or dt > 0.005:
        raise ValueError("dt must be in (0, 5 ms]")
    u_true = allocation.wrench_from_speeds(omega_sq, state.R, model_true.rotors)
    fs = _frames_with_velocities(model_true, state.R, state.P, state.joints,
                                 state.omega, state.v, state.joint_rates)
    try:
        sol = dynamics.solve_dynamics(model_true, fs, state.joint_rates,
                                      trajectory.accels(state.t), u_true)
    except InternalSolveError as err:
        raise SimAbort(state.t, "step", err) from err

    t_next = state.t + dt
    P = state.P + state.v * dt + 0.5 * sol.pdd_A * dt * dt
    v = state.v + sol.pdd_A * dt
    R = orthonormalize(rotvec_to_rot(state.omega * dt + 0.5 * sol.omega_dot_A * dt * dt)
                       @ state.R)
    omega = state.omega + sol.omega_dot_A * dt
    new = SimState(R=R, P=P, omega=omega, v=v,
                   joints=trajectory.angles(t_next),
                   joint_rates=trajectory.rates(t_next),
                   t=t_next, controller=state.controller,
                   filter_mem=state.filter_mem)
    return new, sol


def run_scenario(scn: ScenarioConfig, model: SystemModel,
                 ctrl: ControllerConfig) -> SimLog:
    """Execute one closed-loop scenario and record everything.

    Per tick: measure -> pose error -> PID -> dynamic compensation on the
    nominal model (dc_pid mode) -> wrench composition -> first-order filter
    and envelope clamp -> rotor allocation -> true-plant step.  The
    controller path sees only Measurement fields, never the true state.
    """
    ctrl = _apply_override(ctrl, scn.controller_override)
    mode = scn.mode or ctrl.mode
    if mode not in control.MODES:
        raise ValueError(f"unknown controller mode {mode!r}")

    ss = np.random.SeedSequence(scn.seed)
    rng_plant, rng_noise = (np.random.default_rng(s) for s in ss.spawn(2))
    model_true = true_model(model, scn.uncertainty_pct, rng_plant)

    lo, hi = allocation.envelope(model.rotors)
    n_steps = int(round(scn.duration / scn.dt))
    nr = model.rotors.n

    state = SimState(R=euler_to_rot(scn.initial_euler),
                     P=scn.initial_position.copy(),
                     omega=np.zeros(3), v=np.zeros(3),
                     joints=scn.joints.angles(0.0),
                     joint_rates=scn.joints.rates(0.0))
    unmet = np.zeros(6)  # last allocation residual, for integration gating

    log_t = np.empty(n_steps)
    log_pose = np.empty((n_steps, 6))
    log_meas = np.empty((n_steps, 6))
    log_u = np.empty((n_steps, 6))
    log_uf = np.empty((n_steps, 6))
    log_w = np.empty((n_steps, nr))
    log_res = np.empty((n_steps, 6))
    log_f1 = np.empty((n_steps, 3))
    log_tau1 = np.empty((n_steps, 3))

    for k in range(n_steps):
        t = state.t
        meas = measure(state, scn.noise, rng_noise)
        sp = scn.setpoint_at(t)
        e = control.pose_error(meas.P, meas.R, sp.position, sp.rotation())
        rate = np.concatenate([meas.v, meas.omega])
        integrate = scn.hold_integral(t, ctrl.setpoint_hold)
        # saturation-aware anti-windup: while the allocator reports unmet
        # force/torque, the corresponding integral would wind into a demand
        # the rotors cannot realize
        if np.abs(unmet[0:3]).max() > 0.5:
            integrate[0:3] = False
        if np.abs(unmet[3:6]).max() > 0.05:
            integrate[3:6] = False
        u_pid = control.pid_step(e, state.controller, scn.dt, ctrl.gains,
                                 rate=rate, integrate=integrate)
        # Split the command three ways: the proportional part is clamped,
        # which rate-limits large maneuvers so the braking torque stays
        # allocable; the integral part keeps its full (separately clamped)
        # authority; the rate-damping part is built from the clean twist and
        # bypasses the noise filter below.
        a_damp = -ctrl.gains.kd * rate
        a_int = ctrl.gains.ki * state.controller.integral
        a_p = np.clip(u_pid - a_damp - a_int, -ctrl.accel_limit, ctrl.accel_limit)
        a_rest = a_p + a_int
        u_pid = a_rest + a_damp
        qdd = scn.joints.accels(t)
        if mode == "dc_pid":
            fs_m = _frames_with_velocities(model, meas.R, meas.P, meas.joints,
                                           meas.omega, meas.v, meas.joint_rates)
            try:
                u_dc = control.dynamic_compensation(model, fs_m, meas.joint_rates,
                                                    qdd, accel_cmd=u_pid)
            except InternalSolveError as err:
                raise SimAbort(t, scn.name, err) from err
            u_slow = control.dc_pid(a_rest, u_dc, model, meas.R)
        else:
            u_slow = control.plain_pid(a_rest, model, meas.R)
        u_damp = control.dc_pid(a_damp, np.zeros(6), model, meas.R)
        u = u_slow + u_damp

        u_f, state.filter_mem = filter_and_saturate(
            u_slow, state.filter_mem, scn.filter_tau, scn.dt, lo, hi, bypass=u_damp)
        omega_sq, resid = allocation.allocate(u_f, meas.R, model.rotors,
                                              weights=_ATTITUDE_PRIORITY)
        unmet = resid

        euler_true, _ = rot_to_euler(state.R)
        euler_meas, _ = rot_to_euler(meas.R)
        log_t[k] = t
        log_pose[k, 0:3] = state.P
        log_pose[k, 3:6] = euler_true
        log_meas[k, 0:3] = meas.P
        log_meas[k, 3:6] = euler_meas
        log_u[k] = u
        log_uf[k] = u_f
        log_w[k] = omega_sq
        log_res[k] = resid

        try:
            state, sol = step(model_true, state, omega_sq, scn.dt, scn.joints)
        except SimAbort as err:
            raise SimAbort(err.t, scn.name, err) from err
        log_f1[k] = sol.f[0]
        log_tau1[k] = sol.tau[0]

    return SimLog(scenario=scn.name, mode=mode, seed=scn.seed,
                  setpoints=scn.setpoints, t=log_t, pose=log_pose,
                  pose_meas=log_meas, u_cmd=log_u, u_filt=log_uf,
                  omega_sq=log_w, resid=log_res, f1=log_f1, tau1=log_tau1)


def _apply_override(ctrl: ControllerConfig, override: dict) -> ControllerConfig:
    if not override:
        return ctrl
    gains = ctrl.gains
    gain_fields = {k: v for k, v in override.items() if k in ("kp", "ki", "kd", "integral_clamp")}
    if gain_fields:
        gains = dataclasses.replace(gains, **{
            k: (np.asarray(v, float) if k != "integral_clamp" else float(v))
            for k, v in gain_fields.items()})
    rest = {k: v for k, v in override.items() if k in ("mode", "setpoint_hold")}
    if "accel_limit" in override:
        rest["accel_limit"] = np.asarray(override["accel_limit"], float)
    return dataclasses.replace(ctrl, gains=gains, **rest)


AXES = ("x", "y", "z", "phi", "psi", "gamma")

# absolute settling bands for axes whose setpoint does not change
_HOLD_BAND = np.array([0.010, 0.010, 0.010,
                       math.radians(1.0), math.radians(1.0), math.radians(1.0)])
# floor on the settling band of stepped attitude axes: a 2 % band on a small
# tilt step would sit below the ripple that bounded measurement noise leaves
# on the true attitude
_ATT_BAND_FLOOR = math.radians(1.0)
_STEP_EPS = 1e-9


@dataclass
class AxisMetrics:
    step: float
    overshoot_pct: float
    settling_s: float
    settled: bool
    steady_state_error: float
    dip: float
    rms_final: float


def compute_metrics(log: SimLog, setpoints=None) -> dict[str, AxisMetrics]:
    """Step-response metrics per axis, evaluated on the true pose.

    The last schedule entry defines the step: reference start values are the
    trace values at the transition instant.  Overshoot and the 2 % settling
    band are relative to the step magnitude; axes whose setpoint does not
    change get an absolute band and report their peak deviation as `dip`.
    The RMS and steady-state errors use the final 25 % of the run.
    """
    sps = tuple(setpoints) if setpoints is not None else log.setpoints
    if len(log.t) == 0:
        raise ValueError("empty log")
    final = sps[-1]
    t_step = final.t
    target = np.concatenate([final.position, final.euler])
    if len(sps) > 1:
        prev = sps[-2]
        commanded = np.abs(target - np.concatenate([prev.position, prev.euler])) > _STEP_EPS
    else:
        commanded = None  # decide per axis from the trace
    k0 = int(np.searchsorted(log.t, t_step))
    k0 = min(k0, len(log.t) - 1)
    n = len(log.t)
    k_final = max(int(math.ceil(0.75 * n)), k0)

    out: dict[str, AxisMetrics] = {}
    for a, name in enumerate(AXES):
        x = log.pose[:, a]
        start = x[k0]
        step_mag = target[a] - start
        seg = x[k0:]
        err_final = x[k_final:] - target[a]
        stepped = (commanded[a] if commanded is not None
                   else abs(step_mag) > max(_STEP_EPS, 0.02 * _HOLD_BAND[a]))
        if stepped:
            overshoot = max(0.0, float(((seg - target[a]) * np.sign(step_mag)).max()))
            overshoot_pct = 100.0 * overshoot / abs(step_mag)
            band = 0.02 * abs(step_mag)
            if a >= 3:
                band = max(band, _ATT_BAND_FLOOR)
            dip = 0.0
        else:
            overshoot_pct = 0.0
            band = _HOLD_BAND[a]
            dip = float(np.abs(seg - target[a]).max())
        inside = np.abs(seg - target[a]) <= band
        settled = bool(inside[-1])
        if settled:
            # first index after which the trace never leaves the band
            idx = len(inside) - 1
            while idx > 0 and inside[idx - 1]:
                idx -= 1
            settling = float(log.t[k0 + idx] - t_step)
        else:
            settling = float("inf")
        out[name] = AxisMetrics(
            step=float(step_mag),
            overshoot_pct=overshoot_pct,
            settling_s=settling,
            settled=settled,
            steady_state_error=float(np.abs(err_final.mean())),
            dip=dip,
            rms_final=float(np.sqrt(np.mean(err_final ** 2))),
        )
    return out
