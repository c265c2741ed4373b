"""YAML model and scenario files -> runtime objects.

All angles in files are degrees (matching how such platforms are usually
specified); everything becomes radians at this boundary.  Unknown keys are
rejected by name so a typo in a scenario file cannot silently change a run.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml

from .allocation import Rotor, RotorConfig, ring_config
from .control import ControllerConfig, Gains
from .dynamics import BodyParams, SystemModel
from .kinematics import ArmModel, CraigRow, N_JOINTS, N_LINKS
from .sim import JointTrajectory, NoiseConfig, ScenarioConfig, Setpoint


class ConfigError(ValueError):
    pass


def _load_yaml(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"{path}: cannot read: {err}") from err
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _check_keys(mapping: dict, allowed: set[str], where: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key {key!r} "
                              f"(allowed: {', '.join(sorted(allowed))})")


def _vec(value, n: int, where: str) -> np.ndarray:
    arr = np.asarray(value, float)
    if arr.shape != (n,):
        raise ConfigError(f"{where}: expected {n} numbers, got {value!r}")
    return arr


def _body(entry: dict, where: str) -> BodyParams:
    _check_keys(entry, {"mass", "com", "inertia_diag", "inertia"}, where)
    if "inertia" in entry:
        inertia = np.asarray(entry["inertia"], float)
    elif "inertia_diag" in entry:
        inertia = np.diag(_vec(entry["inertia_diag"], 3, where))
    else:
        raise ConfigError(f"{where}: needs inertia_diag or inertia")
    com = _vec(entry.get("com", [0.0, 0.0, 0.0]), 3, where)
    try:
        return BodyParams(mass=float(entry["mass"]), inertia=inertia, com=com)
    except (KeyError, ValueError) as err:
        raise ConfigError(f"{where}: {err}") from err


def _arm(section: dict, where: str) -> ArmModel:
    _check_keys(section, {"mount_offset", "joint_limit_deg", "rows"}, where)
    rows = section.get("rows")
    if not isinstance(rows, list) or len(rows) != N_LINKS:
        raise ConfigError(f"{where}: 'rows' must list exactly {N_LINKS} joint rows")
    craig = []
    for i, row in enumerate(rows):
        w = f"{where}.rows[{i}]"
        _check_keys(row, {"a", "alpha_deg", "d", "theta_offset_deg"}, w)
        craig.append(CraigRow(a=float(row.get("a", 0.0)),
                              alpha=math.radians(float(row.get("alpha_deg", 0.0))),
                              d=float(row.get("d", 0.0)),
                              theta_offset=math.radians(float(row.get("theta_offset_deg", 0.0)))))
    return ArmModel(rows=tuple(craig),
                    mount_offset=_vec(section.get("mount_offset", [0, 0, 0]), 3, where),
                    joint_limit=math.radians(float(section.get("joint_limit_deg", 150.0))))


def _rotors(section: dict, where: str) -> RotorConfig:
    _check_keys(section, {"k_f", "k_tau", "omega_max", "ring", "list"}, where)
    try:
        k_f = float(section["k_f"])
        k_tau = float(section["k_tau"])
        omega_max = float(section["omega_max"])
    except KeyError as err:
        raise ConfigError(f"{where}: missing {err}") from err
    if "ring" in section:
        ring = section["ring"]
        _check_keys(ring, {"count", "radius", "tilt_deg", "azimuth0_deg"}, f"{where}.ring")
        return ring_config(count=int(ring["count"]), radius=float(ring["radius"]),
                           tilt=math.radians(float(ring["tilt_deg"])),
                           k_f=k_f, k_tau=k_tau, omega_max=omega_max,
                           azimuth0=math.radians(float(ring.get("azimuth0_deg", 0.0))))
    if "list" in section:
        rotors = []
        for i, entry in enumerate(section["list"]):
            w = f"{where}.list[{i}]"
            _check_keys(entry, {"direction", "position", "spin"}, w)
            d = _vec(entry["direction"], 3, w)
            rotors.append(Rotor(direction=d / np.linalg.norm(d),
                                position=_vec(entry["position"], 3, w),
                                spin=int(entry["spin"])))
        try:
            return RotorConfig(rotors=tuple(rotors), k_f=k_f, k_tau=k_tau,
                               omega_max=omega_max)
        except ValueError as err:
            raise ConfigError(f"{where}: {err}") from err
    raise ConfigError(f"{where}: needs a 'ring' or 'list' rotor layout")


def _controller(section: dict, where: str) -> ControllerConfig:
    _check_keys(section, {"mode", "kp", "ki", "kd", "integral_clamp", "setpoint_hold",
                          "accel_limit"}, where)
    try:
        gains = Gains(kp=_vec(section["kp"], 6, where),
                      ki=_vec(section["ki"], 6, where),
                      kd=_vec(section["kd"], 6, where),
                      integral_clamp=float(section.get("integral_clamp", 2.0)))
        kwargs = {}
        if "accel_limit" in section:
            kwargs["accel_limit"] = _vec(section["accel_limit"], 6, where)
        hold = section.get("setpoint_hold", (2.5, 1.0))
        if isinstance(hold, (list, tuple)):
            hold = tuple(float(h) for h in hold)
        else:
            hold = float(hold)
        return ControllerConfig(gains=gains,
                                mode=str(section.get("mode", "dc_pid")),
                                setpoint_hold=hold,
                                **kwargs)
    except (KeyError, ValueError) as err:
        raise ConfigError(f"{where}: {err}") from err


def load_model(path) -> tuple[SystemModel, ControllerConfig]:
    path = Path(path)
    data = _load_yaml(path)
    _check_keys(data, {"gravity", "bodies", "arm", "rotors", "controller"}, str(path))
    for key in ("bodies", "arm", "rotors", "controller"):
        if key not in data:
            raise ConfigError(f"{path}: missing section {key!r}")
    bodies = data["bodies"]
    _check_keys(bodies, {"platform", "links"}, f"{path}:bodies")
    links = bodies.get("links")
    if not isinstance(links, list) or len(links) != N_LINKS:
        raise ConfigError(f"{path}:bodies.links must list exactly {N_LINKS} bodies")
    try:
        model = SystemModel(
            platform=_body(bodies["platform"], f"{path}:bodies.platform"),
            links=tuple(_body(entry, f"{path}:bodies.links[{i}]")
                        for i, entry in enumerate(links)),
            arm=_arm(data["arm"], f"{path}:arm"),
            rotors=_rotors(data["rotors"], f"{path}:rotors"),
            gravity=_vec(data.get("gravity", [0.0, 0.0, -9.81]), 3, f"{path}:gravity"),
        )
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err
    ctrl = _controller(data["controller"], f"{path}:controller")
    return model, ctrl


_SCENARIO_KEYS = {"name", "seed", "dt", "duration", "mode", "initial", "noise",
                  "uncertainty_pct", "filter_tau", "joints", "setpoints",
                  "controller"}


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    data = _load_yaml(path)
    _check_keys(data, _SCENARIO_KEYS, str(path))

    initial = data.get("initial", {})
    _check_keys(initial, {"position", "euler_deg"}, f"{path}:initial")
    init_pos = _vec(initial.get("position", [0, 0, 0]), 3, f"{path}:initial")
    init_euler = np.radians(_vec(initial.get("euler_deg", [0, 0, 0]), 3, f"{path}:initial"))

    joints = data.get("joints", {})
    _check_keys(joints, {"initial_deg", "trajectory"}, f"{path}:joints")
    q0 = np.radians(_vec(joints.get("initial_deg", [0] * N_JOINTS), N_JOINTS,
                         f"{path}:joints"))
    traj_spec = joints.get("trajectory", {"type": "fixed"})
    _check_keys(traj_spec, {"type", "joint", "amplitude", "frequency"},
                f"{path}:joints.trajectory")
    try:
        trajectory = JointTrajectory(initial=q0,
                                     kind=str(traj_spec.get("type", "fixed")),
                                     joint=int(traj_spec.get("joint", 3)),
                                     amplitude=float(traj_spec.get("amplitude", 0.0)),
                                     frequency=float(traj_spec.get("frequency", 1.0)))
    except ValueError as err:
        raise ConfigError(f"{path}:joints.trajectory: {err}") from err

    noise_spec = data.get("noise", {})
    _check_keys(noise_spec, {"pos_bound", "ang_bound_deg"}, f"{path}:noise")
    noise = NoiseConfig(pos_bound=float(noise_spec.get("pos_bound", 0.0)),
                        ang_bound=math.radians(float(noise_spec.get("ang_bound_deg", 0.0))))

    sp_list = data.get("setpoints")
    if not isinstance(sp_list, list) or not sp_list:
        raise ConfigError(f"{path}: needs a nonempty 'setpoints' list")
    setpoints = []
    for i, entry in enumerate(sp_list):
        w = f"{path}:setpoints[{i}]"
        _check_keys(entry, {"t", "position", "euler_deg"}, w)
        setpoints.append(Setpoint(t=float(entry.get("t", 0.0)),
                                  position=_vec(entry["position"], 3, w),
                                  euler=np.radians(_vec(entry.get("euler_deg", [0, 0, 0]), 3, w))))

    override = dict(data.get("controller", {}))
    _check_keys(override, {"mode", "kp", "ki", "kd", "integral_clamp", "setpoint_hold",
                           "accel_limit"}, f"{path}:controller")

    try:
        return ScenarioConfig(
            name=str(data.get("name", path.stem)),
            initial_position=init_pos,
            initial_euler=init_euler,
            joints=trajectory,
            setpoints=tuple(setpoints),
            noise=noise,
            uncertainty_pct=float(data.get("uncertainty_pct", 0.0)),
            filter_tau=float(data.get("filter_tau", 0.04)),
            dt=float(data.get("dt", 0.002)),
            duration=float(data.get("duration", 10.0)),
            seed=int(data.get("seed", 0)),
            mode=data.get("mode"),
            controller_override=override,
        )
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err
