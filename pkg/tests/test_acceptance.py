"""End-to-end acceptance suite.

Each test prints a single PASS line with its headline numbers; thresholds
are pinned here and nowhere else.  The closed-loop tests run the bundled
scenario catalog at full length, so this module takes a few minutes.
"""
import dataclasses
import io
import math
import time

import numpy as np
import pytest
import scipy.linalg

from famsim import allocation, dynamics, kinematics
from famsim.allocation import Rotor, RotorConfig, actuation_rank, allocate, coupling_matrix
from famsim.cli import bundled_path
from famsim.config import load_scenario
from famsim.rotations import euler_to_rot, rotvec_to_rot
from famsim.sim import (JointTrajectory, NoiseConfig, ScenarioConfig, Setpoint,
                        SimState, compute_metrics, run_scenario, step)

from test_allocation import flat_quad, projected_gradient


def frames_with_vel(model, R, P, q, omega=None, v=None, qd=None):
    fs = model.frames(R, P, q)
    kinematics.velocity_recursion(fs,
                                  np.zeros(3) if omega is None else omega,
                                  np.zeros(3) if v is None else v,
                                  np.zeros(4) if qd is None else qd)
    return fs


def test_a1_structural_dynamics(model):
    """Coupled solve matches the composite-rigid-body balance on 100
    randomized locked-joint states within 1e-8 relative, in under 5 s."""
    rng = np.random.default_rng(20240901)
    t0 = time.time()
    worst = 0.0
    for _ in range(100):
        fs = frames_with_vel(model, euler_to_rot(rng.uniform(-0.9, 0.9, 3)),
                             rng.normal(size=3), rng.uniform(-1.5, 1.5, 4),
                             omega=rng.uniform(-1.5, 1.5, 3), v=rng.uniform(-1.5, 1.5, 3))
        U = rng.uniform(-8, 8, 6)
        sol = dynamics.solve_dynamics(model, fs, np.zeros(4), np.zeros(4), U)
        wd, pdd = dynamics.composite_accels(model, fs, fs.omega[0], fs.pdot[0], U)
        worst = max(worst,
                    np.abs(sol.omega_dot_A - wd).max() / (1 + np.abs(wd).max()),
                    np.abs(sol.pdd_A - pdd).max() / (1 + np.abs(pdd).max()))
    elapsed = time.time() - t0
    assert worst < 1e-8
    assert elapsed < 5.0
    print(f"\nA1 structural dynamics: PASS (worst rel err {worst:.2e}, {elapsed:.2f} s)")


def test_a2_conservation(model):
    """Free fall for 2 s at 1 ms steps: relative energy drift below 1e-5 and
    internal wrenches below 1e-9 N / N m throughout."""
    traj = JointTrajectory(initial=np.radians([-90.0, 0.0, -45.0, 0.0]))
    state = SimState(R=np.eye(3), P=np.array([9.0, 9.0, 9.0]),
                     omega=np.zeros(3), v=np.zeros(3),
                     joints=traj.angles(0.0), joint_rates=traj.rates(0.0))
    zero = np.zeros(model.rotors.n)
    fs = frames_with_vel(model, state.R, state.P, state.joints)
    e0 = sum(dynamics.energy(model, fs))
    drift = 0.0
    wrench = 0.0
    for _ in range(2000):
        state, sol = step(model, state, zero, 0.001, traj)
        wrench = max(wrench, np.abs(sol.f).max(), np.abs(sol.tau).max())
        fs = frames_with_vel(model, state.R, state.P, state.joints,
                             omega=state.omega, v=state.v, qd=state.joint_rates)
        drift = max(drift, abs(sum(dynamics.energy(model, fs)) - e0))
    rel = drift / abs(e0)
    assert rel < 1e-5
    assert wrench < 1e-9
    print(f"\nA2 conservation: PASS (energy drift {rel:.2e} rel, wrench {wrench:.2e})")


def test_a3_kinematics_oracles(model):
    """Velocity and acceleration recursions match finite differences of the
    pose chain within 1e-5 / 1e-4 relative on 50 random states."""
    rng = np.random.default_rng(7)
    worst_v = worst_a = 0.0
    for _ in range(50):
        R = euler_to_rot(rng.uniform(-0.8, 0.8, 3))
        P = rng.normal(size=3)
        q = rng.uniform(-1.2, 1.2, 4)
        qd, qdd = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
        omega, v = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        wd, pdd = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        fs = frames_with_vel(model, R, P, q, omega=omega, v=v, qd=qd)
        kinematics.acceleration_recursion(fs, wd, pdd, qd, qdd)

        eps = 1e-6
        fp = model.frames(rotvec_to_rot(omega * eps) @ R, P + v * eps, q + qd * eps)
        fm = model.frames(rotvec_to_rot(-omega * eps) @ R, P - v * eps, q - qd * eps)
        scale = 1.0 + np.abs(fs.pdot).max()
        worst_v = max(worst_v,
                      np.abs((fp.P - fm.P) / (2 * eps) - fs.pdot).max() / scale,
                      np.abs((fp.Pc - fm.Pc) / (2 * eps) - fs.pcdot).max() / scale)

        h = 1e-4
        def vel_at(s):
            Rp = rotvec_to_rot(omega * s + 0.5 * wd * s * s) @ R
            f = model.frames(Rp, P + v * s + 0.5 * pdd * s * s,
                             q + qd * s + 0.5 * qdd * s * s)
            kinematics.velocity_recursion(f, omega + wd * s, v + pdd * s, qd + qdd * s)
            return f
        fph, fmh = vel_at(h), vel_at(-h)
        scale = 1.0 + max(np.abs(fs.pdd).max(), np.abs(fs.omega_dot).max())
        worst_a = max(worst_a,
                      np.abs((fph.pdot - fmh.pdot) / (2 * h) - fs.pdd).max() / scale,
                      np.abs((fph.pcdot - fmh.pcdot) / (2 * h) - fs.pcdd).max() / scale,
                      np.abs((fph.omega - fmh.omega) / (2 * h) - fs.omega_dot).max() / scale)
    assert worst_v < 1e-5
    assert worst_a < 1e-4
    print(f"\nA3 kinematics oracles: PASS (velocity {worst_v:.2e}, acceleration {worst_a:.2e})")


def test_a4_allocation(model):
    """Rank structure, interior exactness on 1000 wrenches, exact bound
    satisfaction, and agreement with an independent first-order solver."""
    rank6, _ = actuation_rank(model.rotors)
    rank4, _ = actuation_rank(flat_quad())
    assert rank6 == 6 and rank4 == 4

    rng = np.random.default_rng(4242)
    cfg = model.rotors
    B = coupling_matrix(cfg)
    worst_res = 0.0
    for _ in range(1000):
        w_true = rng.uniform(0.05, 0.95, cfg.n) * cfg.cap
        u_body = B @ w_true
        R = euler_to_rot(rng.uniform(-0.6, 0.6, 3))
        u = np.concatenate([R @ u_body[0:3], R @ u_body[3:6]])
        w, res = allocate(u, R, cfg)
        assert (w >= 0.0).all() and (w <= cfg.cap).all()
        worst_res = max(worst_res, np.abs(res).max() / (1 + np.linalg.norm(u)))
    assert worst_res < 1e-8

    quad = flat_quad()
    Bq = coupling_matrix(quad)
    lo, hi = np.zeros(4), np.full(4, quad.cap)
    worst_pg = 0.0
    for k in range(40):
        if k % 2 == 0:
            u = Bq @ (rng.uniform(0.0, 1.4, 4) * quad.cap) + rng.normal(scale=1e-2, size=6)
        else:
            u = rng.uniform(-1, 1, 6) * np.array([2, 2, 40, 1, 1, 0.05])
        x = allocation.bounded_lstsq(Bq, u, lo, hi)
        x_ref = projected_gradient(Bq, u, lo, hi)
        worst_pg = max(worst_pg, np.abs(x - x_ref).max() / (1 + np.abs(x_ref).max()))
    assert worst_pg < 1e-6
    print(f"\nA4 allocation: PASS (interior residual {worst_res:.2e}, "
          f"oracle gap {worst_pg:.2e})")


def _run_catalog(names, model, ctrl, mode=None):
    out = {}
    for name in names:
        scn = load_scenario(bundled_path(name))
        if mode is not None:
            scn = dataclasses.replace(scn, mode=mode)
        t0 = time.time()
        log = run_scenario(scn, model, ctrl)
        wall = time.time() - t0
        out[name] = (log, compute_metrics(log), wall)
    return out


def test_a5_position_control(model, ctrl):
    """P1-P4 with full noise and parameter uncertainty: every axis settles
    within 2.5 s of the commanded step and position overshoot stays at or
    below 1 %."""
    results = _run_catalog(("p1", "p2", "p3", "p4"), model, ctrl)
    lines = []
    for name, (log, met, wall) in results.items():
        assert log.t[-1] <= 30.0
        assert wall < 60.0
        for axis in ("x", "y", "z", "phi", "psi", "gamma"):
            assert met[axis].settled, f"{name}:{axis} never settled"
            assert met[axis].settling_s <= 2.5, \
                f"{name}:{axis} settled in {met[axis].settling_s:.2f} s"
        for axis in ("x", "y", "z"):
            assert met[axis].overshoot_pct <= 1.0, \
                f"{name}:{axis} overshoot {met[axis].overshoot_pct:.2f} %"
        lines.append(f"{name}: ts={max(met[a].settling_s for a in met):.2f} s, "
                     f"os={max(met[a].overshoot_pct for a in ('x', 'y', 'z')):.2f} %")
    print("\nA5 position control: PASS (" + "; ".join(lines) + ")")


def test_a6_tilted_hover(model, ctrl):
    """H1-H4: the commanded tilt is reached within 2.5 s while X and Y stay
    within 10 mm, the Z dip stays below 30 mm, and the steady tilt error
    over the final 2 s is below 0.5 degrees."""
    results = _run_catalog(("h1", "h2", "h3", "h4"), model, ctrl)
    lines = []
    for name, (log, met, _) in results.items():
        for axis in ("phi", "psi", "gamma"):
            assert met[axis].settled and met[axis].settling_s <= 2.5, \
                f"{name}:{axis} convergence {met[axis].settling_s:.2f} s"
        assert met["x"].dip <= 0.010, f"{name}: X dip {met['x'].dip * 1000:.1f} mm"
        assert met["y"].dip <= 0.010, f"{name}: Y dip {met['y'].dip * 1000:.1f} mm"
        assert met["z"].dip <= 0.030, f"{name}: Z dip {met['z'].dip * 1000:.1f} mm"
        final = log.t >= log.t[-1] - 2.0
        goal = log.setpoints[-1].euler
        tilt_err = np.degrees(np.abs(log.pose[final, 3:5] - goal[0:2]).mean(axis=0))
        assert tilt_err.max() < 0.5, f"{name}: steady tilt error {tilt_err.max():.3f} deg"
        lines.append(f"{name}: ts={max(met[a].settling_s for a in ('phi', 'psi', 'gamma')):.2f} s, "
                     f"zdip={met['z'].dip * 1000:.1f} mm, tilt_err={tilt_err.max():.2f} deg")
    print("\nA6 tilted hover: PASS (" + "; ".join(lines) + ")")


def test_a7_compensation_ablation(model, ctrl):
    """Same-seed T1/T2 pairs: the compensated controller beats the
    weight-only baseline on Z and both tilt axes, by at least 2x on the
    tilt axes of T1."""
    lines = []
    for name in ("t1", "t2"):
        dc = _run_catalog((name,), model, ctrl, mode="dc_pid")[name][1]
        plain = _run_catalog((name,), model, ctrl, mode="plain_pid")[name][1]
        ratios = {a: plain[a].rms_final / dc[a].rms_final for a in ("z", "phi", "psi")}
        for axis, r in ratios.items():
            assert r > 1.0, f"{name}:{axis} ratio {r:.2f}"
        if name == "t1":
            assert ratios["phi"] >= 2.0 and ratios["psi"] >= 2.0, \
                f"t1 tilt ratios {ratios['phi']:.2f}, {ratios['psi']:.2f}"
        lines.append(f"{name}: z x{ratios['z']:.2f}, phi x{ratios['phi']:.2f}, "
                     f"psi x{ratios['psi']:.2f}")
    print("\nA7 compensation ablation: PASS (" + "; ".join(lines) + ")")


def _ideal_loop_trace(kp, ki, kd, x0, r, n, dt):
    """Reference: continuous PID on a clean double integrator, propagated
    exactly through the matrix exponential of the closed-loop system."""
    A = np.array([[0.0, 1.0, 0.0], [-kp, -kd, ki], [-1.0, 0.0, 0.0]])
    b = np.array([0.0, kp, 1.0]) * r
    Phi = scipy.linalg.expm(A * dt)
    Ainv_b = np.linalg.solve(A, b)
    z = np.array([x0, 0.0, 0.0])
    xs = np.empty(n)
    for k in range(n):
        xs[k] = z[0]
        z = Phi @ (z + Ainv_b) - Ainv_b
    return xs


def test_a8_closed_loop_linearization(model, ctrl):
    """With the compensation active and no noise, uncertainty or filtering,
    every axis behaves as the ideal PID-on-double-integrator loop: overshoot
    within 2 percentage points, settling within 2 % (plus two ticks)."""
    dt = 0.002
    joints = JointTrajectory(initial=np.radians([-90.0, 0.0, -45.0, 0.0]))
    base = dict(initial_position=np.array([9.0, 9.0, 9.0]), initial_euler=np.zeros(3),
                joints=joints, noise=NoiseConfig(), uncertainty_pct=0.0,
                filter_tau=0.0, dt=dt, seed=5)
    cases = []
    # one run steps all three position axes (they stay decoupled), three runs
    # step one attitude axis each
    sp = Setpoint(0.0, np.array([9.4, 9.4, 9.4]), np.zeros(3))
    cases.append((ScenarioConfig(name="a8_pos", duration=14.0, setpoints=(sp,), **base),
                  [("x", 0, 9.0, 9.4), ("y", 1, 9.0, 9.4), ("z", 2, 9.0, 9.4)]))
    for axis, name in ((0, "phi"), (1, "psi"), (2, "gamma")):
        euler = np.zeros(3)
        euler[axis] = math.radians(5.0)
        sp = Setpoint(0.0, np.array([9.0, 9.0, 9.0]), euler)
        cases.append((ScenarioConfig(name=f"a8_{name}", duration=8.0, setpoints=(sp,), **base),
                      [(name, 3 + axis, 0.0, math.radians(5.0))]))

    lines = []
    for scn, axes in cases:
        log = run_scenario(scn, model, ctrl)
        met = compute_metrics(log)
        for name, col, x0, r in axes:
            xs = _ideal_loop_trace(ctrl.gains.kp[col], ctrl.gains.ki[col],
                                   ctrl.gains.kd[col], x0, r, len(log.t), dt)
            ideal_log = dataclasses.replace(log, pose=log.pose.copy())
            ideal_log.pose[:, col] = xs
            ideal = compute_metrics(ideal_log)[name]
            got = met[name]
            assert got.settled and ideal.settled, f"{name} did not settle"
            os_err = abs(got.overshoot_pct - ideal.overshoot_pct)
            ts_err = abs(got.settling_s - ideal.settling_s)
            assert os_err <= 2.0, f"{name}: overshoot gap {os_err:.2f} points"
            assert ts_err <= 0.02 * ideal.settling_s + 2 * dt, \
                f"{name}: settling gap {ts_err * 1000:.1f} ms vs ideal {ideal.settling_s:.3f} s"
            lines.append(f"{name}: dOS={os_err:.3f} pts, dTs={ts_err * 1000:.0f} ms")
    print("\nA8 closed-loop linearization: PASS (" + "; ".join(lines) + ")")


def test_a9_determinism(model, ctrl):
    """Re-running a noisy, perturbed scenario with the same seed produces a
    byte-identical CSV."""
    scn = load_scenario(bundled_path("p1"))
    scn = dataclasses.replace(scn, duration=1.0)
    bufs = []
    for _ in range(2):
        buf = io.StringIO()
        run_scenario(scn, model, ctrl).write_csv(buf)
        bufs.append(buf.getvalue())
    assert bufs[0] == bufs[1]
    print(f"\nA9 determinism: PASS ({len(bufs[0])} CSV bytes identical)")
