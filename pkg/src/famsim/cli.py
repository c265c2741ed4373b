"""Command-line front end: run scenarios to CSV + metrics files, compare
controller modes on one scenario, or report the actuation rank of a model.

Scenario arguments can be file paths or names from the bundled catalog
(p1..p4, h1..h4, t1, t2).  Output files are written atomically.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import math
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from . import allocation, sim
from .config import ConfigError, load_model, load_scenario
from .sim import AXES, SimAbort, compute_metrics, run_scenario

_DEG_AXES = ("phi", "psi", "gamma")


def bundled_path(name: str) -> Path:
    """Path of a bundled config: 'model', 'model_flatquad' or a scenario name."""
    root = resources.files("famsim") / "configs"
    candidates = [root / f"{name}.yaml", root / "scenarios" / f"{name}.yaml"]
    for c in candidates:
        if c.is_file():
            return Path(str(c))
    raise ConfigError(f"no bundled config named {name!r}")


def _resolve(arg: str, kind: str) -> Path:
    p = Path(arg)
    if p.is_file():
        return p
    try:
        return bundled_path(arg)
    except ConfigError:
        raise ConfigError(f"{kind} {arg!r} is neither a file nor a bundled name")


def _atomic_write(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as stream:
            writer(stream)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _metric_lines(log: sim.SimLog, metrics: dict) -> list[str]:
    deg = 180.0 / math.pi
    lines = [f"scenario = {log.scenario}", f"mode = {log.mode}", f"seed = {log.seed}"]
    lines.append(f"settled = {str(all(m.settled for m in metrics.values())).lower()}")
    for name, m in metrics.items():
        scale = deg if name in _DEG_AXES else 1.0
        unit = "deg" if name in _DEG_AXES else "m"
        lines.append(f"{name}.step_{unit} = {m.step * scale:.6g}")
        lines.append(f"{name}.overshoot_pct = {m.overshoot_pct:.6g}")
        lines.append(f"{name}.settling_s = {m.settling_s:.6g}")
        lines.append(f"{name}.steady_state_error_{unit} = {m.steady_state_error * scale:.6g}")
        lines.append(f"{name}.dip_{unit} = {m.dip * scale:.6g}")
        lines.append(f"{name}.rms_final_{unit} = {m.rms_final * scale:.6g}")
    return lines


def _run_one(model_path: str, scenario_path: str, out_dir: str,
             seed: int | None, mode: str | None) -> tuple[str, str | None]:
    """Run a single scenario; returns (name, error message or None)."""
    model, ctrl = load_model(model_path)
    scn = load_scenario(scenario_path)
    if seed is not None:
        scn = dataclasses.replace(scn, seed=seed)
    if mode is not None:
        scn = dataclasses.replace(scn, mode=mode)
    out = Path(out_dir)
    try:
        log = run_scenario(scn, model, ctrl)
    except SimAbort as err:
        return scn.name, str(err)
    metrics = compute_metrics(log)
    _atomic_write(out / f"{scn.name}.csv", log.write_csv)
    lines = _metric_lines(log, metrics)
    _atomic_write(out / f"{scn.name}.metrics",
                  lambda s: s.write("\n".join(lines) + "\n"))
    return scn.name, None


def cmd_run(args) -> int:
    model_path = str(_resolve(args.model, "model"))
    scenario_paths = [str(_resolve(s, "scenario")) for s in args.scenarios]
    failures = []
    if args.jobs > 1 and len(scenario_paths) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_run_one, model_path, sp, args.out, args.seed, args.mode)
                       for sp in scenario_paths]
            results = [f.result() for f in futures]
    else:
        results = [_run_one(model_path, sp, args.out, args.seed, args.mode)
                   for sp in scenario_paths]
    for name, err in results:
        if err is None:
            print(f"{name}: ok -> {Path(args.out) / (name + '.csv')}")
        else:
            print(f"{name}: ABORTED: {err}", file=sys.stderr)
            failures.append(name)
    return 1 if failures else 0


def cmd_compare(args) -> int:
    model_path = _resolve(args.model, "model")
    scenario_path = _resolve(args.scenario, "scenario")
    model, ctrl = load_model(model_path)
    scn = load_scenario(scenario_path)
    if args.seed is not None:
        scn = dataclasses.replace(scn, seed=args.seed)
    out = Path(args.out)
    rows = []
    per_mode = {}
    for mode in ("dc_pid", "plain_pid"):
        run = dataclasses.replace(scn, mode=mode, name=f"{scn.name}_{mode}")
        try:
            log = run_scenario(run, model, ctrl)
        except SimAbort as err:
            print(f"{run.name}: ABORTED: {err}", file=sys.stderr)
            return 1
        _atomic_write(out / f"{run.name}.csv", log.write_csv)
        per_mode[mode] = compute_metrics(log)

    deg = 180.0 / math.pi
    header = f"{'metric':<24}{'axis':<8}{'dc_pid':>14}{'plain_pid':>14}"
    rows.append(header)
    rows.append("-" * len(header))
    for metric in ("rms_final", "overshoot_pct", "settling_s"):
        for axis in AXES:
            vals = []
            for mode in ("dc_pid", "plain_pid"):
                v = getattr(per_mode[mode][axis], metric)
                if metric == "rms_final" and axis in _DEG_AXES:
                    v *= deg
                vals.append(v)
            rows.append(f"{metric:<24}{axis:<8}{vals[0]:>14.6g}{vals[1]:>14.6g}")
    table = "\n".join(rows)
    print(table)
    _atomic_write(out / f"{scn.name}_compare.txt", lambda s: s.write(table + "\n"))
    return 0


def cmd_rank(args) -> int:
    model, _ = load_model(_resolve(args.model, "model"))
    B = allocation.coupling_matrix(model.rotors)
    rank, cond = allocation.actuation_rank(model.rotors)
    lo, hi = allocation.envelope(model.rotors)
    np.set_printoptions(precision=6, suppress=False, linewidth=120)
    print("coupling matrix (body frame, squared-speed input):")
    print(B)
    print(f"rank = {rank}")
    print(f"condition number = {cond:.6g}")
    print("attainable wrench at hover attitude (per axis):")
    labels = ("Fx [N]", "Fy [N]", "Fz [N]", "Tx [N m]", "Ty [N m]", "Tz [N m]")
    for j, lab in enumerate(labels):
        print(f"  {lab:<9} [{lo[j]:.4g}, {hi[j]:.4g}]")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="famsim",
                                     description="Aerial-manipulator simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run scenarios, write CSV logs and metrics")
    p_run.add_argument("scenarios", nargs="+", help="scenario files or catalog names")
    p_run.add_argument("--model", default="model", help="model file or bundled name")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override scenario seeds")
    p_run.add_argument("--mode", choices=("dc_pid", "plain_pid"), default=None)
    p_run.add_argument("--jobs", type=int, default=1, help="parallel scenario runs")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run one scenario under both controller modes")
    p_cmp.add_argument("scenario", help="scenario file or catalog name")
    p_cmp.add_argument("--model", default="model")
    p_cmp.add_argument("--out", default="out")
    p_cmp.add_argument("--seed", type=int, default=None)
    p_cmp.set_defaults(func=cmd_compare)

    p_rank = sub.add_parser("rank", help="actuation rank report for a model")
    p_rank.add_argument("--model", default="model")
    p_rank.set_defaults(func=cmd_rank)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
