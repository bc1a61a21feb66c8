"""Command-line entry point.

Commands:
  gen-scenario  write a scenario document from a seed and a profile
  optimize      run one scheme on a scenario and emit result artifacts
  sweep         run both schemes across a parameter range

All files are written atomically (temp file + rename) and all numbers are
printed with 9 significant digits, so re-running with identical inputs
reproduces byte-identical outputs. Exit codes: 0 on success, 3 when the
problem is infeasible, 4 on a numerical failure; an error record is
written to the output directory in both failure cases.
"""

import argparse
import concurrent.futures
import io
import json
import os
import sys

import numpy as np

from . import bcd, hover_fly
from .errors import (ConfigurationError, Infeasible, InvariantViolation,
                     SolverFailure, StartInfeasible, Unbounded)
from .metrics import solution_report
from .scenario import Scenario, generate_scenario
from .scenario_io import atomic_write_text, load_scenario, save_scenario
from .uav_power import propulsion_power

EXIT_OK = 0
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

_NUMERICAL_ERRORS = (SolverFailure, InvariantViolation, StartInfeasible,
                     Unbounded, FloatingPointError, np.linalg.LinAlgError)


def fmt(x) -> str:
    """Canonical number rendering: 9 significant digits."""
    return f"{float(x):.9g}"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Infeasible as exc:
        _write_error_record(args, "infeasible", exc)
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except _NUMERICAL_ERRORS as exc:
        _write_error_record(args, "numerical", exc)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavbc",
        description="UAV-assisted backscatter network EE optimizer")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-scenario", help="write a scenario document")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--profile", choices=("desk", "full"), default="desk")
    g.add_argument("--out-dir", default=".")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a generator parameter (e.g. qbar=25, "
                        "T=50, K=6, p_max=8)")
    g.set_defaults(func=cmd_gen_scenario)

    o = sub.add_parser("optimize", help="optimize one scheme on a scenario")
    o.add_argument("--scenario", required=True)
    o.add_argument("--scheme", choices=("fly", "hover"), default="fly")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out-dir", default=".")
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("sweep", help="run both schemes across a parameter")
    s.add_argument("--scenario", required=True)
    s.add_argument("--param", choices=("qbar", "T"), required=True)
    s.add_argument("--values", required=True,
                   help="comma-separated parameter values")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    return parser


# Generator override keys accepted by `gen-scenario --set`; "T" is the
# conventional shorthand for the mission time.
_GEN_ALIASES = {"T": "mission_time"}
_GEN_INT_KEYS = {"M", "K", "num_slots"}
_GEN_FLOAT_KEYS = {"area_side", "altitude", "mission_time", "beta0",
                   "noise_dbm", "eta", "qbar", "ebar", "p_max", "v_max",
                   "carrier_freq"}


def cmd_gen_scenario(args) -> int:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        key = _GEN_ALIASES.get(key, key)
        if key in _GEN_INT_KEYS:
            overrides[key] = int(value)
        elif key in _GEN_FLOAT_KEYS:
            overrides[key] = float(value)
        else:
            raise ConfigurationError(f"unknown scenario parameter {key!r}")
    scenario = generate_scenario(args.seed, profile=args.profile, **overrides)
    path = os.path.join(args.out_dir, "scenario.json")
    save_scenario(scenario, path)
    print(path)
    return EXIT_OK


def cmd_optimize(args) -> int:
    scenario = load_scenario(args.scenario)
    artifacts = run_scheme(scenario, args.scheme, args.seed, args.out_dir)
    for path in artifacts:
        print(path)
    return EXIT_OK


def run_scheme(scenario: Scenario, scheme: str, seed: int,
               out_dir: str) -> list:
    """Run one scheme and write all artifact files; returns their paths."""
    if scheme == "fly":
        solution, trace = bcd.run(scenario, seed=seed)
        return _write_fly_artifacts(scenario, solution, trace, out_dir)
    plan, result = hover_fly.optimize_hover_fly(scenario, seed=seed)
    return _write_hover_artifacts(scenario, plan, result, out_dir)


def _write_fly_artifacts(scenario, solution, trace, out_dir) -> list:
    report = solution.report()
    flat = solution.schedule.flat(scenario)
    speeds = solution.trajectory.speeds(scenario.slot_length)
    q = solution.trajectory.q

    rows = []
    for n in range(scenario.num_slots):
        k = int(np.argmax(flat[:, n])) if flat[:, n].max() > 0.5 else -1
        if k >= 0:
            m = int(scenario.association[k])
            pair = f"{m}:{k}"
            active = fmt(solution.power.p[m, n])
        else:
            pair = "none"
            active = fmt(0.0)
        rows.append([str(n + 1), fmt(q[n + 1, 0]), fmt(q[n + 1, 1]),
                     fmt(speeds[n]),
                     fmt(propulsion_power(scenario.uav, speeds[n])),
                     pair, active])
    traj_path = _write_csv(
        os.path.join(out_dir, "trajectory.csv"),
        ["slot", "x_m", "y_m", "speed_mps", "propulsion_power_w",
         "scheduled", "active_ce_power_w"], rows)

    rows = []
    for n in range(scenario.num_slots):
        k = int(np.argmax(flat[:, n])) if flat[:, n].max() > 0.5 else -1
        m = scenario.association[k] if k >= 0 else -1
        rows.append([str(n + 1), str(int(m)) if k >= 0 else "none",
                     str(k) if k >= 0 else "none"])
    sched_path = _write_csv(os.path.join(out_dir, "schedule.csv"),
                            ["slot", "ce", "bd"], rows)

    rows = [[str(n + 1)] + [fmt(solution.power.p[m, n])
                            for m in range(scenario.num_ces)]
            for n in range(scenario.num_slots)]
    power_path = _write_csv(
        os.path.join(out_dir, "power.csv"),
        ["slot"] + [f"ce{m}_power_w" for m in range(scenario.num_ces)], rows)

    rows = [[str(i), str(r.iteration), r.block, fmt(r.ee)]
            for i, r in enumerate(trace.records)]
    conv_path = _write_csv(os.path.join(out_dir, "convergence.csv"),
                           ["index", "iteration", "block", "ee"], rows)

    lines = [
        ("scheme", "fly"),
        ("status", trace.status),
        ("iterations", str(trace.iterations)),
        ("ee_bits_per_hz_per_joule", fmt(solution.ee)),
        ("total_throughput_bits_per_hz", fmt(report.per_bd_throughput.sum())),
        ("uav_energy_j", fmt(report.uav_energy)),
        ("ce_energy_j", fmt(report.ce_energy)),
        ("feasible", str(report.feasible).lower()),
    ]
    for k in range(scenario.num_bds):
        lines.append((f"throughput_bd{k}", fmt(report.per_bd_throughput[k])))
        lines.append((f"harvest_bd{k}_j", fmt(report.per_bd_energy[k])))
    for i, r in enumerate(trace.records):
        lines.append((f"trace[{i}]", f"{r.iteration} {r.block} {fmt(r.ee)}"))
    summary_path = _write_summary(os.path.join(out_dir, "summary.txt"), lines)
    return [summary_path, traj_path, sched_path, power_path, conv_path]


def _write_hover_artifacts(scenario, plan, result, out_dir) -> list:
    K = plan.order.size
    legs = plan.legs()
    rates = hover_fly.hover_rates(plan, scenario)
    p_hov = propulsion_power(scenario.uav, 0.0)
    rows = []
    for i in range(K):
        k = int(plan.order[i])
        m = int(scenario.association[k])
        rows.append([str(i + 1), fmt(plan.positions[i + 1, 0]),
                     fmt(plan.positions[i + 1, 1]), fmt(0.0), fmt(p_hov),
                     f"{m}:{k}", fmt(plan.powers[i])])
    traj_path = _write_csv(
        os.path.join(out_dir, "trajectory.csv"),
        ["slot", "x_m", "y_m", "speed_mps", "propulsion_power_w",
         "scheduled", "active_ce_power_w"], rows)

    rows = [[str(i + 1), str(int(scenario.association[plan.order[i]])),
             str(int(plan.order[i]))] for i in range(K)]
    sched_path = _write_csv(os.path.join(out_dir, "schedule.csv"),
                            ["slot", "ce", "bd"], rows)

    rows = [[str(i + 1), fmt(plan.times[i]), fmt(legs[i]),
             fmt(plan.powers[i]), fmt(rates[i])] for i in range(K)]
    power_path = _write_csv(
        os.path.join(out_dir, "power.csv"),
        ["slot", "hover_time_s", "leg_m", "ce_power_w", "rate_bits_per_hz"],
        rows)

    rows = [[str(i), str(i), name, fmt(ee)]
            for i, (name, ee) in enumerate(result.trace)]
    conv_path = _write_csv(os.path.join(out_dir, "convergence.csv"),
                           ["index", "iteration", "block", "ee"], rows)

    uav_e, ce_e = hover_fly.benchmark_energy(plan, scenario.uav)
    checks = hover_fly.audit_plan(plan, scenario)
    lines = [
        ("scheme", "hover"),
        ("status", result.status),
        ("iterations", str(len(result.trace))),
        ("ee_bits_per_hz_per_joule", fmt(result.ee)),
        ("total_throughput_bits_per_hz", fmt((plan.times * rates).sum())),
        ("uav_energy_j", fmt(uav_e)),
        ("ce_energy_j", fmt(ce_e)),
        ("feasible", str(all(c.ok for c in checks)).lower()),
        ("tour_order", " ".join(str(int(k)) for k in plan.order)),
        ("travel_time_s", fmt(plan.travel_time())),
    ]
    for i, (name, ee) in enumerate(result.trace):
        lines.append((f"trace[{i}]", f"{name} {fmt(ee)}"))
    summary_path = _write_summary(os.path.join(out_dir, "summary.txt"), lines)
    return [summary_path, traj_path, sched_path, power_path, conv_path]


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"unparseable --values {args.values!r}")
    if not values:
        raise ConfigurationError("--values must contain at least one number")

    points = [(value, scheme) for value in values
              for scheme in ("fly", "hover")]
    jobs = [(scenario_to_doc_override(scenario, args.param, value), scheme,
             args.seed) for value, scheme in points]
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]

    rows = []
    for (value, scheme), (status, ee, iters) in zip(points, results):
        rows.append([args.param, fmt(value), scheme, status,
                     fmt(ee) if ee is not None else "",
                     str(iters) if iters is not None else ""])
    path = _write_csv(os.path.join(args.out_dir, "sweep.csv"),
                      ["param", "value", "scheme", "status", "ee",
                       "iterations"], rows)
    print(path)
    return EXIT_OK


def scenario_to_doc_override(scenario: Scenario, param: str,
                             value: float) -> Scenario:
    if param == "qbar":
        return scenario.with_overrides(
            qbar=np.full(scenario.num_bds, value))
    if param == "T":
        return scenario.with_overrides(mission_time=value)
    raise ConfigurationError(f"unknown sweep parameter {param!r}")


def _sweep_point(job):
    """(status, ee, iterations) for one (scenario, scheme) run; failures
    become rows instead of aborting the sweep."""
    scenario, scheme, seed = job
    try:
        if scheme == "fly":
            solution, trace = bcd.run(scenario, seed=seed)
            return trace.status, solution.ee, trace.iterations
        _, result = hover_fly.optimize_hover_fly(scenario, seed=seed)
        return result.status, result.ee, len(result.trace)
    except Infeasible:
        return "infeasible", None, None
    except _NUMERICAL_ERRORS:
        return "numerical-failure", None, None


def _write_csv(path, header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    atomic_write_text(path, buf.getvalue())
    return path


def _write_summary(path, lines) -> str:
    atomic_write_text(path,
                      "".join(f"{k} = {v}\n" for k, v in lines))
    return path


def _write_error_record(args, kind, exc):
    out_dir = getattr(args, "out_dir", None)
    if not out_dir:
        return
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    detail = getattr(exc, "detail", None)
    if detail is not None:
        record["detail"] = _jsonable(detail)
    atomic_write_text(os.path.join(out_dir, "error.json"),
                      json.dumps(record, indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


if __name__ == "__main__":
    sys.exit(main())
