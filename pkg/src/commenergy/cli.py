"""Command-line front end.

Subcommands
-----------
solve      solve a scenario; writes solution.csv, summary.json and manifest.json
baseline   water-filling powers along constant-speed paths
oracle     exhaustive speed-grid search on a tiny single-node scenario
calibrate  fit the antenna-gain product to a fixed-speed data maximum
check      validate a scenario and compare derivatives with finite differences

Exit codes: 0 optimal, 2 infeasible, 1 anything else.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import analysis, baselines
from .model import AP, KMH, MEGABYTE_BITS, ScenarioConfig, ScenarioError, scenario_to_dict
from .scenarios import load_scenario
from .solver import SolverOptions, derivative_check, solve
from .transcription import (InfeasibleScenarioError, Solution, build_program, check_feasibility,
                            delivered_bits, evaluate_energy)

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
FLOAT_FORMAT = "%.12e"

log = logging.getLogger("commenergy")


def config_hash(cfg: ScenarioConfig) -> str:
    """SHA-256 of the canonical JSON form of a validated scenario."""
    text = json.dumps(scenario_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _link_name(m: int) -> str:
    return "AP" if m == AP else f"U{m}"


def solution_columns(cfg: ScenarioConfig) -> list[str]:
    cols = ["t_s"]
    for n in range(1, cfg.n_nodes + 1):
        out = cfg.outgoing(n)
        cols += [f"U{n}_p_W_to_{_link_name(m)}" for m in out]
        cols += [f"U{n}_r_bps_to_{_link_name(m)}" for m in out]
        cols += [f"U{n}_s_bits", f"U{n}_q_m", f"U{n}_v_mps", f"U{n}_F_N"]
    return cols


def solution_table(cfg: ScenarioConfig, sol: Solution) -> np.ndarray:
    cols = [sol.knot_times]
    for n in range(1, cfg.n_nodes + 1):
        out = cfg.outgoing(n)
        cols += [sol.power[(n, m)] for m in out]
        cols += [sol.rate[(n, m)] for m in out]
        cols += [sol.buffer[n], sol.position[n], sol.speed[n], sol.thrust[n]]
    return np.column_stack(cols)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_solution_csv(path: Path, cfg: ScenarioConfig, sol: Solution) -> None:
    table = solution_table(cfg, sol)
    lines = [",".join(solution_columns(cfg))]
    lines += [",".join(FLOAT_FORMAT % v for v in row) for row in table]
    _atomic_write(path, "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _report_units(cfg: ScenarioConfig, energy: dict, comparison: dict | None) -> dict:
    rep = {
        "total_kJ": energy["total_J"] / 1e3,
        "transmission_kJ": energy["transmission_J"] / 1e3,
        "propulsion_kJ": energy["propulsion_J"] / 1e3,
        "nodes": {n: {f"{k}_kJ": v / 1e3 for k, v in e.items()} for n, e in energy["nodes"].items()},
        "initial_data_MB": {str(n): cfg.node(n).initial_data / MEGABYTE_BITS
                            for n in range(1, cfg.n_nodes + 1)},
        "speed_range_kmh": {str(n): [cfg.node(n).v_min / KMH, cfg.node(n).v_max / KMH]
                            for n in range(1, cfg.n_nodes + 1)},
    }
    if comparison:
        rep["max_data_MB"] = {"joint": _mb(comparison["joint"]["max_data_bits"]),
                              "fixed_speed": _mb(comparison["fixed_speed"]["max_data_bits"])}
    return rep


def _mb(bits):
    return None if bits is None or not math.isfinite(bits) else bits / MEGABYTE_BITS


def _solver_options(args) -> SolverOptions:
    return SolverOptions(kkt_tolerance=args.tolerance, max_iterations=args.max_iterations)


def _load(path) -> ScenarioConfig:
    try:
        return load_scenario(path)
    except ScenarioError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError([f"cannot read {path}: {exc}"]) from exc


def run_solve(scenario: Path, out: Path, opts: SolverOptions, compare: bool = False,
              report_units: bool = False) -> int:
    """Solve one scenario and write its artifacts into ``out``."""
    started = datetime.now(timezone.utc).isoformat()
    cfg = _load(scenario)
    out.mkdir(parents=True, exist_ok=True)
    sol, stats = solve(build_program(cfg), opts)
    summary = {"scenario": str(scenario), "solve": stats.as_dict()}
    if stats.status != "infeasible":
        energy = evaluate_energy(cfg, sol).as_dict()
        summary["energy"] = energy
        summary["extra_propulsion_J"] = analysis.energy_vs_baseline(sol, cfg)
        summary["delivered_bits"] = delivered_bits(cfg, sol)
        summary["max_violation_scaled"] = check_feasibility(cfg, sol).max_violation
        if len(cfg.transmitters_to(AP)) == 2:
            summary["priority"] = analysis.priority_trace(sol, cfg).summary()
        write_solution_csv(out / "solution.csv", cfg, sol)
    comparison = None
    if compare:
        comparison = analysis.compare_policies(cfg, opts).as_dict()
        summary["policy_comparison"] = comparison
    if report_units and "energy" in summary:
        summary["report_units"] = _report_units(cfg, summary["energy"], comparison)
    _atomic_write(out / "summary.json", _dump(summary))
    manifest = {
        "scenario": str(scenario),
        "config_sha256": config_hash(cfg),
        "solver_options": dataclasses.asdict(opts),
        "output_dir": str(out),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "status": stats.status,
    }
    _atomic_write(out / "manifest.json", _dump(manifest))
    print(f"{scenario}: {stats.status} after {stats.iterations} iterations, "
          f"objective {stats.objective:.6f} J")
    if stats.message:
        print(f"  {stats.message}")
    if stats.status == "optimal":
        return EXIT_OK
    return EXIT_INFEASIBLE if stats.status == "infeasible" else EXIT_ERROR


def _looks_like_scenario(path: Path) -> bool:
    # lets --all run on directories that also hold calibration or other JSON files
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return True
    return isinstance(doc, dict) and "nodes" in doc


def cmd_solve(args) -> int:
    opts = _solver_options(args)
    if args.all:
        files = [f for f in sorted(Path(args.scenario).glob("*.json")) if _looks_like_scenario(f)]
        if not files:
            print(f"no scenario files in {args.scenario}", file=sys.stderr)
            return EXIT_ERROR
        codes = []
        for f in files:
            try:
                codes.append(run_solve(f, Path(args.out) / f.stem, opts, args.compare_policies,
                                       args.units == "report"))
            except ScenarioError as exc:
                print(f"{f}: {exc}", file=sys.stderr)
                codes.append(EXIT_ERROR)
        if EXIT_ERROR in codes:
            return EXIT_ERROR
        return EXIT_INFEASIBLE if EXIT_INFEASIBLE in codes else EXIT_OK
    return run_solve(Path(args.scenario), Path(args.out), opts, args.compare_policies,
                     args.units == "report")


def cmd_baseline(args) -> int:
    cfg = _load(args.scenario)
    code = EXIT_OK
    rows, cols = [cfg.knot_times], ["t_s"]
    for n in range(1, cfg.n_nodes + 1):
        nd = cfg.node(n)
        prof = baselines.link_profile(cfg, n)
        bw = cfg.channel.bandwidth(AP)
        cap = baselines.max_feasible_data(prof, nd.p_max, cfg.channel.noise_power, bw)
        try:
            wf = baselines.water_filling(prof, nd.initial_data, nd.p_max, cfg.channel.noise_power, bw)
        except baselines.DataTooLargeError as exc:
            print(f"U{n}: infeasible, {exc}")
            code = EXIT_INFEASIBLE
            continue
        print(f"U{n}: transmission energy {wf.energy(prof):.6f} J, water level {wf.water_level:.6e} W, "
              f"max deliverable {cap:.6e} bits")
        rows += [wf.power, prof.gains]
        cols += [f"U{n}_p_W", f"U{n}_gain"]
    if args.out and code == EXIT_OK:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [",".join(cols)] + [",".join(FLOAT_FORMAT % v for v in r) for r in np.column_stack(rows)]
        _atomic_write(path, "\n".join(lines) + "\n")
    return code


def cmd_oracle(args) -> int:
    cfg = _load(args.scenario)
    try:
        res = baselines.brute_force_oracle(cfg, args.speed_grid)
    except InfeasibleScenarioError as exc:
        print(f"oracle: {exc}")
        return EXIT_INFEASIBLE
    sol, stats = solve(build_program(cfg), _solver_options(args))
    print(f"oracle energy  {res.energy:.6f} J ({res.n_feasible} of {res.n_profiles} speed profiles feasible)")
    print(f"solver energy  {stats.objective:.6f} J ({stats.status})")
    if stats.status == "optimal":
        print(f"ratio          {res.energy / stats.objective:.6f}")
        return EXIT_OK
    return EXIT_INFEASIBLE if stats.status == "infeasible" else EXIT_ERROR


def cmd_calibrate(args) -> int:
    cfg = _load(args.scenario)
    G = baselines.calibrate_gain(cfg, args.target_mb * MEGABYTE_BITS, node=args.node)
    print(f"G = {G:.17g}")
    if args.write:
        doc = {"antenna_gain_product": G, "target_bits": args.target_mb * MEGABYTE_BITS,
               "comment": f"calibrate_gain on {args.scenario}, node {args.node}, "
                          f"constant-speed maximum {args.target_mb} MB"}
        _atomic_write(Path(args.write), _dump(doc))
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = _load(args.scenario)
    print(f"scenario valid: {cfg.n_nodes} node(s), {cfg.knot_count} intervals, "
          f"config sha256 {config_hash(cfg)}")
    prog = build_program(cfg)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for i in range(args.points):
        x = prog.x0.copy()
        if i:
            x = x * (1.0 + 0.01 * rng.uniform(-1.0, 1.0, x.shape))
        worst = max(worst, derivative_check(prog, x, seed=args.seed + i))
    ok = worst < args.threshold
    print(f"derivative check over {args.points} point(s): worst relative error {worst:.3e} "
          f"({'pass' if ok else 'FAIL'})")
    return EXIT_OK if ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="commenergy", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--tolerance", type=float, default=1e-8, help="scaled KKT tolerance")
        sp.add_argument("--max-iterations", type=int, default=200)

    s = sub.add_parser("solve", help="solve a scenario")
    s.add_argument("scenario", help="scenario JSON file, or a directory with --all")
    s.add_argument("--out", default="out", help="output directory")
    s.add_argument("--all", action="store_true", help="solve every *.json in the scenario directory")
    s.add_argument("--compare-policies", action="store_true",
                   help="also solve the constant-speed policy and both data maxima")
    s.add_argument("--units", choices=("si", "report"), default="si",
                   help="'report' adds kJ, MB and km/h figures to summary.json")
    solver_flags(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("baseline", help="water-filling powers along constant-speed paths")
    b.add_argument("scenario")
    b.add_argument("--out", help="optional CSV of powers and gains")
    b.set_defaults(func=cmd_baseline)

    o = sub.add_parser("oracle", help="exhaustive search on a tiny single-node scenario")
    o.add_argument("scenario")
    o.add_argument("--speed-grid", type=int, default=20)
    solver_flags(o)
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("calibrate", help="fit G to a constant-speed data maximum")
    c.add_argument("scenario")
    c.add_argument("--target-mb", type=float, required=True)
    c.add_argument("--node", type=int, default=1)
    c.add_argument("--write", help="write the fitted value to this JSON file")
    c.set_defaults(func=cmd_calibrate)

    k = sub.add_parser("check", help="validate and run the derivative check")
    k.add_argument("scenario")
    k.add_argument("--points", type=int, default=3)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--threshold", type=float, default=1e-6)
    k.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
