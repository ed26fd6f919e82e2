"""Command-line interface.

Subcommands:

* ``generate`` — write seeded instance JSON files for a scenario/example.
* ``solve``    — run one solver on one instance file, print the result JSON.
* ``bench``    — run a scenario and write rows/medians/speedups/profiles
  (CSV, plus profile figures unless disabled).
* ``check``    — post-hoc residuals of a candidate point for an instance.

Exit codes: 0 on success, 1 if any projection failure occurred, 2 on bad
arguments.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bench import (
    Scenario,
    build_instance,
    instance_seed,
    median_table,
    performance_profile,
    run_scenario,
    scenario,
    speedup_table,
    write_medians_csv,
    write_profile_csv,
    write_rows_csv,
    write_speedups_csv,
)
from .operators import operator_from_json, operator_to_json
from .sets import ProjectionFailure, feasible_set_from_json, feasible_set_to_json
from .solvers import Algorithm, SolverConfig, Status, check_solution, default_start, solve


def _write_instance(path, fs, op, example, seed):
    doc = feasible_set_to_json(fs)
    doc["operator"] = operator_to_json(op)
    doc["example"] = int(example)
    doc["seed"] = int(seed)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _read_instance(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    fs = feasible_set_from_json(doc)
    op = operator_from_json(doc["operator"])
    return fs, op, doc


def _parse_dims(text):
    dims = []
    for part in text.split(","):
        n, _, m = part.strip().partition("x")
        dims.append((int(n), int(m)))
    return dims


def _custom_scenario(base: Scenario, dims, instances):
    return Scenario(
        name=base.name,
        dims=dims if dims is not None else base.dims,
        solvers=base.solvers,
        instances_per_config=instances if instances is not None else base.instances_per_config,
        tolerance=base.tolerance,
        max_iterations=base.max_iterations,
    )


def cmd_generate(args):
    scn = _custom_scenario(scenario(args.scenario), args.dims, args.instances)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for n, m in sorted(scn.dims):
        for index in range(scn.instances_per_config):
            seed = instance_seed(args.seed, args.example, n, m, index)
            fs, op = build_instance(args.example, n, m, seed)
            name = f"instance_e{args.example}_n{n}_m{m}_i{index}.json"
            _write_instance(out / name, fs, op, args.example, seed)
            print(out / name)
    return 0


def cmd_solve(args):
    fs, op, doc = _read_instance(args.instance)
    cfg = SolverConfig(
        algorithm=Algorithm(args.solver),
        tolerance=args.eps,
        max_iterations=args.max_iter,
        seed=int(doc.get("seed", 0)),
    )
    x0 = default_start(fs.dim, cfg.seed)
    result = solve(x0, op, fs, cfg)
    try:
        natural, feasibility = check_solution(result.final_point, op, fs)
        result.natural_residual = natural
    except ProjectionFailure:
        feasibility = None
    if args.trace:
        with open(args.trace, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "residual"])
            for k, res in result.residual_history:
                writer.writerow([k, repr(res)])
    doc = result.to_json()
    doc["feasibility"] = feasibility
    print(json.dumps(doc, indent=2))
    return 1 if result.status is Status.PROJECTION_FAILURE else 0


def cmd_bench(args):
    scn = _custom_scenario(scenario(args.scenario), args.dims, args.instances)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_scenario(scn, args.example, args.seed)
    write_rows_csv(rows, out / "rows.csv")
    write_medians_csv(median_table(rows), out / "medians.csv")
    reference = Algorithm.CRM_VIP1
    write_speedups_csv(speedup_table(rows, reference), reference, out / "speedups.csv")
    profile_iter = performance_profile(rows, "iterations")
    profile_time = performance_profile(rows, "time")
    write_profile_csv(profile_iter, out / "profile_iter.csv")
    write_profile_csv(profile_time, out / "profile_time.csv")
    if not args.no_plots:
        from .plots import save_profile_figure

        label = f"example {args.example}, scenario {scn.name}"
        save_profile_figure(profile_iter, out / "profile_iter.png", title=f"Iterations ({label})")
        save_profile_figure(profile_time, out / "profile_time.png", title=f"Wall time ({label})")
    for path in sorted(out.iterdir()):
        print(path)
    failed = any(r.status == Status.PROJECTION_FAILURE.value for r in rows)
    return 1 if failed else 0


def cmd_check(args):
    fs, op, _ = _read_instance(args.instance)
    with open(args.point, encoding="utf-8") as fh:
        point = np.asarray(json.load(fh), dtype=float)
    try:
        natural, feasibility = check_solution(point, op, fs, tol=args.tol)
    except ProjectionFailure as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    print(json.dumps({"natural_residual": natural, "feasibility": feasibility}))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vicrm",
        description="Variational-inequality solvers over ellipsoid intersections, with benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write seeded instance JSON files")
    gen.add_argument("--example", type=int, required=True, choices=(1, 2, 3))
    gen.add_argument("--scenario", required=True, choices=("A", "B", "C"))
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--dims", type=_parse_dims, default=None,
                     help="override sizes, e.g. '5x2,10x5'")
    gen.add_argument("--instances", type=int, default=None,
                     help="override instances per configuration")
    gen.set_defaults(func=cmd_generate)

    slv = sub.add_parser("solve", help="run one solver on one instance file")
    slv.add_argument("--instance", required=True)
    slv.add_argument("--solver", required=True, choices=[a.value for a in Algorithm])
    slv.add_argument("--eps", type=float, default=1e-6)
    slv.add_argument("--max-iter", type=int, default=100_000)
    slv.add_argument("--trace", default=None, help="write residual history CSV here")
    slv.set_defaults(func=cmd_solve)

    ben = sub.add_parser("bench", help="run a scenario and write reports")
    ben.add_argument("--example", type=int, required=True, choices=(1, 2, 3))
    ben.add_argument("--scenario", required=True, choices=("A", "B", "C"))
    ben.add_argument("--seed", type=int, required=True)
    ben.add_argument("--out", required=True)
    ben.add_argument("--dims", type=_parse_dims, default=None,
                     help="override sizes, e.g. '5x2,10x5'")
    ben.add_argument("--instances", type=int, default=None,
                     help="override instances per configuration")
    ben.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    ben.set_defaults(func=cmd_bench)

    chk = sub.add_parser("check", help="residuals of a candidate point")
    chk.add_argument("--instance", required=True)
    chk.add_argument("--point", required=True, help="JSON file with the coordinates")
    chk.add_argument("--tol", type=float, default=1e-10)
    chk.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
