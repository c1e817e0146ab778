"""Command-line entry point: ``pdpcd solve|validate|generate|bench``.

Exit codes: 0 success, 1 internal error, 2 usage error, 3 file or schema
error, 4 proven infeasible, 5 limit reached without a solution, 6 solution
rejected by the validator.
"""
import argparse
import csv
import json
import logging
from pathlib import Path
import sys

from .bnc import INFEASIBLE, SolveOptions, solve
from .generator import GeneratorParams, generate_with_witness
from .instance import (InstanceFormatError, hard_errors, read_instance, store_instance,
                       validate_instance)
from .solution import SolutionFormatError, load_solution, store_solution, solution_to_dict
from .validator import validate

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INFEASIBLE = 4
EXIT_NO_SOLUTION = 5
EXIT_INVALID = 6

BENCH_HEADER = ("instance", "n", "vehicles", "CNS", "NE", "cpu_s", "ost", "status", "gap")


class InputError(Exception):
    pass


def _read_instance(path):
    try:
        return read_instance(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except InstanceFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def _read_solvable(path):
    inst = _read_instance(path)
    for diag in validate_instance(inst):
        print(f"{diag.severity}: {path}: {diag.message}", file=sys.stderr)
    if hard_errors(validate_instance(inst)):
        raise InputError(f"{path}: invalid instance")
    return inst


def _options(args):
    return SolveOptions(time_limit_s=args.time_limit, gap_tol=args.gap,
                        enable_cuts=not args.no_cuts, seed=args.seed,
                        threads=args.threads, log_every=args.log_every)


def route_table(inst, sol):
    """Per-vehicle routes, serve times and ride times, costs to 3 decimals."""
    lines = []
    for k in range(sol.num_vehicles):
        lines.append(f"vehicle {k + 1}")
        for kind, route in (("pickup", sol.pickup_routes[k]), ("delivery", sol.delivery_routes[k])):
            path = " -> ".join(inst.label(v) for v in route)
            travel = sum(inst.t(a, b) for a, b in zip(route, route[1:]))
            duration = sol.service_start[k][route[-1]] - sol.service_start[k][route[0]]
            lines.append(f"  {kind:<8} route: {path}  (travel time {travel:.3f}, "
                         f"duration {duration:.3f})")
        lines.append(f"  crossdock: arrive {sol.service_start[k][inst.o2]:.3f}, "
                     f"unloaded {sol.unload_done[k]:.3f}, reload start {sol.reload_start[k]:.3f}, "
                     f"depart {sol.service_start[k][inst.o3]:.3f}")
    lines.append("")
    lines.append(f"{'vertex':>8} {'vehicle':>8} {'u':>12}")
    for v in range(1, 2 * inst.n + 1):
        k = sol.serving_vehicle(v)
        lines.append(f"{inst.label(v):>8} {k + 1:>8} {sol.service_start[k][v]:>12.3f}")
    lines.append("")
    lines.append(f"{'request':>8} {'ride time':>12}")
    for i in inst.pickups:
        lines.append(f"{i:>8} {sol.ride_time[i - 1]:>12.3f}")
    lines.append("")
    lines.append(f"total travel cost: {sol.cost:.3f}")
    return "\n".join(lines)


def cmd_solve(args):
    inst = _read_solvable(args.instance)
    res = solve(inst, _options(args))
    if not args.quiet:
        for line in res.log:
            print(line, file=sys.stderr)
    summary = {"instance": inst.name, "n": inst.n, "vehicles": inst.num_vehicles,
               **res.summary()}
    if res.solution is not None:
        summary["solution"] = solution_to_dict(inst, res.solution)
    if args.json:
        Path(args.json).write_text(json.dumps(summary, indent=2) + "\n")
    print(f"status: {res.status}" + (f" ({res.reason})" if res.reason else ""))
    print(f"CNS {res.num_constraints}  NE {res.nodes}  CPU {res.wall_time:.3f}s")
    if res.solution is None:
        return EXIT_INFEASIBLE if res.status == INFEASIBLE else EXIT_NO_SOLUTION
    out = Path(args.solution or f"{Path(args.instance).stem}_solution.json")
    out.write_bytes(store_solution(inst, res.solution))
    print(f"solution written to {out}")
    print()
    print(route_table(inst, res.solution))
    return EXIT_OK


def cmd_validate(args):
    inst = _read_instance(args.instance)
    try:
        sol = load_solution(inst, Path(args.solution).read_bytes())
        report = validate(inst, sol)
    except OSError as exc:
        raise InputError(f"{args.solution}: {exc.strerror or exc}") from None
    except SolutionFormatError as exc:
        raise InputError(f"{args.solution}: {exc}") from None
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n")
    print(report.to_table())
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_generate(args):
    params = GeneratorParams(
        n=args.n, num_vehicles=args.vehicles, seed=args.seed, box_size=args.box_size,
        demand_range=(args.demand_min, args.demand_max), window_slack=args.window_slack,
        L_factor=args.L_factor, T_factor=args.T_factor, capacity=args.capacity)
    try:
        inst, witness = generate_with_witness(params)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    Path(args.output).write_bytes(store_instance(inst))
    if args.witness:
        Path(args.witness).write_bytes(store_solution(inst, witness))
    print(f"wrote {args.output} (n={inst.n}, vehicles={inst.num_vehicles}, "
          f"witness cost {witness.cost:.3f})")
    return EXIT_OK


def cmd_bench(args):
    folder = Path(args.directory)
    if not folder.is_dir():
        raise InputError(f"{folder}: not a directory")
    files = sorted(folder.glob("*.json"))
    instances = [(f, _read_solvable(f)) for f in files]
    rows = []
    for path, inst in instances:
        res = solve(inst, _options(args))
        rows.append({
            "instance": inst.name, "n": inst.n, "vehicles": inst.num_vehicles,
            "CNS": res.num_constraints, "NE": res.nodes, "cpu_s": f"{res.wall_time:.3f}",
            "ost": repr(res.objective) if res.solution is not None else "",
            "status": res.status, "gap": repr(res.gap) if res.solution is not None else ""})
        print(f"{path.name}: {res.status} ost={rows[-1]['ost'] or '-'} NE={res.nodes} "
              f"CPU={res.wall_time:.2f}s", file=sys.stderr)
    with open(args.output, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_HEADER)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.output}")
    return EXIT_OK


def _solver_flags(p):
    p.add_argument("--time-limit", type=float, default=14400.0, metavar="S",
                   help="wall-clock limit in seconds (default 14400)")
    p.add_argument("--gap", type=float, default=1e-6, help="relative optimality gap (default 1e-6)")
    p.add_argument("--no-cuts", action="store_true", help="omit the valid-inequality rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="tree-search workers (default 1)")
    p.add_argument("--log-every", type=int, default=100, metavar="N",
                   help="log line every N nodes (0: only incumbents)")


def build_parser():
    parser = argparse.ArgumentParser(prog="pdpcd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an instance to optimality")
    p.add_argument("instance")
    _solver_flags(p)
    p.add_argument("--json", metavar="PATH", help="write a JSON summary (CNS, NE, CPU, ost, ...)")
    p.add_argument("--solution", metavar="PATH",
                   help="solution output (default <instance stem>_solution.json)")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress the search log")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="check a solution against an instance")
    p.add_argument("instance")
    p.add_argument("solution")
    p.add_argument("--json", metavar="PATH", help="write the report as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="write a seeded random instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--vehicles", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--box-size", type=float, default=100.0)
    p.add_argument("--demand-min", type=int, default=1)
    p.add_argument("--demand-max", type=int, default=10)
    p.add_argument("--window-slack", type=float, default=60.0)
    p.add_argument("--L-factor", type=float, default=1.2)
    p.add_argument("--T-factor", type=float, default=1.2)
    p.add_argument("--capacity", type=float, default=None)
    p.add_argument("--witness", metavar="PATH", help="also write the seed solution")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="solve every *.json in a directory, write CSV")
    p.add_argument("directory")
    _solver_flags(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # reported, not swallowed: exit 1 with the message
        logging.getLogger(__name__).debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
