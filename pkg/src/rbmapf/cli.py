"""Command line: ``rbmapf {gen,calibrate,solve,bench}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import instances as inst_io
from .baselines import solve_baseline
from .bench import (
    LEVELS,
    METHODS,
    BenchConfig,
    CalibrationError,
    aggregate,
    calibrate_interval,
    default_instances,
    delta_at,
    format_report,
    run_benchmark,
    write_csv,
)
from .cbs import InvalidUtilityError, NoSolution, SolveTimeout, solve
from .graph import SolveRequest, default_timeout, path_risk

EXIT_OK = 0
EXIT_NO_SOLUTION = 2
EXIT_TIMEOUT = 3
EXIT_BAD_INPUT = 4


class BadInput(Exception):
    pass


def _level(text: str) -> float:
    text = text.strip()
    p = float(text[:-1]) / 100.0 if text.endswith("%") else float(text)
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError("risk level must be in [0, 1] (or 0%..100%)")
    return p


def _int_list(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _load(path: str) -> inst_io.Instance:
    try:
        return inst_io.load(path)
    except OSError as exc:
        raise BadInput(f"cannot read {path}: {exc}") from exc
    except inst_io.InstanceFormatError as exc:
        raise BadInput(f"{path}: {exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    try:
        inst = inst_io.difficulty_instance(args.seed, args.vertices, args.agents, args.difficulty, radius=args.radius)
    except (ValueError, inst_io.GenerationError) as exc:
        raise BadInput(str(exc)) from exc
    _emit(inst_io.dumps(inst) + "\n", args.out)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    inst = _load(args.instance)
    try:
        interval = calibrate_interval(inst, timeout_scale=args.timeout_scale)
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT if isinstance(exc.__cause__, SolveTimeout) else EXIT_NO_SOLUTION
    doc = {"instance": inst.name, "lower": interval.lower, "upper": interval.upper,
           "levels": {f"{int(p * 100)}%": delta_at(interval, p) for p in LEVELS}}
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    if args.delta is not None:
        delta = args.delta
        if delta < 0:
            raise BadInput("--delta must be >= 0")
    else:
        try:
            interval = calibrate_interval(inst, timeout_scale=args.timeout_scale)
        except CalibrationError as exc:
            print(f"calibration failed: {exc}", file=sys.stderr)
            return EXIT_TIMEOUT if isinstance(exc.__cause__, SolveTimeout) else EXIT_NO_SOLUTION
        delta = delta_at(interval, args.risk_level)
    try:
        req = SolveRequest(
            inst.graph,
            inst.tasks,
            delta,
            inst.radius,
            timeout=default_timeout(len(inst.tasks), args.timeout_scale),
            allocation_strategy=args.alloc,
        )
        if args.method == "rbcbs":
            sol = solve(req)
        else:
            sol = solve_baseline(req, args.method, lam=args.lam, quantile=args.prune_quantile)
    except (ValueError, InvalidUtilityError) as exc:
        raise BadInput(str(exc)) from exc
    except SolveTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except NoSolution as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    lines = [f"instance {inst.name}  method {args.method}  delta {delta!r}"]
    for p, b in zip(sol.paths, sol.budgets):
        lines.append(
            f"agent {p.agent_id}: steps {p.cost}  risk {path_risk(p, inst.graph)!r}  budget {b!r}  path {' '.join(map(str, p.vertices))}"
        )
    lines.append(f"sum_of_costs {sol.cost}  total_risk {sol.total_risk!r}")
    st = sol.stats
    lines.append(f"ct_expanded {st.ct_expanded}  ct_generated {st.ct_generated}  reallocations {st.reallocations}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.instances:
        insts = [_load(p) for p in args.instances]
    else:
        try:
            insts = default_instances(
                _int_list(args.seeds), _int_list(args.sizes), _int_list(args.agent_counts), args.difficulty, args.radius
            )
        except (ValueError, inst_io.GenerationError) as exc:
            raise BadInput(str(exc)) from exc
    methods = [m for m in args.methods.split(",") if m]
    cfg = BenchConfig(
        instances=insts,
        methods=methods,
        levels=args.levels,
        alloc=args.alloc,
        timeout_scale=args.timeout_scale,
        lam=args.lam,
        prune_quantile=args.prune_quantile,
        workers=args.workers,
    )
    try:
        records = run_benchmark(cfg)
    except ValueError as exc:
        raise BadInput(str(exc)) from exc
    text = write_csv(records, timing=not args.no_timing)
    _emit(text, args.out)
    if args.report:
        Path(args.report).write_text(format_report(aggregate(records)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rbmapf", description="Risk-bounded multi-agent path finding")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, solver=False):
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--timeout-scale", type=float, default=1.0, help="multiplier on the 60*N second timeout")
        if solver:
            p.add_argument("--alloc", choices=("uniform", "utility", "inverse"), default="uniform")
            p.add_argument("--lam", type=float, default=1.0, help="risk weight of the lagrangian baseline")
            p.add_argument("--prune-quantile", type=float, default=0.5, help="edge-risk quantile kept by the pruned baseline")

    g = sub.add_parser("gen", help="generate a synthetic instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--vertices", type=int, default=20)
    g.add_argument("--agents", type=int, default=3)
    g.add_argument("--difficulty", choices=tuple(inst_io.DIFFICULTY), default="medium")
    g.add_argument("--radius", type=float, default=0.02)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("calibrate", help="print the feasible risk interval of an instance")
    c.add_argument("instance")
    common(c)
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("solve", help="solve one instance at one risk bound")
    s.add_argument("instance")
    common(s, solver=True)
    s.add_argument("--method", choices=METHODS, default="rbcbs")
    grp = s.add_mutually_exclusive_group()
    grp.add_argument("--risk-level", type=_level, default=1.0, help="fraction of the calibrated interval")
    grp.add_argument("--delta", type=float, help="absolute global risk bound (skips calibration)")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run the benchmark protocol and write CSV")
    b.add_argument("instances", nargs="*", help="instance files (default: generated family)")
    common(b, solver=True)
    b.add_argument("--methods", default=",".join(METHODS))
    b.add_argument("--risk-level", dest="levels", type=_level, action="append",
                   help="repeatable; default 0,25,50,75,100%%")
    b.add_argument("--seed", dest="seeds", default="0-49", help="seed list, e.g. 0-49 or 1,4,7")
    b.add_argument("--sizes", default="5,10,20,40")
    b.add_argument("--agent-counts", default="2,3,4,5,6")
    b.add_argument("--difficulty", choices=tuple(inst_io.DIFFICULTY), default="medium")
    b.add_argument("--radius", type=float, default=0.02)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--report", help="write the aggregate table here")
    b.add_argument("--no-timing", action="store_true", help="leave wall_ms empty (reproducible output)")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_BAD_INPUT if exc.code else EXIT_OK
    if getattr(args, "levels", "unset") is None:
        args.levels = list(LEVELS)
    try:
        return args.func(args)
    except BadInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
