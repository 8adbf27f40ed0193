"""Risk-interval calibration and the batch benchmark harness.

Each instance is solved twice with plain CBS, once minimising total length
and once minimising total risk. The two total risks bracket the interesting
range of global bounds, and trials are run at fixed fractions of it.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .baselines import BASELINES, solve_baseline
from .cbs import ConstraintTreeSearch, NoSolution, SolveTimeout, solve
from .graph import SolveRequest, default_timeout
from .instances import Instance, difficulty_instance
from .lowlevel import INF, default_horizon, min_risk_path, rba_star

LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)
METHODS = ("rbcbs",) + BASELINES
CSV_COLUMNS = ("instance", "method", "level", "success", "total_risk", "avg_steps", "wall_ms", "ct_nodes", "reallocs")


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RiskInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.upper + 1e-9:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")


def delta_at(interval: RiskInterval, p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    if p == 0.0:
        return interval.lower
    if p == 1.0:
        return interval.upper
    return interval.lower + p * (interval.upper - interval.lower)


def calibration_horizon(inst: Instance) -> int:
    """Makespan cap for the least-risk CBS.

    Waiting costs no risk, so without a fixed cap a chain of one-step delays
    keeps total risk constant while the horizon grows with each constraint,
    and a best-first search on risk would never leave that plateau.
    """
    return (len(inst.tasks) + 1) * inst.graph.n


def _cbs(inst: Instance, objective: str, timeout: float, clock):
    graph = inst.graph
    search: ConstraintTreeSearch

    if objective == "length":
        def plan(i, table, budget):
            return rba_star(graph, search.tasks[i], table, INF, hint=search.hint(i))
    else:
        cap = calibration_horizon(inst)

        def plan(i, table, budget):
            horizon = min(default_horizon(graph, table), cap)
            return min_risk_path(graph, search.tasks[i], table, horizon, hint=search.hint(i))

    search = ConstraintTreeSearch(
        graph,
        inst.tasks,
        inst.radius,
        INF,
        lambda paths: [INF] * len(paths),
        plan,
        reallocate=False,
        budget_aware=False,
        objective=objective,
        timeout=timeout,
        clock=clock,
    )
    return search.run()


def risk_upper_bound(inst: Instance, *, timeout_scale: float = 1.0, clock=time.monotonic) -> float:
    """Total risk of the shortest (sum-of-costs optimal) conflict-free plan."""
    try:
        return _cbs(inst, "length", default_timeout(len(inst.tasks), timeout_scale), clock).total_risk
    except (NoSolution, SolveTimeout) as exc:
        raise CalibrationError(f"{inst.name}: {exc}") from exc


def risk_lower_bound(inst: Instance, *, timeout_scale: float = 1.0, clock=time.monotonic) -> float:
    """Total risk of the least-risk conflict-free plan (within the calibration horizon)."""
    try:
        return _cbs(inst, "risk", default_timeout(len(inst.tasks), timeout_scale), clock).total_risk
    except (NoSolution, SolveTimeout) as exc:
        raise CalibrationError(f"{inst.name}: {exc}") from exc


def calibrate_interval(inst: Instance, *, timeout_scale: float = 1.0, clock=time.monotonic) -> RiskInterval:
    """Total risk of the least-risk and of the shortest conflict-free plans."""
    upper = risk_upper_bound(inst, timeout_scale=timeout_scale, clock=clock)
    lower = risk_lower_bound(inst, timeout_scale=timeout_scale, clock=clock)
    # the least-risk plan can never be riskier than the shortest one
    return RiskInterval(min(lower, upper), upper)


@dataclass
class TrialRecord:
    instance: str
    method: str
    level: float
    delta: float
    success: bool
    total_risk: float = math.nan
    avg_steps: float = math.nan
    wall_ms: float = math.nan
    ct_nodes: int = 0
    reallocs: int = 0
    status: str = "ok"  # ok | no_solution | timeout | uncalibratable


@dataclass
class BenchConfig:
    instances: list[Instance] = field(default_factory=list)
    methods: Sequence[str] = METHODS
    levels: Sequence[float] = LEVELS
    alloc: str = "uniform"
    timeout_scale: float = 1.0
    lam: float = 1.0
    prune_quantile: float = 0.5
    workers: int = 1


def default_instances(
    seeds: Sequence[int] = range(50),
    sizes: Sequence[int] = (5, 10, 20, 40),
    agents: Sequence[int] = (2, 3, 4, 5, 6),
    difficulty: str = "medium",
    radius: float = 0.02,
) -> list[Instance]:
    """Desk-scale family: seed s picks sizes[s % len] and agents[s % len]."""
    out = []
    for s in seeds:
        n = sizes[s % len(sizes)]
        k = min(agents[s % len(agents)], n)
        out.append(difficulty_instance(s, n, k, difficulty, radius=radius))
    return out


def run_trial(inst: Instance, method: str, level: float, delta: float, cfg: BenchConfig) -> TrialRecord:
    req = SolveRequest(
        inst.graph,
        inst.tasks,
        delta,
        inst.radius,
        timeout=default_timeout(len(inst.tasks), cfg.timeout_scale),
        allocation_strategy=cfg.alloc,
    )
    rec = TrialRecord(inst.name, method, level, delta, False)
    t0 = time.perf_counter()
    try:
        if method == "rbcbs":
            sol = solve(req)
        else:
            sol = solve_baseline(req, method, lam=cfg.lam, quantile=cfg.prune_quantile)
    except SolveTimeout as exc:
        rec.status = "timeout"
        stats = exc.stats
    except NoSolution as exc:
        rec.status = "no_solution"
        stats = exc.stats
    else:
        rec.success = True
        rec.total_risk = sol.total_risk
        rec.avg_steps = sol.avg_steps
        stats = sol.stats
    rec.wall_ms = (time.perf_counter() - t0) * 1000.0
    if stats is not None:
        rec.ct_nodes = stats.ct_expanded
        rec.reallocs = stats.reallocations
    return rec


def _calibrate_job(args):
    inst, scale = args
    try:
        return calibrate_interval(inst, timeout_scale=scale)
    except CalibrationError:
        return None


def _trial_job(args):
    return run_trial(*args)


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_benchmark(cfg: BenchConfig) -> list[TrialRecord]:
    """All (instance, method, level) trials, in that nesting order.

    Calibration runs first for every instance; an instance that cannot be
    calibrated yields failed records with status "uncalibratable".
    """
    for m in cfg.methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    if not cfg.methods or not cfg.instances:
        return []
    intervals = _map(_calibrate_job, [(inst, cfg.timeout_scale) for inst in cfg.instances], cfg.workers)
    jobs = []
    records: list[TrialRecord | None] = []
    for inst, interval in zip(cfg.instances, intervals):
        for m in cfg.methods:
            for p in cfg.levels:
                if interval is None:
                    records.append(TrialRecord(inst.name, m, p, math.nan, False, status="uncalibratable"))
                else:
                    records.append(None)
                    jobs.append((inst, m, p, delta_at(interval, p), cfg))
    done = iter(_map(_trial_job, jobs, cfg.workers))
    return [r if r is not None else next(done) for r in records]


# --- output ----------------------------------------------------------------


def _num(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_csv(records: Sequence[TrialRecord], out=None, *, timing: bool = True) -> str:
    """CSV with the fixed column set; returns the text and writes it to ``out`` if given.

    ``timing=False`` leaves wall_ms empty so that repeated runs compare equal.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([
            r.instance,
            r.method,
            int(round(r.level * 100)),
            int(r.success),
            _num(r.total_risk) if r.success else "",
            _num(r.avg_steps) if r.success else "",
            f"{r.wall_ms:.3f}" if timing and not math.isnan(r.wall_ms) else "",
            r.ct_nodes,
            r.reallocs,
        ])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


@dataclass
class Aggregate:
    method: str
    level: float
    trials: int
    successes: int
    cost_mean: float
    cost_std: float
    steps_mean: float
    steps_std: float

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


def _mean_std(xs: list[float]) -> tuple[float, float]:
    if not xs:
        return math.nan, math.nan
    return statistics.fmean(xs), (statistics.stdev(xs) if len(xs) > 1 else 0.0)


def aggregate(records: Sequence[TrialRecord]) -> list[Aggregate]:
    """Per (method, level): success rate and mean/std over successful trials."""
    groups: dict[tuple[str, float], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.method, r.level), []).append(r)
    out = []
    for (m, p), rs in groups.items():
        ok = [r for r in rs if r.success]
        cm, cs = _mean_std([r.total_risk for r in ok])
        sm, ss = _mean_std([r.avg_steps for r in ok])
        out.append(Aggregate(m, p, len(rs), len(ok), cm, cs, sm, ss))
    return out


def format_report(aggs: Sequence[Aggregate]) -> str:
    """Table of "cost ± std (success%) / steps ± std" per method and level."""
    if not aggs:
        return ""
    levels = sorted({a.level for a in aggs})
    methods = list(dict.fromkeys(a.method for a in aggs))
    cell = {(a.method, a.level): a for a in aggs}
    header = ["method"] + [f"{int(round(p * 100))}%" for p in levels]
    rows = [header]
    for m in methods:
        row = [m]
        for p in levels:
            a = cell.get((m, p))
            if a is None:
                row.append("")
            elif a.successes == 0:
                row.append(f"- ({a.success_rate:.0%})")
            else:
                row.append(
                    f"{a.cost_mean:.3f}±{a.cost_std:.3f} ({a.success_rate:.0%}) / {a.steps_mean:.2f}±{a.steps_std:.2f}"
                )
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"
