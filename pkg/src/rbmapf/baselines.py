"""Comparison planners: scalarized, bi-objective and pruned-graph search.

Each has a single-agent form and a multi-agent form that reuses the
constraint-tree conflict layer with fixed per-agent budgets of Delta/N and no
reallocation. A multi-agent run counts as solved only if the conflict-free
plan it ends with also respects the global bound.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cbs import RISK_TOL, ConstraintTreeSearch, NoSolution, Solution
from .graph import AgentTask, SolveRequest, TimedPath, WaypointGraph
from .lowlevel import (
    INF,
    ConstraintTable,
    SearchHint,
    _landmark,
    _lex_less,
    _prepare,
    _to_path,
    build_hint,
    rba_star,
    scalarized_path,
)

BASELINES = ("lagrangian", "pareto", "pruned")


def lagrangian_search(
    graph: WaypointGraph,
    task: AgentTask,
    constraints=None,
    lam: float = 1.0,
    horizon: int | None = None,
    *,
    hint: SearchHint | None = None,
) -> TimedPath | None:
    """Minimise arrival time + lam * risk over the full graph."""
    if not lam >= 0:
        raise ValueError("lam must be >= 0")
    return scalarized_path(graph, task, constraints, lam, horizon, hint=hint)


@dataclass(frozen=True)
class ParetoPoint:
    length: int
    risk: float
    path: TimedPath


def pareto_search(
    graph: WaypointGraph,
    task: AgentTask,
    constraints=None,
    horizon: int | None = None,
    *,
    hint: SearchHint | None = None,
) -> list[ParetoPoint]:
    """All non-dominated (arrival time, risk) outcomes, by increasing length.

    Labels are settled in (time, risk) order, so a goal label joins the front
    exactly when its risk is strictly below every earlier member's.
    """
    table, horizon, hint = _prepare(graph, task, constraints, horizon, hint, None)
    if table.infeasible:
        return []
    goal = task.goal
    hops, hrisk = hint.hops, hint.risk
    hops_to = _landmark(graph, hint, None)
    park = table.park_min(goal)
    t_free = table.t_free
    moves = graph.moves
    start = task.start
    if hops[start] > horizon or not table.state_ok(start, 0):
        return []
    if table.marks and not table.marks_reachable(start, 0, hops_to):
        return []

    front: list[ParetoPoint] = []
    best_goal = INF
    root = (start, 0, 0.0, None)
    best: dict[tuple[int, int], tuple] = {(start, 0): root}
    closed: set[tuple[int, int]] = set()
    late: dict[int, list[tuple[int, float]]] = {}
    seq = 0
    heap = [(0, 0.0, seq, root)]
    while heap:
        _, _, _, label = heapq.heappop(heap)
        v, t, r, _ = label
        st = (v, t)
        if st in closed or best.get(st) is not label:
            continue
        closed.add(st)
        if r >= best_goal:
            continue
        if t >= t_free:
            seen = late.setdefault(v, [])
            if any(t2 <= t and r2 <= r for t2, r2 in seen):
                continue
            seen.append((t, r))
        if v == goal and t >= park:
            front.append(ParetoPoint(t, r, _to_path(label, task.agent_id)))
            best_goal = r
            continue
        if t >= horizon:
            continue
        nt = t + 1
        for w, wr in moves[v]:
            if not table.move_ok(v, w, t) or nt + hops[w] > horizon:
                continue
            nr = r + wr
            # a later arrival only helps if it is strictly safer
            if nr + hrisk[w] > best_goal + 1e-9 * (1.0 + best_goal):
                continue
            if not table.state_ok(w, nt):
                continue
            if table.marks and not table.marks_reachable(w, nt, hops_to):
                continue
            new = (w, nt, nr, label)
            ns = (w, nt)
            if ns in closed:
                continue
            old = best.get(ns)
            if old is not None and (old[2] < nr or (old[2] == nr and not _lex_less(new, old))):
                continue
            best[ns] = new
            seq += 1
            heapq.heappush(heap, (nt, nr, seq, new))
    return front


def select_under_budget(front: list[ParetoPoint], budget: float) -> ParetoPoint | None:
    """Shortest front member whose risk is within ``budget``."""
    for point in sorted(front, key=lambda p: (p.length, p.risk)):
        if point.risk <= budget:
            return point
    return None


def prune_graph(graph: WaypointGraph, threshold: float) -> WaypointGraph:
    """Subgraph keeping only edges with risk at most ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    edges = [e for e in graph.edge_list() if e[3] <= threshold]
    return WaypointGraph(graph.n, edges, graph.pair_dist, graph.max_dist, coords=graph.coords)


def risk_quantile_threshold(graph: WaypointGraph, q: float = 0.5) -> float:
    risks = list(graph.risk_w.values())
    if not risks:
        return 0.0
    return float(np.quantile(risks, q))


def pruned_graph_search(
    graph: WaypointGraph,
    task: AgentTask,
    constraints=None,
    edge_risk_threshold: float = INF,
    horizon: int | None = None,
) -> TimedPath | None:
    """Earliest-arrival path using only edges with risk <= threshold."""
    sub = graph if edge_risk_threshold == INF else prune_graph(graph, edge_risk_threshold)
    return rba_star(sub, task, constraints, INF, horizon)


# --- multi-agent wrappers ---------------------------------------------------


def _run_fixed_budget(
    request: SolveRequest,
    make_plan: Callable[[ConstraintTreeSearch], Callable[[int, ConstraintTable, float], TimedPath | None]],
    budget_aware: bool,
    clock: Callable[[], float],
) -> Solution:
    n = len(request.tasks)
    share = request.delta_global / n
    planner: list = []
    search = ConstraintTreeSearch(
        request.graph,
        request.tasks,
        request.agent_radius,
        INF,  # stop at the first conflict-free node; the bound is checked below
        lambda paths: [share] * n,
        lambda i, table, budget: planner[0](i, table, budget),
        reallocate=False,
        budget_aware=budget_aware,
        timeout=request.timeout,
        clock=clock,
    )
    planner.append(make_plan(search))
    sol = search.run()
    if sol.total_risk > request.delta_global + RISK_TOL:
        raise NoSolution(
            f"conflict-free plan has total risk {sol.total_risk:.6g} > {request.delta_global:.6g}",
            sol.stats,
        )
    return sol


def solve_lagrangian(request: SolveRequest, lam: float = 1.0, *, clock=time.monotonic) -> Solution:
    graph = request.graph

    def make_plan(search):
        def plan(i, table, budget):
            return scalarized_path(graph, search.tasks[i], table, lam, hint=search.hint(i))
        return plan

    return _run_fixed_budget(request, make_plan, False, clock)


def solve_pareto(request: SolveRequest, *, clock=time.monotonic) -> Solution:
    graph = request.graph

    def make_plan(search):
        def plan(i, table, budget):
            point = select_under_budget(pareto_search(graph, search.tasks[i], table, hint=search.hint(i)), budget)
            return None if point is None else point.path
        return plan

    return _run_fixed_budget(request, make_plan, True, clock)


def solve_pruned(
    request: SolveRequest,
    threshold: float | None = None,
    quantile: float = 0.5,
    *,
    clock=time.monotonic,
) -> Solution:
    if threshold is None:
        threshold = risk_quantile_threshold(request.graph, quantile)
    sub = prune_graph(request.graph, threshold)

    def make_plan(search):
        hints: dict[int, SearchHint] = {}

        def plan(i, table, budget):
            task = search.tasks[i]
            if task.goal not in hints:
                hints[task.goal] = build_hint(sub, task.goal)
            return rba_star(sub, task, table, INF, hint=hints[task.goal])
        return plan

    return _run_fixed_budget(request, make_plan, False, clock)


def solve_baseline(request: SolveRequest, method: str, *, lam: float = 1.0, quantile: float = 0.5, clock=time.monotonic) -> Solution:
    if method == "lagrangian":
        return solve_lagrangian(request, lam, clock=clock)
    if method == "pareto":
        return solve_pareto(request, clock=clock)
    if method == "pruned":
        return solve_pruned(request, quantile=quantile, clock=clock)
    raise ValueError(f"unknown baseline {method!r}; expected one of {BASELINES}")
