"""Risk-bounded conflict-based search.

The high level explores a constraint tree whose nodes carry, besides the
constraints and paths of plain CBS, a per-agent risk budget vector and a flag
per agent telling whether its current path is valid under both. Agents whose
replanning fails borrow budget from agents with surplus (``reallocate_risk``).

The same tree search, with reallocation switched off and a different
single-agent planner, backs the baselines and the risk-interval calibration.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .collision import Conflict, KernelDiagnostics, conflicting_motions, detect_collisions
from .graph import AgentTask, SolveRequest, TimedPath, WaypointGraph, normalize_strategy, path_risk, sum_of_costs
from .lowlevel import INF, Constraint, ConstraintTable, SearchHint, build_hint, min_feasible_risk, rba_star

RISK_TOL = 1e-9
UTILITY_FLOOR = 1e-6
REALLOC_TOL = 1e-12


class InvalidUtilityError(ValueError):
    pass


class SolveError(Exception):
    def __init__(self, message: str, stats: "SolveStats | None" = None):
        super().__init__(message)
        self.stats = stats


class NoSolution(SolveError):
    """The constraint tree was exhausted."""


class SolveTimeout(SolveError):
    """The wall-clock budget ran out between node expansions."""


@dataclass
class SolveStats:
    ct_expanded: int = 0
    ct_generated: int = 0
    reallocations: int = 0
    reallocation_failures: int = 0
    low_level_calls: int = 0
    wall_time: float = 0.0
    kernel: KernelDiagnostics = field(default_factory=KernelDiagnostics)


@dataclass
class Solution:
    paths: list[TimedPath]
    risks: list[float]
    total_risk: float
    cost: int
    budgets: list[float]
    stats: SolveStats

    @property
    def avg_steps(self) -> float:
        return self.cost / len(self.paths)


# --- budgets ---------------------------------------------------------------


def initial_allocation(strategy: str, delta: float, utilities: Sequence[float] | None = None, n: int | None = None) -> list[float]:
    """Split the global bound over agents; the entries sum to ``delta``.

    uniform: equal shares. utility: shares proportional to ``utilities``.
    inverse_utility: shares proportional to their reciprocals.
    """
    strategy = normalize_strategy(strategy)
    if n is None:
        if utilities is None:
            raise ValueError("need n or utilities")
        n = len(utilities)
    if n < 1:
        raise ValueError("need at least one agent")
    if strategy == "uniform":
        weights = [1.0] * n
    else:
        if utilities is None or len(utilities) != n:
            raise InvalidUtilityError(f"{strategy} allocation needs {n} utilities")
        if any(not (u > 0) or not math.isfinite(u) for u in utilities):
            raise InvalidUtilityError(f"utilities must be positive and finite, got {list(utilities)}")
        weights = list(utilities) if strategy == "utility" else [1.0 / u for u in utilities]
    total = sum(weights)
    shares = [delta * w / total for w in weights[:-1]]
    shares.append(max(0.0, delta - sum(shares)))
    return shares


def reallocate_budgets(
    budgets: Sequence[float],
    min_risks: Sequence[float],
    failing: Iterable[int],
    rel_tol: float = REALLOC_TOL,
) -> list[float] | None:
    """Budget transfer toward failing agents; None when the surplus is too small.

    Failing agents get exactly their minimum feasible risk. Passing agents, in
    index order, give up surplus until the requirement is covered. The
    comparison of required against available surplus allows ``rel_tol``
    times the budget scale, so that a global bound equal to the sum of the
    minima is not rejected over a rounding error.
    """
    failing = set(failing)
    n = len(budgets)
    required = sum(min_risks[i] - budgets[i] for i in sorted(failing))
    passing = [j for j in range(n) if j not in failing]
    available = sum(budgets[j] - min_risks[j] for j in passing)
    scale = max(1.0, sum(abs(b) for b in budgets), sum(abs(m) for m in min_risks))
    if required > available + rel_tol * scale:
        return None
    new = list(budgets)
    for i in failing:
        new[i] = min_risks[i]
    remaining = required
    for j in passing:
        if remaining <= 0:
            break
        surplus = budgets[j] - min_risks[j]
        if surplus <= remaining:
            new[j] = min_risks[j]
            remaining -= surplus
        else:
            new[j] = max(min_risks[j], budgets[j] - remaining)
            remaining = 0.0
    return new


# --- constraint tree -------------------------------------------------------


@dataclass
class CTNode:
    constraints: tuple[frozenset, ...]  # per agent index
    paths: list[TimedPath]
    budgets: list[float]
    satisfied: list[bool]
    cost: int = 0
    changed_count: int = 0
    conflicts: list[Conflict] | None = None
    node_id: int = 0
    parent_id: int | None = None

    @property
    def all_constraints(self) -> frozenset:
        return frozenset().union(*self.constraints)

    @property
    def n_conflicts(self) -> int:
        return len(self.conflicts) if self.conflicts is not None else 0


class Frontier:
    """Priority queue of CT nodes; equal keys come out in insertion order."""

    def __init__(self):
        self._heap: list = []
        self._counter = itertools.count()

    def push(self, node, key: tuple) -> None:
        heapq.heappush(self._heap, (key, next(self._counter), node))

    def pop(self):
        return heapq.heappop(self._heap)[2]

    def peek_key(self) -> tuple:
        return self._heap[0][0]

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)


def disjoint_split(
    node: CTNode,
    conflict: Conflict,
    agent_ids: Sequence[int],
    graph: WaypointGraph,
    radius: float,
    motion_cache: dict | None = None,
) -> tuple[list[Constraint], list[Constraint]]:
    """New constraints for the (positive, negative) children of ``node``.

    The lower-id agent k is constrained. Positive child: k must perform its
    conflicting event, and every other agent is forbidden from events that
    collide with it. Negative child: k is forbidden the event.
    """
    k = conflict.agents[0]
    seg = conflict.segments[0]
    others = [a for a in agent_ids if a != k]
    if conflict.kind == "vertex":
        v, t = conflict.vertex, conflict.time
        pos = Constraint.vertex(k, v, t, positive=True)
        implied = [Constraint.vertex(a, v, t) for a in others]
    else:
        motion, t = (seg.p0, seg.p1), conflict.t
        pos = Constraint.edge(k, motion[0], motion[1], t, positive=True)
        if motion_cache is not None and motion in motion_cache:
            blocked = motion_cache[motion]
        else:
            blocked = conflicting_motions(graph, motion, radius)
            if motion_cache is not None:
                motion_cache[motion] = blocked
        implied = [Constraint.edge(a, x, y, t) for a in others for (x, y) in blocked]
    return [pos] + implied, [pos.negated()]


class ConstraintTreeSearch:
    """Best-first constraint-tree search.

    ``plan(i, table, budget)`` returns a path for agent index ``i`` or None.
    With ``reallocate`` the failing agents trigger budget reallocation;
    otherwise the node is pruned. ``objective`` "length" orders nodes by
    (sum of costs, collisions, changed budgets), "risk" by total risk first.
    """

    def __init__(
        self,
        graph: WaypointGraph,
        tasks: Sequence[AgentTask],
        radius: float,
        delta: float,
        budgets: Callable[[list[TimedPath]], list[float]],
        plan: Callable[[int, ConstraintTable, float], TimedPath | None],
        *,
        root_plan: Callable[[int], TimedPath | None] | None = None,
        reallocate: bool = False,
        budget_aware: bool = True,
        objective: str = "length",
        timeout: float = INF,
        clock: Callable[[], float] = time.monotonic,
        keep_trace: bool = False,
    ):
        self.graph = graph
        self.tasks = sorted(tasks, key=lambda t: t.agent_id)
        self.ids = [t.agent_id for t in self.tasks]
        self.index = {a: i for i, a in enumerate(self.ids)}
        self.radius = radius
        self.delta = delta
        self._budgets = budgets
        self._plan = plan
        self._root_plan = root_plan or (lambda i: plan(i, ConstraintTable(), INF))
        self.reallocate = reallocate
        self.budget_aware = budget_aware
        self.objective = objective
        self.timeout = timeout
        self.clock = clock
        self.stats = SolveStats()
        self.trace: list[CTNode] | None = [] if keep_trace else None
        self._ids = itertools.count()
        self._motion_cache: dict = {}
        self._hints: dict[int, SearchHint] = {}
        self._min_risk_cache: dict = {}

    # -- helpers --

    def hint(self, i: int) -> SearchHint:
        goal = self.tasks[i].goal
        h = self._hints.get(goal)
        if h is None:
            h = self._hints[goal] = build_hint(self.graph, goal)
        return h

    def _call(self, i: int, cons: frozenset, budget: float) -> TimedPath | None:
        self.stats.low_level_calls += 1
        return self._plan(i, ConstraintTable(cons), budget)

    def min_risk(self, i: int, cons: frozenset) -> float | None:
        key = (i, cons)
        if key not in self._min_risk_cache:
            self.stats.low_level_calls += 1
            self._min_risk_cache[key] = min_feasible_risk(
                self.graph, self.tasks[i], ConstraintTable(cons), hint=self.hint(i)
            )
        return self._min_risk_cache[key]

    def _ok(self, i: int, path: TimedPath | None, budget: float) -> bool:
        if path is None:
            return False
        return not self.budget_aware or path_risk(path, self.graph) <= budget

    def _evaluate(self, node: CTNode) -> None:
        node.cost = sum_of_costs(node.paths)
        node.conflicts = detect_collisions(node.paths, self.graph, self.radius, diagnostics=self.stats.kernel)

    def _key(self, node: CTNode) -> tuple:
        if self.objective == "risk":
            risk = sum(path_risk(p, self.graph) for p in node.paths)
            return (risk, node.cost, node.n_conflicts, node.changed_count)
        return (node.cost, node.n_conflicts, node.changed_count)

    def _push(self, frontier: Frontier, node: CTNode) -> None:
        self.stats.ct_generated += 1
        if self.trace is not None:
            self.trace.append(node)
        frontier.push(node, self._key(node))

    def _new_id(self) -> int:
        return next(self._ids)

    def reallocate_risk(self, node: CTNode, failing: Sequence[int]) -> list[float] | None:
        mins = []
        for i in range(len(self.tasks)):
            m = self.min_risk(i, node.constraints[i])
            if m is None:
                # no path at any risk (failing) or inconsistent node: prune
                return None
            mins.append(m)
        for i in failing:
            if mins[i] <= node.budgets[i]:
                # budget already sufficient yet planning failed: cannot help
                return None
        return reallocate_budgets(node.budgets, mins, failing)

    def _reallocated_child(self, parent: CTNode, node: CTNode, failing: list[int], new_budgets: list[float]) -> CTNode:
        sat = []
        for i, p in enumerate(node.paths):
            if i in failing:
                sat.append(False)
            else:
                sat.append(node.satisfied[i] and self._ok(i, p, new_budgets[i]))
        child = CTNode(
            constraints=node.constraints,
            paths=list(node.paths),
            budgets=new_budgets,
            satisfied=sat,
            changed_count=sum(1 for a, b in zip(parent.budgets, new_budgets) if a != b),
            node_id=self._new_id(),
            parent_id=parent.node_id,
        )
        self._evaluate(child)
        return child

    def _check_clock(self, t0: float) -> None:
        if self.clock() - t0 > self.timeout:
            self.stats.wall_time = self.clock() - t0
            raise SolveTimeout(f"timeout after {self.timeout:.3g}s", self.stats)

    def _solution(self, node: CTNode) -> Solution:
        risks = [path_risk(p, self.graph) for p in node.paths]
        return Solution(
            paths=list(node.paths),
            risks=risks,
            total_risk=sum(risks),
            cost=node.cost,
            budgets=list(node.budgets),
            stats=self.stats,
        )

    # -- main loop --

    def run(self) -> Solution:
        t0 = self.clock()
        n = len(self.tasks)
        paths = []
        for i in range(n):
            self.stats.low_level_calls += 1
            p = self._root_plan(i)
            if p is None:
                self.stats.wall_time = self.clock() - t0
                raise NoSolution(f"agent {self.ids[i]} cannot reach its goal", self.stats)
            paths.append(p)
        budgets = self._budgets(paths)
        root = CTNode(
            constraints=tuple(frozenset() for _ in range(n)),
            paths=paths,
            budgets=budgets,
            satisfied=[self._ok(i, p, budgets[i]) for i, p in enumerate(paths)],
            node_id=self._new_id(),
        )
        self._evaluate(root)
        frontier = Frontier()
        self._push(frontier, root)

        while frontier:
            self._check_clock(t0)
            node = frontier.pop()
            self.stats.ct_expanded += 1

            unsat = [i for i in range(n) if not node.satisfied[i]]
            if unsat:
                node = CTNode(node.constraints, list(node.paths), list(node.budgets), list(node.satisfied),
                              node.cost, node.changed_count, None, node.node_id, node.parent_id)
                failing = []
                for i in unsat:
                    p = self._call(i, node.constraints[i], node.budgets[i])
                    if p is None:
                        failing.append(i)
                    else:
                        node.paths[i] = p
                        node.satisfied[i] = True
                if failing:
                    if self.reallocate:
                        new_budgets = self.reallocate_risk(node, failing)
                        if new_budgets is None:
                            self.stats.reallocation_failures += 1
                        else:
                            self.stats.reallocations += 1
                            self._push(frontier, self._reallocated_child(node, node, failing, new_budgets))
                    continue
                self._evaluate(node)

            if not node.conflicts:
                total = sum(path_risk(p, self.graph) for p in node.paths)
                if total <= self.delta + RISK_TOL:
                    self.stats.wall_time = self.clock() - t0
                    return self._solution(node)
                continue

            conflict = node.conflicts[0]
            for new_cons in disjoint_split(node, conflict, self.ids, self.graph, self.radius, self._motion_cache):
                self._expand_child(frontier, node, new_cons)

        self.stats.wall_time = self.clock() - t0
        raise NoSolution("constraint tree exhausted", self.stats)

    def _expand_child(self, frontier: Frontier, node: CTNode, new_cons: list[Constraint]) -> None:
        cons = list(node.constraints)
        added: dict[int, list[Constraint]] = {}
        for c in new_cons:
            i = self.index[c.agent]
            if c in cons[i]:
                continue
            added.setdefault(i, []).append(c)
        for i, cs in added.items():
            cons[i] = cons[i].union(cs)
        child = CTNode(
            constraints=tuple(cons),
            paths=list(node.paths),
            budgets=list(node.budgets),
            satisfied=list(node.satisfied),
            node_id=self._new_id(),
            parent_id=node.node_id,
        )
        failing = []
        for i, cs in sorted(added.items()):
            if all(c.satisfied_by(node.paths[i]) for c in cs):
                continue
            p = self._call(i, child.constraints[i], child.budgets[i])
            if p is None:
                failing.append(i)
                child.satisfied[i] = False
            else:
                child.paths[i] = p
                child.satisfied[i] = True
        if failing:
            if not self.reallocate:
                return
            new_budgets = self.reallocate_risk(child, failing)
            if new_budgets is None:
                self.stats.reallocation_failures += 1
                return
            self.stats.reallocations += 1
            self._push(frontier, self._reallocated_child(node, child, failing, new_budgets))
            return
        self._evaluate(child)
        self._push(frontier, child)


# --- public entry points ---------------------------------------------------


def root_utilities(strategy: str, paths: Sequence[TimedPath], graph: WaypointGraph) -> list[float] | None:
    strategy = normalize_strategy(strategy)
    if strategy == "utility":
        return [max(path_risk(p, graph), UTILITY_FLOOR) for p in paths]
    if strategy == "inverse_utility":
        return [max(float(p.cost), UTILITY_FLOOR) for p in paths]
    return None


def make_rbcbs(request: SolveRequest, *, clock: Callable[[], float] = time.monotonic, keep_trace: bool = False) -> ConstraintTreeSearch:
    graph = request.graph
    tasks = sorted(request.tasks, key=lambda t: t.agent_id)
    strategy = request.allocation_strategy
    delta = request.delta_global

    search: ConstraintTreeSearch

    def plan(i: int, table: ConstraintTable, budget: float):
        return rba_star(graph, tasks[i], table, budget, hint=search.hint(i))

    def budgets(paths):
        return initial_allocation(strategy, delta, root_utilities(strategy, paths, graph), len(paths))

    search = ConstraintTreeSearch(
        graph,
        tasks,
        request.agent_radius,
        delta,
        budgets,
        plan,
        reallocate=True,
        budget_aware=True,
        timeout=request.timeout,
        clock=clock,
        keep_trace=keep_trace,
    )
    return search


def solve(request: SolveRequest, *, clock: Callable[[], float] = time.monotonic) -> Solution:
    """Collision-free paths with total risk within the global bound.

    Raises NoSolution when the tree is exhausted and SolveTimeout when the
    request's wall-clock budget is spent. Paths are ordered by agent id.
    """
    return make_rbcbs(request, clock=clock).run()
