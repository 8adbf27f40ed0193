"""Single-agent planning in the time-expanded graph.

All planners here search states (vertex, timestep) carrying the accumulated
risk of the partial path. Per state only the best label is kept (lowest risk,
then lexicographically smallest vertex sequence). Once past the last
constrained timestep the future no longer depends on time, so a label is also
dominated by an earlier, no-riskier label at the same vertex.

``rba_star`` minimises arrival time under a risk budget; ``min_risk_path``
minimises risk (arrival time as tie-break); ``scalarized_path`` minimises
arrival time + lambda * risk.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .graph import AgentTask, TimedPath, WaypointGraph

INF = math.inf


@dataclass(frozen=True, order=True)
class Constraint:
    """Spatio-temporal restriction on one agent.

    ``kind == "vertex"``: ``loc == (v,)``, the agent is at ``v`` at time ``t``.
    ``kind == "edge"``: ``loc == (u, v)``, the agent moves u -> v during step
    ``t`` (times t..t+1); ``u == v`` denotes waiting at ``u``.
    Negative constraints forbid the event, positive ones mandate it.
    """

    agent: int
    kind: str
    loc: tuple[int, ...]
    t: int
    positive: bool = False

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("constraint timestep must be >= 0")
        if self.kind == "vertex":
            if len(self.loc) != 1:
                raise ValueError("vertex constraint needs loc=(v,)")
        elif self.kind == "edge":
            if len(self.loc) != 2:
                raise ValueError("edge constraint needs loc=(u, v)")
        else:
            raise ValueError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def vertex(cls, agent: int, v: int, t: int, positive: bool = False) -> "Constraint":
        return cls(agent, "vertex", (v,), t, positive)

    @classmethod
    def edge(cls, agent: int, u: int, v: int, t: int, positive: bool = False) -> "Constraint":
        return cls(agent, "edge", (u, v), t, positive)

    @property
    def end_time(self) -> int:
        return self.t + 1 if self.kind == "edge" else self.t

    def negated(self) -> "Constraint":
        return Constraint(self.agent, self.kind, self.loc, self.t, not self.positive)

    def satisfied_by(self, path: TimedPath) -> bool:
        if self.kind == "vertex":
            hit = path.at(self.t) == self.loc[0]
        else:
            hit = path.motion(self.t) == self.loc
        return hit if self.positive else not hit


class ConstraintTable:
    """Constraints of a single agent indexed for the search."""

    def __init__(self, constraints: Iterable[Constraint] = ()):
        self.neg_vertex: set[tuple[int, int]] = set()
        self.neg_move: set[tuple[int, int, int]] = set()
        self.pos_vertex: dict[int, int] = {}
        self.pos_move: dict[int, tuple[int, int]] = {}
        self.constraints: list[Constraint] = []
        self.infeasible = False
        last = -1
        for c in constraints:
            self.constraints.append(c)
            last = max(last, c.end_time)
            if c.kind == "vertex":
                (v,) = c.loc
                if c.positive:
                    if self.pos_vertex.setdefault(c.t, v) != v:
                        self.infeasible = True
                else:
                    self.neg_vertex.add((v, c.t))
            else:
                u, v = c.loc
                if c.positive:
                    if self.pos_move.setdefault(c.t, (u, v)) != (u, v):
                        self.infeasible = True
                else:
                    self.neg_move.add((u, v, c.t))
        self.last_time = last
        # mandatory (time, vertex) waypoints, sorted, for reachability pruning
        marks = [(t, v) for t, v in self.pos_vertex.items()]
        for t, (u, v) in self.pos_move.items():
            marks.append((t, u))
            marks.append((t + 1, v))
        marks.sort()
        self.marks = marks
        self.mark_times = [t for t, _ in marks]
        for (t, v) in marks:
            if (v, t) in self.neg_vertex:
                self.infeasible = True

    @property
    def t_free(self) -> int:
        """First timestep from which no constraint applies."""
        return self.last_time + 1

    def state_ok(self, v: int, t: int) -> bool:
        if (v, t) in self.neg_vertex:
            return False
        pv = self.pos_vertex.get(t)
        if pv is not None and pv != v:
            return False
        pm = self.pos_move.get(t)
        if pm is not None and pm[0] != v:
            return False
        return True

    def move_ok(self, u: int, v: int, t: int) -> bool:
        if (u, v, t) in self.neg_move:
            return False
        pm = self.pos_move.get(t)
        if pm is not None and pm != (u, v):
            return False
        return True

    def park_min(self, goal: int) -> int:
        """Earliest arrival time from which the agent can stay at ``goal`` forever."""
        need = 0
        for (v, t) in self.neg_vertex:
            if v == goal:
                need = max(need, t + 1)
        for (u, v, t) in self.neg_move:
            if u == v == goal:
                need = max(need, t + 1)
        for t, v in self.pos_vertex.items():
            if v != goal:
                need = max(need, t + 1)
        for t, (u, v) in self.pos_move.items():
            if not (u == v == goal):
                need = max(need, t + 1)
        return need

    def marks_reachable(self, v: int, t: int, hops_to: Callable[[int], list[float]]) -> bool:
        k = bisect_left(self.mark_times, t)
        for tm, x in self.marks[k:]:
            if hops_to(x)[v] > tm - t:
                return False
        return True

    def admits(self, path: TimedPath) -> bool:
        return all(c.satisfied_by(path) for c in self.constraints)


def as_table(constraints, agent: int | None = None) -> ConstraintTable:
    if isinstance(constraints, ConstraintTable):
        return constraints
    if constraints is None:
        return ConstraintTable()
    if agent is not None:
        constraints = [c for c in constraints if c.agent == agent]
    return ConstraintTable(constraints)


# --- heuristic reuse --------------------------------------------------------


@dataclass
class SearchHint:
    """Constraint-independent lower bounds toward a goal, reusable across searches."""

    goal: int
    hops: list[float]
    risk: list[float]
    landmarks: dict[int, list[float]] = field(default_factory=dict)


@dataclass
class SearchRecord:
    """Bookkeeping filled in by a search; feed it to :func:`warm_start`."""

    goal: int | None = None
    hint: SearchHint | None = None
    expanded: int = 0
    horizon_exhausted: bool = False
    horizon: int | None = None


def _min_risk_to(graph: WaypointGraph, goal: int, record: SearchRecord | None) -> list[float]:
    dist = [INF] * graph.n
    dist[goal] = 0.0
    heap = [(0.0, goal)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        if record is not None:
            record.expanded += 1
        for u, r in graph.pred[v]:
            nd = d + r
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def build_hint(graph: WaypointGraph, goal: int, record: SearchRecord | None = None) -> SearchHint:
    hops = graph.hops_to(goal)
    if record is not None:
        record.expanded += sum(1 for h in hops if h < INF)
    return SearchHint(goal, hops, _min_risk_to(graph, goal, record))


def warm_start(previous: SearchRecord | None, new_constraints: Iterable[Constraint] = ()) -> SearchHint | None:
    """Seed for a follow-up search of the same agent.

    The hint holds only constraint-independent bounds, so it never changes
    which path a search returns; it only skips recomputing them. Landmark
    tables for the new constraints' mandatory vertices are kept if present.
    """
    if previous is None or previous.hint is None:
        return None
    return previous.hint


def _landmark(graph: WaypointGraph, hint: SearchHint, record: SearchRecord | None):
    def hops_to(x: int) -> list[float]:
        table = hint.landmarks.get(x)
        if table is None:
            table = graph.hops_to(x)
            hint.landmarks[x] = table
            if record is not None:
                record.expanded += graph.n
        return table

    return hops_to


def default_horizon(graph: WaypointGraph, table: ConstraintTable) -> int:
    return max(table.last_time, 0) + 2 * graph.n


# --- core search ------------------------------------------------------------


def _prefix(label) -> list[int]:
    seq = []
    while label is not None:
        seq.append(label[0])
        label = label[3]
    seq.reverse()
    return seq


def _lex_less(a, b) -> bool:
    """Vertex-sequence order of two labels of equal depth.

    Walks both parent chains in lockstep until they merge; the last
    difference seen on the way back is the earliest one in the sequences.
    """
    diff = None
    while a is not b:
        if a[0] != b[0]:
            diff = (a[0], b[0])
        a, b = a[3], b[3]
    return diff is not None and diff[0] < diff[1]


def _to_path(label, agent_id: int) -> TimedPath:
    return TimedPath(agent_id, tuple(_prefix(label)))


def _search(
    graph: WaypointGraph,
    task: AgentTask,
    table: ConstraintTable,
    horizon: int,
    key: Callable[[int, int, float], tuple],
    budget: float,
    hint: SearchHint,
    record: SearchRecord | None,
    prune: bool,
):
    """Best-first label search; returns the goal label (v, t, risk, parent) or None.

    ``key(v, t, risk)`` must be monotone along every move so that a state's
    predecessors are always settled before the state itself.
    """
    if table.infeasible:
        return None
    goal = task.goal
    hops = hint.hops
    hrisk = hint.risk
    hops_to = _landmark(graph, hint, record)
    park = table.park_min(goal)
    t_free = table.t_free
    moves = graph.moves
    # heuristic pruning only; the final budget test below is exact
    slack = budget + 1e-9 * (1.0 + budget) if budget < INF else INF
    have_marks = bool(table.marks)

    start = task.start
    if hops[start] > horizon or not table.state_ok(start, 0) or hrisk[start] > slack:
        if record is not None and hops[start] < INF and hops[start] > horizon:
            record.horizon_exhausted = True
        return None
    if have_marks and not table.marks_reachable(start, 0, hops_to):
        return None

    root = (start, 0, 0.0, None)
    best: dict[tuple[int, int], tuple] = {(start, 0): root}
    closed: set[tuple[int, int]] = set()
    settled_late: dict[int, list[tuple[int, float]]] = {}
    seq = 0
    heap = [(key(start, 0, 0.0), seq, root)]
    expanded = 0
    horizon_hit = False

    while heap:
        _, _, label = heapq.heappop(heap)
        v, t, r, _ = label
        if prune:
            st = (v, t)
            if st in closed or best.get(st) is not label:
                continue
            closed.add(st)
            if t >= t_free:
                late = settled_late.setdefault(v, [])
                if any(t2 <= t and r2 <= r for t2, r2 in late):
                    continue
                late.append((t, r))
        expanded += 1
        if v == goal and t >= park and r <= budget:
            if record is not None:
                record.expanded += expanded
            return label
        if t >= horizon:
            horizon_hit = True
            continue
        nt = t + 1
        for w, wr in moves[v]:
            if not table.move_ok(v, w, t):
                continue
            if nt + hops[w] > horizon:
                if hops[w] < INF:
                    horizon_hit = True
                continue
            nr = r + wr
            if nr + hrisk[w] > slack:
                continue
            if not table.state_ok(w, nt):
                continue
            if have_marks and not table.marks_reachable(w, nt, hops_to):
                continue
            new = (w, nt, nr, label)
            if prune:
                st = (w, nt)
                if st in closed:
                    continue
                old = best.get(st)
                if old is not None:
                    if old[2] < nr or (old[2] == nr and not _lex_less(new, old)):
                        continue
                best[st] = new
            seq += 1
            heapq.heappush(heap, (key(w, nt, nr), seq, new))

    if record is not None:
        record.expanded += expanded
        record.horizon_exhausted = horizon_hit
    return None


def _prepare(graph, task, constraints, horizon, hint, record):
    table = as_table(constraints, task.agent_id)
    if horizon is None:
        horizon = default_horizon(graph, table)
    if hint is None or hint.goal != task.goal:
        hint = build_hint(graph, task.goal, record)
    if record is not None:
        record.goal = task.goal
        record.hint = hint
        record.horizon = horizon
        record.horizon_exhausted = False
    return table, horizon, hint


def rba_star(
    graph: WaypointGraph,
    task: AgentTask,
    constraints=None,
    delta_i: float = INF,
    horizon: int | None = None,
    *,
    hint: SearchHint | None = None,
    record: SearchRecord | None = None,
    prune: bool = True,
) -> TimedPath | None:
    """Earliest-arrival path with accumulated risk at most ``delta_i``.

    ``constraints`` may be a ConstraintTable or an iterable of Constraint
    (entries for other agents are ignored). Ties on arrival time go to lower
    risk, then to the lexicographically smaller vertex sequence. Returns None
    when no such path exists within ``horizon``; ``record.horizon_exhausted``
    tells whether the horizon cut the search short.
    """
    if delta_i < 0:
        raise ValueError("risk budget must be >= 0")
    table, horizon, hint = _prepare(graph, task, constraints, horizon, hint, record)
    hops = hint.hops

    def key(v, t, r):
        return (t + hops[v], t, r)

    label = _search(graph, task, table, horizon, key, delta_i, hint, record, prune)
    return None if label is None else _to_path(label, task.agent_id)


def min_risk_path(
    graph: WaypointGraph,
    task: AgentTask,
    constraints=None,
    horizon: int | None = None,
    *,
    hint: SearchHint | None = None,
    record: SearchRecord | None = None,
    prune: bool = True,
) -> TimedPath | None:
    """Least-risk path, earliest arrival among equal risk."""
    table, horizon, hint = _prepare(graph, task, constraints, horizon, hint, record)

    def key(v, t, r):
        return (r, t)

    label = _search(graph, task, table, horizon, key, INF, hint, record, prune)
    return None if label is None else _to_path(label, task.agent_id)


def min_feasible_risk(
    graph: WaypointGraph,
    task: AgentTask,
    constraints=None,
    horizon: int | None = None,
    *,
    hint: SearchHint | None = None,
    record: SearchRecord | None = None,
) -> float | None:
    """Smallest accumulated risk of any constraint-satisfying path, or None."""
    table, horizon, hint = _prepare(graph, task, constraints, horizon, hint, record)

    def key(v, t, r):
        return (r, t)

    label = _search(graph, task, table, horizon, key, INF, hint, record, True)
    return None if label is None else label[2]


def scalarized_path(
    graph: WaypointGraph,
    task: AgentTask,
    constraints=None,
    lam: float = 1.0,
    horizon: int | None = None,
    *,
    hint: SearchHint | None = None,
    record: SearchRecord | None = None,
) -> TimedPath | None:
    """Path minimising arrival time + lam * risk (ties: lower risk, then earlier)."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    table, horizon, hint = _prepare(graph, task, constraints, horizon, hint, record)

    def key(v, t, r):
        return (t + lam * r, r, t)

    label = _search(graph, task, table, horizon, key, INF, hint, record, True)
    return None if label is None else _to_path(label, task.agent_id)
