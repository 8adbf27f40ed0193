"""Dual-weighted waypoint graph, agent tasks, timed paths and risk accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class InvalidPathError(ValueError):
    """A timed path uses a step that is not an edge of the graph."""


class WaypointGraph:
    """Directed graph with a distance weight and a risk weight on every edge.

    Edges whose distance is not strictly below ``max_dist`` are rejected, so
    every stored edge is traversable. ``pair_dist`` is the full vertex-to-vertex
    distance table used by the collision kernel; it need not be Euclidean.

    Instances are treated as immutable once built.
    """

    def __init__(
        self,
        n_vertices: int,
        edges: Iterable[tuple[int, int, float, float]],
        pair_dist,
        max_dist: float,
        coords=None,
    ):
        if n_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        if not (max_dist > 0 and math.isfinite(max_dist)):
            raise ValueError(f"max_dist must be positive and finite, got {max_dist}")
        self.n = int(n_vertices)
        self.max_dist = float(max_dist)

        pd = np.array(pair_dist, dtype=float)
        if pd.shape != (self.n, self.n):
            raise ValueError(f"pair_dist must be {self.n}x{self.n}, got {pd.shape}")
        if not np.all(np.isfinite(pd)) or np.any(pd < 0):
            raise ValueError("pair_dist entries must be finite and non-negative")
        if np.any(np.diag(pd) != 0):
            raise ValueError("pair_dist diagonal must be zero")
        pd.setflags(write=False)
        self.pair_dist = pd
        # row lists are much faster than numpy scalar indexing in the kernel
        self.pd_rows: list[list[float]] = pd.tolist()

        if coords is not None:
            coords = np.array(coords, dtype=float)
            if coords.shape != (self.n, 2):
                raise ValueError(f"coords must be {self.n}x2, got {coords.shape}")
            coords.setflags(write=False)
        self.coords = coords

        dist_w: dict[tuple[int, int], float] = {}
        risk_w: dict[tuple[int, int], float] = {}
        for u, v, d, r in edges:
            u, v, d, r = int(u), int(v), float(d), float(r)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) references unknown vertex")
            if u == v:
                raise ValueError(f"self-loop at {u}; waiting is implicit")
            if not (math.isfinite(d) and d >= 0 and math.isfinite(r) and r >= 0):
                raise ValueError(f"edge ({u}, {v}) weights must be finite and >= 0")
            if d >= self.max_dist:
                raise ValueError(f"edge ({u}, {v}) distance {d} not below max_dist {self.max_dist}")
            if (u, v) in dist_w:
                raise ValueError(f"duplicate edge ({u}, {v})")
            dist_w[(u, v)] = d
            risk_w[(u, v)] = r
        self.dist_w = dist_w
        self.risk_w = risk_w

        succ: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        pred: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for (u, v), r in sorted(risk_w.items()):
            succ[u].append((v, r))
            pred[v].append((u, r))
        self.succ: tuple[tuple[tuple[int, float], ...], ...] = tuple(tuple(s) for s in succ)
        self.pred: tuple[tuple[tuple[int, float], ...], ...] = tuple(tuple(p) for p in pred)
        # successor lists with the zero-risk wait move merged in vertex order
        self.moves: tuple[tuple[tuple[int, float], ...], ...] = tuple(
            tuple(sorted(succ[u] + [(u, 0.0)])) for u in range(self.n)
        )

    @property
    def vertices(self) -> range:
        return range(self.n)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.dist_w)

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.risk_w

    def edge_list(self) -> list[tuple[int, int, float, float]]:
        return [(u, v, self.dist_w[(u, v)], self.risk_w[(u, v)]) for u, v in self.edges]

    def total_risk_weight(self) -> float:
        return sum(self.risk_w.values())

    def hops_to(self, target: int) -> list[float]:
        """Unweighted hop count from every vertex to ``target`` (inf if unreachable)."""
        dist = [math.inf] * self.n
        dist[target] = 0
        frontier = [target]
        while frontier:
            nxt = []
            for v in frontier:
                dv = dist[v] + 1
                for u, _ in self.pred[v]:
                    if dist[u] == math.inf:
                        dist[u] = dv
                        nxt.append(u)
            frontier = nxt
        return dist

    def __eq__(self, other):
        if not isinstance(other, WaypointGraph):
            return NotImplemented
        same_coords = (self.coords is None and other.coords is None) or (
            self.coords is not None
            and other.coords is not None
            and np.array_equal(self.coords, other.coords)
        )
        return (
            self.n == other.n
            and self.max_dist == other.max_dist
            and self.dist_w == other.dist_w
            and self.risk_w == other.risk_w
            and np.array_equal(self.pair_dist, other.pair_dist)
            and same_coords
        )

    def __repr__(self):
        return f"WaypointGraph(n={self.n}, edges={len(self.dist_w)}, max_dist={self.max_dist})"


@dataclass(frozen=True)
class AgentTask:
    agent_id: int
    start: int
    goal: int


@dataclass(frozen=True)
class TimedPath:
    """Vertex occupied at each unit timestep; repeated vertices are waits."""

    agent_id: int
    vertices: tuple[int, ...]

    def __post_init__(self):
        if not self.vertices:
            raise ValueError("a timed path needs at least one vertex")
        object.__setattr__(self, "vertices", tuple(int(v) for v in self.vertices))

    @property
    def cost(self) -> int:
        """Arrival timestep T."""
        return len(self.vertices) - 1

    @property
    def start(self) -> int:
        return self.vertices[0]

    @property
    def goal(self) -> int:
        return self.vertices[-1]

    def at(self, t: int) -> int:
        """Position at time ``t``; the agent stays at its goal after arriving."""
        if t < 0:
            raise ValueError("negative timestep")
        return self.vertices[t] if t < len(self.vertices) else self.vertices[-1]

    def motion(self, t: int) -> tuple[int, int]:
        return self.at(t), self.at(t + 1)

    def __len__(self):
        return len(self.vertices)


def validate_path(path: TimedPath, graph: WaypointGraph, task: AgentTask | None = None) -> None:
    for v in path.vertices:
        if not 0 <= v < graph.n:
            raise InvalidPathError(f"vertex {v} not in graph")
    for t in range(path.cost):
        u, v = path.vertices[t], path.vertices[t + 1]
        if u != v and (u, v) not in graph.risk_w:
            raise InvalidPathError(f"step {t}: ({u}, {v}) is not an edge")
    if task is not None and (path.start != task.start or path.goal != task.goal):
        raise InvalidPathError(
            f"path runs {path.start}->{path.goal}, task is {task.start}->{task.goal}"
        )


def path_risk(path: TimedPath, graph: WaypointGraph) -> float:
    """Accumulated risk of the traversed edges; waits are free.

    Summed left to right so the value matches the search labels bit for bit.
    """
    total = 0.0
    verts = path.vertices
    risk_w = graph.risk_w
    for t in range(len(verts) - 1):
        u, v = verts[t], verts[t + 1]
        if u == v:
            continue
        try:
            total += risk_w[(u, v)]
        except KeyError:
            raise InvalidPathError(f"step {t}: ({u}, {v}) is not an edge") from None
    return total


def sum_of_costs(paths: Sequence[TimedPath]) -> int:
    return sum(p.cost for p in paths)


ALLOCATION_STRATEGIES = ("uniform", "utility", "inverse_utility")
_STRATEGY_ALIASES = {"inverse": "inverse_utility", "inverse-utility": "inverse_utility"}


def normalize_strategy(name: str) -> str:
    name = _STRATEGY_ALIASES.get(name, name)
    if name not in ALLOCATION_STRATEGIES:
        raise ValueError(f"unknown allocation strategy {name!r}")
    return name


@dataclass
class SolveRequest:
    graph: WaypointGraph
    tasks: list[AgentTask]
    delta_global: float
    agent_radius: float
    timeout: float | None = None
    allocation_strategy: str = "uniform"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [t.agent_id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")
        if not self.tasks:
            raise ValueError("at least one agent is required")
        if not self.delta_global >= 0:
            raise ValueError("global risk bound must be >= 0")
        if not self.agent_radius > 0:
            raise ValueError("agent radius must be > 0")
        for t in self.tasks:
            if not (0 <= t.start < self.graph.n and 0 <= t.goal < self.graph.n):
                raise ValueError(f"agent {t.agent_id}: start/goal outside graph")
        self.allocation_strategy = normalize_strategy(self.allocation_strategy)
        if self.timeout is None:
            self.timeout = default_timeout(len(self.tasks))


def default_timeout(n_agents: int, scale: float = 1.0) -> float:
    """Wall-clock budget of 60 seconds per agent, optionally scaled."""
    return 60.0 * n_agents * scale
