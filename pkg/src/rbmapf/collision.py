"""Conflict detection between timed paths.

Agents are discs of a common radius. Besides the discrete vertex and swap
conflicts, every pair of simultaneous motions is checked in continuous time:
the squared centre distance over a unit step is a quadratic whose
coefficients are recovered purely from pairwise distance queries, so the test
works on graphs that have no coordinate embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .graph import TimedPath, WaypointGraph

DEFAULT_EPS = 1e-9


@dataclass(frozen=True)
class MotionSegment:
    agent_id: int
    p0: int
    p1: int
    t: int = 0

    @property
    def is_wait(self) -> bool:
        return self.p0 == self.p1


@dataclass
class KernelDiagnostics:
    """Counts of numerical repairs made by the kernel (non-metric tables)."""

    checks: int = 0
    negative_f_clamps: int = 0
    degenerate: int = 0

    def merge(self, other: "KernelDiagnostics") -> None:
        self.checks += other.checks
        self.negative_f_clamps += other.negative_f_clamps
        self.degenerate += other.degenerate


@dataclass(frozen=True)
class SegmentCheck:
    collides: bool
    tau: float
    min_dist: float
    degenerate: bool = False


@dataclass(frozen=True)
class Conflict:
    """A collision between agents ``agents[0] < agents[1]``.

    ``t`` is the step index: the motions span times t..t+1. Vertex conflicts
    are located at the end of the step (time ``t + 1``); ``t == -1`` marks
    coincident start positions.
    """

    agents: tuple[int, int]
    t: int
    kind: str  # "vertex" | "edge_swap" | "geometric"
    segments: tuple[MotionSegment, MotionSegment]
    vertex: int | None = None
    tau: float | None = None
    min_dist: float | None = None

    @property
    def time(self) -> int:
        return self.t + 1 if self.kind == "vertex" else self.t


def quadratic_coefficients(seg_a: MotionSegment, seg_b: MotionSegment, pair_dist) -> tuple[float, float, float]:
    """(a, b, c) of f(tau) = a tau^2 + b tau + c from squared distances only."""
    p0, p1, q0, q1 = seg_a.p0, seg_a.p1, seg_b.p0, seg_b.p1
    return _coefficients(pair_dist, p0, p1, q0, q1)


def _coefficients(pd, p0: int, p1: int, q0: int, q1: int) -> tuple[float, float, float]:
    d_p0p1 = pd[p0][p1] ** 2
    d_q0q1 = pd[q0][q1] ** 2
    d_p0q0 = pd[p0][q0] ** 2
    d_p1q1 = pd[p1][q1] ** 2
    d_p0q1 = pd[p0][q1] ** 2
    d_p1q0 = pd[p1][q0] ** 2
    a = d_p0p1 + d_q0q1 + d_p0q0 + d_p1q1 - d_p0q1 - d_p1q0
    b = d_p1q0 - d_p0p1 - 2.0 * d_p0q0 - d_q0q1 + d_p0q1
    c = d_p0q0
    return a, b, c


def closest_approach(a: float, b: float, c: float, diagnostics: KernelDiagnostics | None = None) -> tuple[float, float, bool]:
    """Minimise f over [0, 1]; returns (tau, f(tau) clipped at 0, degenerate)."""
    scale = abs(a) + abs(b) + abs(c)
    degenerate = False
    if a > 0:
        tau = min(1.0, max(0.0, -b / (2.0 * a)))
        f = (a * tau + b) * tau + c
    else:
        # linear or (for inconsistent tables) concave: the minimum is at an end
        if a < -1e-12 * scale:
            degenerate = True
            if diagnostics is not None:
                diagnostics.degenerate += 1
        f0, f1 = c, a + b + c
        tau, f = (0.0, f0) if f0 <= f1 else (1.0, f1)
    if f < 0:
        if diagnostics is not None and f < -1e-12 * max(scale, 1.0):
            diagnostics.negative_f_clamps += 1
        f = 0.0
    return tau, f, degenerate


def check_segment_pair(
    seg_a: MotionSegment,
    seg_b: MotionSegment,
    pair_dist,
    radius: float,
    *,
    eps: float = DEFAULT_EPS,
    diagnostics: KernelDiagnostics | None = None,
) -> SegmentCheck:
    if radius <= 0:
        raise ValueError("radius must be positive")
    a, b, c = _coefficients(pair_dist, seg_a.p0, seg_a.p1, seg_b.p0, seg_b.p1)
    tau, f, degenerate = closest_approach(a, b, c, diagnostics)
    if diagnostics is not None:
        diagnostics.checks += 1
    dmin = math.sqrt(f)
    return SegmentCheck(dmin <= 2.0 * radius + eps, tau, dmin, degenerate)


def motions_collide(pd, m1: tuple[int, int], m2: tuple[int, int], radius: float, eps: float = DEFAULT_EPS) -> bool:
    """True if two simultaneous motions conflict in any sense."""
    (p0, p1), (q0, q1) = m1, m2
    if p1 == q1 or p0 == q0 or (p0 == q1 and p1 == q0):
        return True
    a, b, c = _coefficients(pd, p0, p1, q0, q1)
    _, f, _ = closest_approach(a, b, c)
    return math.sqrt(f) <= 2.0 * radius + eps


def conflicting_motions(graph: WaypointGraph, motion: tuple[int, int], radius: float, eps: float = DEFAULT_EPS) -> list[tuple[int, int]]:
    """Every motion (edge or wait) another agent could make that collides with ``motion``."""
    pd = graph.pd_rows
    out = []
    for x in graph.vertices:
        for y, _ in graph.moves[x]:
            if motions_collide(pd, motion, (x, y), radius, eps):
                out.append((x, y))
    return out


def detect_collisions(
    paths: Sequence[TimedPath],
    graph: WaypointGraph,
    radius: float,
    *,
    first_only: bool = False,
    eps: float = DEFAULT_EPS,
    diagnostics: KernelDiagnostics | None = None,
) -> list[Conflict]:
    """All pairwise conflicts, ordered by step then by agent pair.

    Agents that have arrived are parked at their goal. At most one conflict
    is reported per (pair, step), preferring vertex over swap over geometric.
    """
    if len(paths) < 2:
        return []
    order = sorted(range(len(paths)), key=lambda k: paths[k].agent_id)
    ps = [paths[k] for k in order]
    ids = [p.agent_id for p in ps]
    pd = graph.pd_rows
    two_r = 2.0 * radius + eps
    horizon = max(1, max(p.cost for p in ps))
    n = len(ps)
    found: list[Conflict] = []

    for i in range(n):
        for j in range(i + 1, n):
            if ps[i].at(0) == ps[j].at(0):
                v = ps[i].at(0)
                found.append(
                    Conflict((ids[i], ids[j]), -1, "vertex",
                             (MotionSegment(ids[i], v, v, -1), MotionSegment(ids[j], v, v, -1)), vertex=v)
                )
                if first_only:
                    return found

    for t in range(horizon):
        pos0 = [p.at(t) for p in ps]
        pos1 = [p.at(t + 1) for p in ps]
        for i in range(n):
            p0, p1 = pos0[i], pos1[i]
            for j in range(i + 1, n):
                q0, q1 = pos0[j], pos1[j]
                segs = (MotionSegment(ids[i], p0, p1, t), MotionSegment(ids[j], q0, q1, t))
                if p1 == q1:
                    c = Conflict((ids[i], ids[j]), t, "vertex", segs, vertex=p1)
                elif p0 == q1 and p1 == q0 and p0 != p1:
                    c = Conflict((ids[i], ids[j]), t, "edge_swap", segs)
                else:
                    if p0 == q0:
                        # already reported as the previous step's vertex conflict
                        continue
                    a, b, cc = _coefficients(pd, p0, p1, q0, q1)
                    tau, f, _ = closest_approach(a, b, cc, diagnostics)
                    if diagnostics is not None:
                        diagnostics.checks += 1
                    dmin = math.sqrt(f)
                    if dmin > two_r:
                        continue
                    c = Conflict((ids[i], ids[j]), t, "geometric", segs, tau=tau, min_dist=dmin)
                found.append(c)
                if first_only:
                    return found
    found.sort(key=lambda c: (c.t, c.agents))
    return found


def count_collisions(paths: Sequence[TimedPath], graph: WaypointGraph, radius: float) -> int:
    return len(detect_collisions(paths, graph, radius))
