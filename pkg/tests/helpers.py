"""Small hand-built graphs shared by the tests."""

from __future__ import annotations

import numpy as np

from rbmapf.graph import AgentTask, WaypointGraph
from rbmapf.instances import euclidean_table

S, A, B, B2, G = 0, 1, 2, 3, 4


def graph_from_coords(coords, arcs, *, max_dist=10.0, bidirectional=True):
    """Graph with Euclidean pair_dist; ``arcs`` are (u, v, risk) triples."""
    coords = np.asarray(coords, dtype=float)
    pd = euclidean_table(coords)
    edges = []
    for u, v, r in arcs:
        edges.append((u, v, float(pd[u, v]), float(r)))
        if bidirectional:
            edges.append((v, u, float(pd[u, v]), float(r)))
    return WaypointGraph(len(coords), edges, pd, max_dist, coords=coords)


def diamond(bidirectional=False):
    """s -> a -> g risky (5 + 5); s -> b -> b' -> g safe but one step longer."""
    coords = [(0, 0), (1, 1), (1, -1), (2, -1), (3, 0)]
    arcs = [(S, A, 5.0), (A, G, 5.0), (S, B, 0.0), (B, B2, 0.0), (B2, G, 0.0)]
    return graph_from_coords(coords, arcs, bidirectional=bidirectional)


def diamond_task(agent=0):
    return AgentTask(agent, S, G)


def line(n, risk=0.0, spacing=1.0):
    coords = [(i * spacing, 0.0) for i in range(n)]
    return graph_from_coords(coords, [(i, i + 1, risk) for i in range(n - 1)])


def star():
    """Centre 0 with leaves 1 (west), 2 (south), 3 (east), 4 (north)."""
    coords = [(0, 0), (-1, 0), (0, -1), (1, 0), (0, 1)]
    return graph_from_coords(coords, [(0, k, 0.0) for k in range(1, 5)])


def random_small_graph(rng, n, *, p=0.45, risk_levels=(0.0, 0.5, 1.0, 1.5, 2.5), coords=None):
    """Random digraph with risks drawn from a small set (exact float sums)."""
    if coords is None:
        coords = rng.random((n, 2)) * 3
    pd = euclidean_table(coords)
    edges = []
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < p:
                edges.append((u, v, float(pd[u, v]), float(rng.choice(risk_levels))))
    return WaypointGraph(n, edges, pd, float(pd.max()) + 1.0, coords=coords)


def random_constraints(rng, graph, agent=0, *, count=3, t_max=6, p_positive=0.15):
    """A few vertex/edge constraints on ``agent`` (mostly negative)."""
    from rbmapf.lowlevel import Constraint

    motions = [(u, v) for u in range(graph.n) for v, _ in graph.moves[u]]
    out = []
    for _ in range(int(rng.integers(0, count + 1))):
        t = int(rng.integers(0, t_max + 1))
        positive = bool(rng.random() < p_positive)
        if rng.random() < 0.5:
            out.append(Constraint.vertex(agent, int(rng.integers(graph.n)), t, positive))
        else:
            u, v = motions[int(rng.integers(len(motions)))]
            out.append(Constraint.edge(agent, u, v, t, positive))
    return out
