"""Synthetic hazard instances and the JSON instance file format.

The generator mimics a 2D point environment: waypoints sampled uniformly in
the unit square, edges between waypoints closer than ``max_dist``, and edge
risk given by the line integral of a sum-of-Gaussians hazard field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import AgentTask, WaypointGraph

FORMAT_TAG = "rbmapf-instance/1"


class GenerationError(RuntimeError):
    pass


class InstanceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class HazardSpec:
    amplitude: float = 1.0
    n_centers: int = 3
    width: float = 0.15
    # "route": centers sit near start-goal midpoints; "uniform": anywhere
    placement: str = "route"


DIFFICULTY = {
    "easy": dict(hazard=HazardSpec(amplitude=0.5, n_centers=2, width=0.12), reach=1.9),
    "medium": dict(hazard=HazardSpec(amplitude=1.0, n_centers=3, width=0.15), reach=1.6),
    "hard": dict(hazard=HazardSpec(amplitude=2.0, n_centers=4, width=0.18), reach=1.35),
}


@dataclass
class Instance:
    graph: WaypointGraph
    tasks: list[AgentTask]
    radius: float
    name: str = ""
    euclidean: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return len(self.tasks)


def euclidean_table(coords) -> np.ndarray:
    xy = np.asarray(coords, dtype=float)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def connectivity_radius(n_vertices: int, reach: float = 1.6) -> float:
    n = max(n_vertices, 2)
    return reach * math.sqrt(math.log(n) / (math.pi * n))


def hazard_field(points: np.ndarray, centers: np.ndarray, spec: HazardSpec) -> np.ndarray:
    if spec.amplitude == 0 or len(centers) == 0:
        return np.zeros(len(points))
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    return spec.amplitude * np.exp(-d2 / (2 * spec.width**2)).sum(axis=1)


def edge_risk(p: np.ndarray, q: np.ndarray, centers: np.ndarray, spec: HazardSpec, samples: int = 8) -> float:
    """Midpoint-rule line integral of the hazard field from ``p`` to ``q``."""
    if spec.amplitude == 0:
        return 0.0
    taus = (np.arange(samples) + 0.5) / samples
    pts = p[None, :] + taus[:, None] * (q - p)[None, :]
    length = float(np.linalg.norm(q - p))
    return float(hazard_field(pts, centers, spec).mean() * length)


def _components(n: int, adj: list[list[int]]) -> list[int]:
    label = [-1] * n
    c = 0
    for s in range(n):
        if label[s] >= 0:
            continue
        stack = [s]
        label[s] = c
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if label[v] < 0:
                    label[v] = c
                    stack.append(v)
        c += 1
    return label


def _pick_tasks(rng: np.random.Generator, n: int, n_agents: int) -> list[AgentTask]:
    if n_agents > n:
        raise GenerationError(f"{n_agents} agents need at least as many vertices (have {n})")
    if 2 * n_agents <= n:
        chosen = rng.choice(n, size=2 * n_agents, replace=False)
        starts, goals = chosen[:n_agents], chosen[n_agents:]
    else:
        starts = rng.choice(n, size=n_agents, replace=False)
        goals = rng.choice(n, size=n_agents, replace=False)
    return [AgentTask(i, int(s), int(g)) for i, (s, g) in enumerate(zip(starts, goals))]


def build_synthetic_instance(
    seed: int,
    n_vertices: int,
    n_agents: int,
    hazard_spec: HazardSpec | None = None,
    *,
    radius: float = 0.02,
    max_dist: float | None = None,
    reach: float = 1.6,
    max_retries: int = 50,
    name: str | None = None,
) -> tuple[WaypointGraph, list[AgentTask]]:
    """Random geometric graph over the unit square with a hazard field.

    Pure function of its arguments. Resamples (from the same seeded stream)
    until the graph is connected.
    """
    inst = synthetic_instance(
        seed,
        n_vertices,
        n_agents,
        hazard_spec,
        radius=radius,
        max_dist=max_dist,
        reach=reach,
        max_retries=max_retries,
        name=name,
    )
    return inst.graph, inst.tasks


def synthetic_instance(
    seed: int,
    n_vertices: int,
    n_agents: int,
    hazard_spec: HazardSpec | None = None,
    *,
    radius: float = 0.02,
    max_dist: float | None = None,
    reach: float = 1.6,
    max_retries: int = 50,
    name: str | None = None,
) -> Instance:
    if n_vertices < 2:
        raise ValueError("need at least two vertices")
    if n_agents < 1:
        raise ValueError("need at least one agent")
    spec = hazard_spec or HazardSpec()
    cutoff = max_dist if max_dist is not None else connectivity_radius(n_vertices, reach)
    rng = np.random.default_rng(seed)

    for _ in range(max_retries):
        coords = rng.random((n_vertices, 2))
        pd = euclidean_table(coords)
        adj = [[v for v in range(n_vertices) if v != u and pd[u, v] < cutoff] for u in range(n_vertices)]
        if len(set(_components(n_vertices, adj))) != 1:
            continue
        tasks = _pick_tasks(rng, n_vertices, n_agents)

        if spec.placement == "route":
            mids = np.array([(coords[t.start] + coords[t.goal]) / 2 for t in tasks])
            picks = rng.integers(0, len(mids), size=spec.n_centers)
            centers = mids[picks] + rng.normal(0.0, 0.05, size=(spec.n_centers, 2))
        else:
            centers = rng.random((spec.n_centers, 2))

        edges = []
        for u in range(n_vertices):
            for v in adj[u]:
                edges.append((u, v, float(pd[u, v]), edge_risk(coords[u], coords[v], centers, spec)))
        graph = WaypointGraph(n_vertices, edges, pd, cutoff, coords=coords)
        return Instance(
            graph=graph,
            tasks=tasks,
            radius=radius,
            name=name or f"syn-s{seed}-v{n_vertices}-a{n_agents}",
            euclidean=True,
            meta={
                "seed": seed,
                "hazard": {
                    "amplitude": spec.amplitude,
                    "n_centers": spec.n_centers,
                    "width": spec.width,
                    "placement": spec.placement,
                },
                "centers": centers.tolist(),
            },
        )
    raise GenerationError(
        f"no connected graph after {max_retries} draws (seed={seed}, n={n_vertices}, cutoff={cutoff:.3f})"
    )


def difficulty_instance(seed: int, n_vertices: int, n_agents: int, difficulty: str = "medium", **kw) -> Instance:
    preset = DIFFICULTY[difficulty]
    kw.setdefault("reach", preset["reach"])
    inst = synthetic_instance(seed, n_vertices, n_agents, preset["hazard"], **kw)
    inst.meta["difficulty"] = difficulty
    return inst


# --- file format -----------------------------------------------------------


def instance_to_dict(inst: Instance) -> dict:
    g = inst.graph
    verts = []
    for v in g.vertices:
        entry = {"id": v}
        if g.coords is not None:
            entry["xy"] = [float(x) for x in g.coords[v]]
        verts.append(entry)
    if inst.euclidean:
        pair_dist: object = "euclidean"
    else:
        pair_dist = g.pair_dist.tolist()
    doc = {
        "format": FORMAT_TAG,
        "name": inst.name,
        "max_dist": g.max_dist,
        "radius": inst.radius,
        "vertices": verts,
        "edges": [[u, v, d, r] for u, v, d, r in g.edge_list()],
        "pair_dist": pair_dist,
        "agents": [{"id": t.agent_id, "start": t.start, "goal": t.goal} for t in inst.tasks],
    }
    if inst.meta:
        doc["meta"] = inst.meta
    return doc


def instance_from_dict(doc: dict) -> Instance:
    try:
        if doc.get("format", FORMAT_TAG) != FORMAT_TAG:
            raise InstanceFormatError(f"unsupported format {doc.get('format')!r}")
        verts = doc["vertices"]
        ids = [int(v["id"]) for v in verts]
        if ids != list(range(len(ids))):
            raise InstanceFormatError("vertex ids must be dense 0..n-1 in order")
        n = len(ids)
        has_xy = [("xy" in v) for v in verts]
        coords = None
        if all(has_xy) and n:
            coords = np.array([v["xy"] for v in verts], dtype=float)
        elif any(has_xy):
            raise InstanceFormatError("either all vertices carry xy or none do")

        pd_doc = doc["pair_dist"]
        euclid = pd_doc == "euclidean"
        if euclid:
            if coords is None:
                raise InstanceFormatError("'euclidean' pair_dist needs vertex coordinates")
            pd = euclidean_table(coords)
        else:
            pd = np.array(pd_doc, dtype=float)

        graph = WaypointGraph(
            n,
            [(e[0], e[1], e[2], e[3]) for e in doc["edges"]],
            pd,
            float(doc["max_dist"]),
            coords=coords,
        )
        tasks = [AgentTask(int(a["id"]), int(a["start"]), int(a["goal"])) for a in doc["agents"]]
        return Instance(
            graph=graph,
            tasks=tasks,
            radius=float(doc["radius"]),
            name=doc.get("name", ""),
            euclidean=euclid,
            meta=doc.get("meta", {}),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise InstanceFormatError(f"malformed instance document: {exc!r}") from exc
    except ValueError as exc:
        if isinstance(exc, InstanceFormatError):
            raise
        raise InstanceFormatError(str(exc)) from exc


def dumps(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1)


def loads(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"not valid JSON: {exc}") from exc
    return instance_from_dict(doc)


def save(inst: Instance, path) -> None:
    Path(path).write_text(dumps(inst) + "\n")


def load(path) -> Instance:
    return loads(Path(path).read_text())
