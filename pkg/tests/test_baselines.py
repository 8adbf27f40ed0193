from __future__ import annotations

import numpy as np
import pytest

from helpers import A, B, B2, G, S, diamond, diamond_task, line, random_constraints, random_small_graph, star
from oracles import obeys, outcome_sets, pareto_front
from rbmapf.baselines import (
    ParetoPoint,
    lagrangian_search,
    pareto_search,
    prune_graph,
    pruned_graph_search,
    risk_quantile_threshold,
    select_under_budget,
    solve_baseline,
)
from rbmapf.cbs import NoSolution
from rbmapf.collision import detect_collisions
from rbmapf.graph import AgentTask, SolveRequest, path_risk, validate_path
from rbmapf.lowlevel import INF, rba_star


def test_lagrangian_zero_weight_is_shortest():
    assert lagrangian_search(diamond(), diamond_task(), lam=0.0).vertices == (S, A, G)


def test_lagrangian_heavy_weight_is_safest():
    assert lagrangian_search(diamond(), diamond_task(), lam=1e6).vertices == (S, B, B2, G)


def test_lagrangian_moderate_weight():
    # one extra step costs 1, saving 10 risk is worth 2 at lambda = 0.2
    assert lagrangian_search(diamond(), diamond_task(), lam=0.2).vertices == (S, B, B2, G)
    assert lagrangian_search(diamond(), diamond_task(), lam=0.05).vertices == (S, A, G)


def test_lagrangian_rejects_negative_weight():
    with pytest.raises(ValueError):
        lagrangian_search(diamond(), diamond_task(), lam=-1.0)


def test_pareto_front_on_diamond():
    front = pareto_search(diamond(), diamond_task())
    assert [(p.length, p.risk) for p in front] == [(2, 10.0), (3, 0.0)]
    assert select_under_budget(front, 10.0).length == 2
    assert select_under_budget(front, 9.0).length == 3
    assert select_under_budget([ParetoPoint(2, 1.0, None)], 0.5) is None


def test_pareto_single_edge():
    front = pareto_search(line(2, risk=2.0), AgentTask(0, 0, 1))
    assert [(p.length, p.risk) for p in front] == [(1, 2.0)]


def test_prune_threshold_examples():
    g = diamond()
    assert pruned_graph_search(g, diamond_task(), edge_risk_threshold=INF).vertices == (S, A, G)
    assert pruned_graph_search(g, diamond_task(), edge_risk_threshold=0.0).vertices == (S, B, B2, G)
    g = line(3, risk=1.0)
    assert pruned_graph_search(g, AgentTask(0, 0, 2), edge_risk_threshold=0.5) is None
    with pytest.raises(ValueError):
        prune_graph(g, -1.0)


def test_quantile_threshold():
    assert risk_quantile_threshold(diamond(), 0.5) == 0.0
    assert risk_quantile_threshold(diamond(), 1.0) == 5.0
    assert risk_quantile_threshold(line(1), 0.5) == 0.0


def _random_case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 8))
    g = random_small_graph(rng, n)
    s, goal = (int(x) for x in rng.choice(n, 2, replace=False))
    return g, AgentTask(0, s, goal), random_constraints(rng, g, count=3, t_max=6)


@pytest.mark.parametrize("seed", range(40))
def test_pareto_matches_brute_force(seed):
    g, task, cons = _random_case(seed)
    H = 9
    want = pareto_front((T, r) for T, rs in outcome_sets(g, task, cons, H).items() for r in rs)
    got = pareto_search(g, task, cons, horizon=H)
    assert [(p.length, p.risk) for p in got] == want
    for p in got:
        validate_path(p.path, g, task)
        assert obeys(p.path.vertices, cons, 0)
        assert (p.path.cost, path_risk(p.path, g)) == (p.length, p.risk)


@pytest.mark.parametrize("seed", range(30))
def test_lagrangian_lands_on_the_front(seed):
    g, task, cons = _random_case(seed)
    front = {(p.length, p.risk) for p in pareto_search(g, task, cons, horizon=9)}
    for lam in (0.0, 0.3, 1.0, 5.0):
        p = lagrangian_search(g, task, cons, lam=lam, horizon=9)
        if p is None:
            assert not front
            continue
        assert (p.cost, path_risk(p, g)) in front


@pytest.mark.parametrize("seed", range(30))
def test_unpruned_search_is_shortest(seed):
    g, task, cons = _random_case(seed)
    a = pruned_graph_search(g, task, cons, INF, horizon=9)
    b = lagrangian_search(g, task, cons, lam=0.0, horizon=9)
    assert (a is None) == (b is None)
    if a is not None:
        assert a.cost == b.cost


@pytest.mark.parametrize("seed", range(30))
def test_select_under_budget_agrees_with_rba_star(seed):
    g, task, cons = _random_case(seed)
    front = pareto_search(g, task, cons, horizon=9)
    for d in (0.0, 1.0, 2.5, 6.0):
        pick = select_under_budget(front, d)
        p = rba_star(g, task, cons, d, horizon=9)
        assert (pick is None) == (p is None)
        if p is not None:
            assert (pick.length, pick.risk) == (p.cost, path_risk(p, g))


@pytest.mark.parametrize("method", ["lagrangian", "pareto", "pruned"])
def test_multi_agent_baselines_are_conflict_free(method):
    g = star()
    tasks = [AgentTask(0, 1, 3), AgentTask(1, 2, 4)]
    sol = solve_baseline(SolveRequest(g, tasks, 0.0, 0.1), method)
    assert detect_collisions(sol.paths, g, 0.1) == []
    assert sol.cost == 5
    assert sol.total_risk == 0.0


def test_lagrangian_over_budget_is_reported():
    with pytest.raises(NoSolution):
        solve_baseline(SolveRequest(diamond(), [diamond_task()], 5.0, 0.1, timeout=5.0), "lagrangian", lam=0.0)


def test_pareto_baseline_respects_budget():
    sol = solve_baseline(SolveRequest(diamond(), [diamond_task()], 9.0, 0.1), "pareto")
    assert sol.total_risk == 0.0 and sol.cost == 3


def test_unknown_baseline():
    with pytest.raises(ValueError):
        solve_baseline(SolveRequest(diamond(), [diamond_task()], 9.0, 0.1), "greedy")
