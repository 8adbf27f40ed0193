from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import graph_from_coords, line, star
from oracles import dot_coefficients, exact_min_distance, motions_clash
from rbmapf.collision import (
    KernelDiagnostics,
    MotionSegment,
    check_segment_pair,
    closest_approach,
    conflicting_motions,
    count_collisions,
    detect_collisions,
    motions_collide,
    quadratic_coefficients,
)
from rbmapf.graph import TimedPath, WaypointGraph
from rbmapf.instances import euclidean_table


def _pd(*points):
    return euclidean_table(np.asarray(points, dtype=float))


def test_head_on_crossing_coefficients():
    # P: (0,0) -> (2,0); Q: (2,0) -> (0,0) relabelled as distinct vertices
    pd = _pd((0, 0), (2, 0), (1, -1), (1, 1))
    a, b, c = quadratic_coefficients(MotionSegment(0, 2, 3), MotionSegment(1, 3, 2), pd)
    assert (a, b, c) == pytest.approx((16.0, -16.0, 4.0))
    tau, f, _ = closest_approach(a, b, c)
    assert tau == pytest.approx(0.5)
    assert f == pytest.approx(0.0, abs=1e-12)


def test_crossing_diagonals():
    # (0,0)->(1,1) against (1,0)->(0,1): meet at the centre at tau = 0.5
    pd = _pd((0, 0), (1, 1), (1, 0), (0, 1))
    a, b, c = quadratic_coefficients(MotionSegment(0, 0, 1), MotionSegment(1, 2, 3), pd)
    assert (a, b, c) == pytest.approx((4.0, -4.0, 1.0))
    chk = check_segment_pair(MotionSegment(0, 0, 1), MotionSegment(1, 2, 3), pd, 0.01)
    assert chk.collides
    assert chk.tau == pytest.approx(0.5)
    assert chk.min_dist == pytest.approx(0.0, abs=1e-7)


def test_both_waiting_same_vertex():
    pd = _pd((0, 0), (1, 0))
    assert quadratic_coefficients(MotionSegment(0, 0, 0), MotionSegment(1, 0, 0), pd) == (0.0, 0.0, 0.0)


def test_parallel_motion_keeps_distance():
    pd = _pd((0, 0), (1, 0), (0, 1), (1, 1))
    a, b, c = quadratic_coefficients(MotionSegment(0, 0, 1), MotionSegment(1, 2, 3), pd)
    assert a == pytest.approx(0.0, abs=1e-12)
    assert b == pytest.approx(0.0, abs=1e-12)
    assert c == pytest.approx(1.0)


def test_stationary_pair_clear():
    pd = _pd((0, 0), (1, 0))
    assert not check_segment_pair(MotionSegment(0, 0, 0), MotionSegment(1, 1, 1), pd, 0.4).collides
    assert check_segment_pair(MotionSegment(0, 0, 0), MotionSegment(1, 1, 1), pd, 0.5).collides


def test_radius_must_be_positive():
    pd = _pd((0, 0), (1, 0))
    with pytest.raises(ValueError):
        check_segment_pair(MotionSegment(0, 0, 0), MotionSegment(1, 1, 1), pd, 0.0)


def test_discrete_conflicts_always_collide():
    pd = _pd((0, 0), (10, 0), (20, 0))
    assert motions_collide(pd, (0, 1), (2, 1), 0.01)  # same destination
    assert motions_collide(pd, (0, 1), (1, 0), 0.01)  # swap
    assert motions_collide(pd, (1, 0), (1, 2), 0.01)  # same origin
    assert not motions_collide(pd, (0, 0), (2, 2), 0.01)


def test_conflicting_motions_includes_wait_at_target():
    g = line(3, spacing=1.0)
    got = conflicting_motions(g, (0, 1), 0.1)
    assert (1, 1) in got and (1, 0) in got and (2, 1) in got
    assert (2, 2) not in got


def test_nonmetric_table_clamps_are_counted():
    # inflated cross distances violate the triangle inequality and make f concave
    pd = np.array(
        [
            [0.0, 0.1, 0.1, 10.0],
            [0.1, 0.0, 10.0, 0.1],
            [0.1, 10.0, 0.0, 0.1],
            [10.0, 0.1, 0.1, 0.0],
        ]
    )
    diag = KernelDiagnostics()
    chk = check_segment_pair(MotionSegment(0, 0, 1), MotionSegment(1, 2, 3), pd, 0.01, diagnostics=diag)
    assert diag.checks == 1
    assert chk.min_dist >= 0.0
    assert diag.negative_f_clamps + diag.degenerate >= 1


# --- path-level detection -----------------------------------------------------


def test_disjoint_paths_have_no_conflict():
    g = line(6)
    p = [TimedPath(0, (0, 1)), TimedPath(1, (5, 4))]
    assert detect_collisions(p, g, 0.1) == []
    assert count_collisions(p, g, 0.1) == 0


def test_simultaneous_arrival_at_hub():
    g = star()
    # west -> centre -> east against south -> centre -> north
    p = [TimedPath(0, (1, 0, 3)), TimedPath(1, (2, 0, 4))]
    found = detect_collisions(p, g, 0.1)
    assert found[0].kind == "vertex" and found[0].vertex == 0 and found[0].time == 1


def test_geometric_conflict_reports_tau():
    coords = [(0, 0), (1, 1), (1, 0), (0, 1)]
    g = graph_from_coords(coords, [(0, 1, 0.0), (2, 3, 0.0)])
    found = detect_collisions([TimedPath(0, (0, 1)), TimedPath(1, (2, 3))], g, 0.05)
    assert len(found) == 1
    c = found[0]
    assert c.kind == "geometric" and c.t == 0 and c.tau == pytest.approx(0.5)


def test_parked_agent_is_hit():
    g = line(4)
    p = [TimedPath(0, (1,)), TimedPath(1, (3, 2, 1))]
    found = detect_collisions(p, g, 0.1)
    assert [(c.kind, c.time, c.vertex) for c in found] == [("vertex", 2, 1)]


def test_swap_conflict():
    g = line(2)
    found = detect_collisions([TimedPath(0, (0, 1)), TimedPath(1, (1, 0))], g, 0.1)
    assert [c.kind for c in found] == ["edge_swap"]


def test_single_agent_never_conflicts():
    assert detect_collisions([TimedPath(0, (0, 1))], line(2), 0.4) == []


def test_coincident_starts():
    g = line(3)
    found = detect_collisions([TimedPath(0, (1, 0)), TimedPath(1, (1, 2))], g, 0.1)
    assert found[0].t == -1 and found[0].vertex == 1


def test_first_only_returns_earliest():
    g = line(5)
    p = [TimedPath(0, (0, 1, 2, 3, 4)), TimedPath(1, (4, 3, 2, 1, 0))]
    everything = detect_collisions(p, g, 0.1)
    first = detect_collisions(p, g, 0.1, first_only=True)
    assert len(first) == 1 and first[0] == everything[0]


def test_order_independent_of_path_order():
    g = line(5)
    p = [TimedPath(3, (0, 1, 2)), TimedPath(1, (2, 1, 0))]
    assert detect_collisions(p, g, 0.1) == detect_collisions(p[::-1], g, 0.1)
    assert detect_collisions(p, g, 0.1)[0].agents == (1, 3)


# --- properties -------------------------------------------------------------------

coord = st.floats(min_value=-5, max_value=5, allow_nan=False, allow_infinity=False)
point = st.tuples(coord, coord)


@settings(max_examples=300, deadline=None)
@given(point, point, point, point)
def test_coefficients_match_vector_form(p0, p1, q0, q1):
    pd = _pd(p0, p1, q0, q1)
    got = quadratic_coefficients(MotionSegment(0, 0, 1), MotionSegment(1, 2, 3), pd)
    want = dot_coefficients(p0, p1, q0, q1)
    scale = 1.0 + sum(abs(x) for x in want)
    assert np.allclose(got, want, atol=1e-9 * scale, rtol=0)


@settings(max_examples=300, deadline=None)
@given(point, point, point, point)
def test_kernel_is_symmetric(p0, p1, q0, q1):
    pd = _pd(p0, p1, q0, q1)
    one = check_segment_pair(MotionSegment(0, 0, 1), MotionSegment(1, 2, 3), pd, 0.3)
    two = check_segment_pair(MotionSegment(1, 2, 3), MotionSegment(0, 0, 1), pd, 0.3)
    assert one.collides == two.collides
    assert one.min_dist == pytest.approx(two.min_dist, abs=1e-6)


@settings(max_examples=300, deadline=None)
@given(point, point, point, point)
def test_minimum_not_above_endpoints(p0, p1, q0, q1):
    a, b, c = dot_coefficients(p0, p1, q0, q1)
    _, f, _ = closest_approach(a, b, c)
    assert f <= c + 1e-12 and f <= a + b + c + 1e-9 * (1 + abs(a) + abs(b) + abs(c))


@settings(max_examples=300, deadline=None)
@given(point, point, point, point, st.floats(min_value=0.01, max_value=2.0))
def test_verdict_matches_exact_geometry(p0, p1, q0, q1, radius):
    pd = _pd(p0, p1, q0, q1)
    chk = check_segment_pair(MotionSegment(0, 0, 1), MotionSegment(1, 2, 3), pd, radius)
    dmin = exact_min_distance(p0, p1, q0, q1)
    if abs(dmin - 2 * radius) > 1e-6:
        assert chk.collides == (dmin <= 2 * radius)


def test_conflicting_motions_agree_with_oracle():
    rng = np.random.default_rng(5)
    coords = rng.random((7, 2)) * 2
    pd = euclidean_table(coords)
    edges = [(u, v, float(pd[u, v]), 0.0) for u in range(7) for v in range(7) if u != v and pd[u, v] < 1.0]
    g = WaypointGraph(7, edges, pd, 1.0, coords=coords)
    motions = [(x, y) for x in range(7) for y, _ in g.moves[x]]
    for m in motions:
        got = set(conflicting_motions(g, m, 0.15))
        want = {o for o in motions if motions_clash(coords, m, o, 0.15)}
        assert got == want
