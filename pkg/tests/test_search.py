import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import chain_state, corridor_problem, random_scene
from wsplan.decomp import decompose
from wsplan.errors import InfeasibleStateError, InvalidEndpointError
from wsplan.robot import is_collision_free, linear_states, self_crossing, states_self_cross, sweep_check
from wsplan.scene import RobotState, Scene, chain_model, constraint_violation
from wsplan.search import (SearchConfig, find_next_state, insert_unfolding_state, link_angles, pair_problem,
                           plan_intermediate_states)

WEDGE = Scene([-2.5, -2.5, 2.5, 2.5], [[(-2.5, 0), (-0.25, 0), (-0.25, 2.5), (-2.5, 2.5)],
                                      [(0.25, 0), (2.5, 0), (2.5, 2.5), (0.25, 2.5)]])


def _angle(v):
    return math.atan2(v[1], v[0])


def _angdiff(a, b):
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


def test_empty_scene_children_follow_previous_positions():
    m = chain_model([1, 1, 1])
    S = chain_state(m, (0, 0), [0.3, 0.9, -0.2])
    N = find_next_state(S, np.array([[0, 0], [0.7, 0.4]]), m, Scene([-10, -10, 10, 10]))
    P, Q = S.positions, N.positions
    np.testing.assert_allclose(Q[0], [0.7, 0.4])
    for p, c, li in m.bfs:
        want = (P[c] - Q[p]) / np.linalg.norm(P[c] - Q[p])
        np.testing.assert_allclose((Q[c] - Q[p]) / m.links[li].length, want, atol=1e-12)
    assert constraint_violation(N, m) <= 1e-12


def test_waypoint_next_to_obstacle_gives_valid_state():
    sc = Scene([-5, -5, 5, 5], [[(0.5, -1), (1.5, -1), (1.5, 1), (0.5, 1)]])
    m = chain_model([1, 1], radius=0.1, width=0.1)
    S = chain_state(m, (-1, 0), [math.pi, math.pi])
    N = find_next_state(S, np.array([[-1, 0], [0.3, 0.2]]), m, sc)
    assert is_collision_free(N, m, sc) and constraint_violation(N, m) <= 1e-9


def test_blocked_child_is_rotated_about_parent():
    sc = Scene([-5, -5, 5, 5], [[(0.2, 0.3), (2, 0.3), (2, 2), (0.2, 2)]])
    m = chain_model([1.0], radius=0.1, width=0.1)
    S = RobotState([[0, 0], np.array([1, 0.2]) / np.hypot(1, 0.2)])
    assert is_collision_free(S, m, sc)
    N = find_next_state(S, np.array([[0, 0], [0.1, 0]]), m, sc)
    Q = N.positions
    follow = _angle(S.positions[1] - Q[0])
    assert _angdiff(_angle(Q[1] - Q[0]), follow) > 1e-6
    assert is_collision_free(N, m, sc) and constraint_violation(N, m) <= 1e-9


def test_wedge_placement_lands_in_open_cone():
    S = RobotState([[0, -0.5], [-0.9, -0.1]])
    m = chain_model([float(np.hypot(0.9, 0.4))], radius=0.05, width=0.05)
    assert is_collision_free(S, m, WEDGE)
    N = find_next_state(S, np.array([[0, -0.5], [0, 0.4]]), m, WEDGE)
    Q = N.positions
    assert is_collision_free(N, m, WEDGE) and constraint_violation(N, m) <= 1e-9
    # the follow direction itself is blocked, so the child had to be adjusted
    follow = _angle(S.positions[1] - Q[0])
    L = m.links[0].length
    ray = lambda t: np.array([Q[0], Q[0] + L * np.array([math.cos(t), math.sin(t)])])
    assert not is_collision_free(ray(follow), m, WEDGE)
    # brute-force oracle: the open directions form a cone; the result lies in it
    th = np.linspace(-np.pi, np.pi, 7200, endpoint=False)
    valid = np.array([t for t in th if is_collision_free(ray(t), m, WEDGE)])
    got = _angle(Q[1] - Q[0])
    assert min(_angdiff(got, t) for t in valid) < 2 * np.pi / 7200


def test_rotation_sweep_is_exhaustive():
    """With pushes disabled, the rotational sweep alone finds the open cone."""
    S = RobotState([[0, -0.5], [-0.9, -0.1]])
    m = chain_model([float(np.hypot(0.9, 0.4))], radius=0.05, width=0.05)
    N = find_next_state(S, np.array([[0, -0.5], [0, 0.4]]), m, WEDGE, SearchConfig(max_pushes=0))
    assert is_collision_free(N, m, WEDGE) and constraint_violation(N, m) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_find_next_state_outputs_valid_states(seed):
    rng = np.random.default_rng(seed)
    sc = random_scene(rng, 4)
    m = chain_model([0.6, 0.6, 0.6], radius=0.08, width=0.08)
    for _ in range(50):
        S = chain_state(m, rng.uniform(1, 9, 2), rng.uniform(-np.pi, np.pi, 3))
        if is_collision_free(S, m, sc) and not self_crossing(S, m):
            break
    else:
        return
    w = S.positions[0] + rng.normal(size=2) * 0.3
    try:
        N = find_next_state(S, np.array([S.positions[0], w]), m, sc)
    except InfeasibleStateError:
        return
    assert constraint_violation(N, m) <= 1e-9
    assert is_collision_free(N, m, sc)


def test_plan_start_equals_goal():
    _, m, start, _ = corridor_problem()
    assert plan_intermediate_states(start, start, m, Scene([0, 0, 16, 6])) == [start]


def test_plan_translation_in_empty_scene():
    m = chain_model([1, 1, 1])
    S = chain_state(m, (0, 0), [0.3, 0.9, -0.2])
    G = RobotState(S.positions + [0.5, 0.2])
    out = plan_intermediate_states(S, G, m, Scene([-10, -10, 10, 10]))
    assert len(out) == 2 and out[0] == S and out[1] == G
    assert all(sweep_check(li, S, G, m, Scene([-10, -10, 10, 10])).ok for li in range(3))


def test_plan_rejects_colliding_goal():
    sc, m, start, goal = corridor_problem()
    bad = RobotState(goal.positions - [7.0, -1.5])
    with pytest.raises(InvalidEndpointError):
        plan_intermediate_states(start, bad, m, sc)


def test_corridor_plan_validates_and_is_deterministic():
    sc, m, start, goal = corridor_problem()
    d = decompose(sc)
    states = plan_intermediate_states(start, goal, m, sc, d)
    assert states[0] == start and states[-1] == goal
    xs = np.array([s.positions[:, 0] for s in states])
    assert xs[:, 0].max() > 10  # threaded the corridor (x from 6 to 10)
    for A, B in zip(states[:-1], states[1:]):
        assert constraint_violation(B, m) <= 1e-9
        assert all(sweep_check(li, A, B, m, sc).ok for li in range(m.n_links))
        assert not states_self_cross(linear_states(A.positions, B.positions, 200), m).any()
        ra, rb = d.locate_many(A.positions), d.locate_many(B.positions)
        assert all(x == y or d.graph.has_edge(int(x), int(y)) for x, y in zip(ra, rb))
    again = plan_intermediate_states(start, goal, m, sc, d)
    assert len(again) == len(states) and all(a == b for a, b in zip(again, states))


def _crossing_pair(rng, m):
    while True:
        A = chain_state(m, (0, 0), rng.uniform(-np.pi, np.pi, 3))
        B = chain_state(m, (0, 0), rng.uniform(-np.pi, np.pi, 3))
        if self_crossing(A, m) or self_crossing(B, m):
            continue
        prob = pair_problem(A, B, m, Scene([-5, -5, 5, 5]), SearchConfig())
        if prob is not None and prob[0] == "self":
            return A, B, prob[1]


def test_unfolding_state_removes_crossing():
    rng = np.random.default_rng(3)
    m = chain_model([1, 1, 1], radius=0.05, width=0.05)
    sc = Scene([-5, -5, 5, 5])
    for _ in range(5):
        A, B, pairs = _crossing_pair(rng, m)
        assert (0, 2) in pairs
        M = insert_unfolding_state(A, B, pairs, m, sc)
        assert constraint_violation(M, m) <= 1e-9 and is_collision_free(M, m, sc)
        for X, Y in ((A, M), (M, B)):
            assert not states_self_cross(linear_states(X.positions, Y.positions, 400), m).any()
        # the sub-chain spanning the crossing is straightened
        ang = link_angles(M, m)
        assert max(_angdiff(a, ang[0]) for a in ang) < 1e-9


def test_unfolding_with_identical_states_returns_input():
    m = chain_model([1, 1, 1])
    A = chain_state(m, (0, 0), [0.1, 2.0, 3.0])
    assert insert_unfolding_state(A, A, [(0, 2)], m, Scene([-5, -5, 5, 5])) == A
