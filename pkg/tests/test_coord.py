import math

import numpy as np
import pytest
from helpers import free_arm_pair
from hypothesis import given, settings
from hypothesis import strategies as st

from wsplan.coord import (CoordinationConfig, CoordinationReport, coordinate, distance_project,
                          gradient_alignment, hessian_diagnostic, lagrangian_parts, length_descent_step,
                          length_gradient, path_lengths, project_states, velocity_project)
from wsplan.errors import DegenerateLinkError, NonConvergenceError, SingularConfigurationError
from wsplan.scene import KeypointTrajectory, Scene, chain_model, constraint_violation
from wsplan.search import from_angles

EMPTY = Scene([-10, -10, 10, 10])


def one_link(length=1.0):
    return chain_model([length], radius=0.1, width=0.1)


def link_scan(X, model):
    """Largest link-length error over all states, by direct distance scan."""
    worst = 0.0
    for state in X:
        for L in model.links:
            d = math.dist(state[L.a], state[L.b])
            worst = max(worst, abs(d - L.length))
    return worst


def total_length(X):
    return sum(math.dist(X[i + 1, k], X[i, k]) for i in range(len(X) - 1) for k in range(X.shape[1]))


def perturbed_chain_trajectory(rng, n_links, N, noise=0.1):
    m = chain_model(list(rng.uniform(0.3, 1.0, n_links)))
    A = from_angles(np.zeros(2), np.cumsum(rng.uniform(-1, 1, n_links)), m)
    B = from_angles(rng.uniform(-1, 1, 2), np.cumsum(rng.uniform(-1, 1, n_links)), m)
    t = np.linspace(0, 1, N)[:, None, None]
    X = (1 - t) * A + t * B
    X[1:-1] += rng.normal(0, noise, X[1:-1].shape)
    return m, X


# distance projection


def test_satisfied_link_is_unchanged():
    m = one_link()
    X = np.array([[(0, 0), (1, 0)]] * 3, float)
    assert np.array_equal(distance_project(X, m).array, X)


def test_overlong_link_splits_symmetrically():
    m = one_link()
    X = np.array([[(0, 0), (1, 0)], [(0, 0), (2, 0)], [(0, 0), (1, 0)]], float)
    out = distance_project(X, m).array
    assert np.allclose(out[1], [(0.5, 0), (1.5, 0)], atol=1e-15)


def test_random_three_link_chain_reaches_tight_tolerance(rng):
    m, X = perturbed_chain_trajectory(rng, 3, 22)
    out = distance_project(X, m, eps=1e-9).array
    assert link_scan(out, m) <= 1e-9
    assert max(constraint_violation(s, m) for s in out) <= 1e-9


def test_coincident_link_uses_previous_direction():
    m = one_link()
    X = np.array([[(0, 0), (0, 1)], [(3, 3), (3, 3)], [(0, 0), (0, 1)]], float)
    out = distance_project(X, m).array
    assert np.allclose(out[1], [(3, 2.5), (3, 3.5)])


def test_coincident_link_without_history_raises():
    m = one_link()
    with pytest.raises(DegenerateLinkError):
        project_states(np.array([[(1.0, 1.0), (1.0, 1.0)]]), m)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_subnormal=False), min_size=4, max_size=4),
       st.floats(0.01, 50, allow_subnormal=False))
def test_isolated_link_update_is_exact(coords, length):
    a, b = np.array(coords[:2]), np.array(coords[2:])
    if math.dist(a, b) < 1e-6:
        return
    m = one_link(length)
    X = np.array([[a, b]])
    project_states(X, m, max_sweeps=1)
    d = math.dist(X[0, 0], X[0, 1])
    # endpoints are only representable to an ulp of their coordinates
    scale = max(length, math.dist(a, b), *map(abs, coords))
    assert abs(d - length) <= 8 * np.finfo(float).eps * scale


def test_full_sweep_never_increases_violation(rng):
    for _ in range(500):
        m, X = perturbed_chain_trajectory(rng, int(rng.integers(3, 7)), 5, noise=rng.uniform(0.01, 0.3))
        before = link_scan(X[1:-1], m)
        after = link_scan(distance_project(X, m, max_sweeps=1).array[1:-1], m)
        assert after <= before + 1e-12


# length descent


def test_collinear_waypoints_do_not_move():
    X = np.array([[(0, 0)], [(1, 1)], [(2, 2)]], float)
    out = length_descent_step(X, CoordinationConfig(alpha=0.5, step_mode="absolute")).array
    assert np.array_equal(out, X)


def fd_length_gradient(X, h=1e-6):
    G = np.zeros_like(X[1:-1])
    for idx in np.ndindex(G.shape):
        i = (idx[0] + 1,) + idx[1:]
        Xp, Xm = X.copy(), X.copy()
        Xp[i] += h
        Xm[i] -= h
        G[idx] = (total_length(Xp) - total_length(Xm)) / (2 * h)
    return G


def test_bent_waypoint_moves_to_derived_position():
    X = np.array([[(0, 0)], [(1, 1)], [(2, 0)]], float)
    out = length_descent_step(X, CoordinationConfig(alpha=0.5, step_mode="absolute")).array
    expected = X[1, 0] - 0.5 * fd_length_gradient(X)[0, 0]
    assert np.allclose(out[1, 0], expected, atol=1e-6)
    assert np.allclose(out[1, 0], [1, 1 - math.sqrt(2) / 2], atol=1e-15)


def test_length_gradient_matches_finite_differences(rng):
    for _ in range(100):
        X = rng.uniform(-2, 2, (6, 2, 2))
        G = length_gradient(X)
        F = fd_length_gradient(X)
        assert np.linalg.norm(G - F) <= 1e-6 * np.linalg.norm(F)


def test_v_shaped_path_straightens_to_chord():
    x = np.linspace(0, 10, 11)
    X = np.stack([x, 5 - np.abs(x - 5)], 1)[:, None, :]
    cfg = CoordinationConfig()
    for _ in range(5000):
        X = length_descent_step(X, cfg).array
    assert abs(path_lengths(X).sum() - 10.0) < 1e-4


def test_descent_skips_updates_that_enter_obstacles():
    m = one_link()
    sc = Scene([0, -3, 10, 5], [[(4, -1), (6, -1), (6, 0.8), (4, 0.8)]])
    X = np.array([[(1.5, 0), (2.5, 0)], [(4.5, 1.0), (5.5, 1.0)], [(7.5, 0), (8.5, 0)]])
    cfg = CoordinationConfig(alpha=0.5, step_mode="absolute")
    free = length_descent_step(X, cfg).array
    assert free[1, 0, 1] < 0.8
    kept = length_descent_step(X, cfg, m, sc).array
    assert np.array_equal(kept[1], X[1])


def test_descent_needs_three_waypoints():
    with pytest.raises(ValueError):
        length_descent_step(np.zeros((2, 1, 2)))


# motion limits


def test_steps_within_limit_are_unchanged():
    X = np.array([[(0, 0)], [(0.5, 0)], [(1, 0)]], float)
    out = velocity_project(X, CoordinationConfig(step_limit=1.0)).array
    assert np.array_equal(out, X)


def test_overlong_interior_step_is_split():
    X = np.array([[(0, 0)], [(1, 0)], [(3, 0)], [(4, 0)]], float)
    out = velocity_project(X, CoordinationConfig(step_limit=1.0), sweeps=1).array
    assert np.allclose(out[:, 0, 0], [0, 1.5, 2.5, 4])
    assert math.dist(out[1, 0], out[2, 0]) == pytest.approx(1.0)


def test_random_trajectory_respects_step_limit(rng):
    v = 0.5
    for _ in range(20):
        X = rng.uniform(0, 2, (30, 2, 2))
        out = velocity_project(X, CoordinationConfig(step_limit=v, eps_constraint=1e-10), sweeps=5000).array
        steps = np.hypot(*np.moveaxis(np.diff(out, axis=0), -1, 0))
        assert steps.max() <= v + 1e-9
        assert np.array_equal(out[[0, -1]], X[[0, -1]])


# coordination


def test_identical_endpoints_give_constant_trajectory():
    m = chain_model([1, 1])
    A = from_angles(np.zeros(2), [0.3, 0.9], m)
    rep = CoordinationReport()
    T = coordinate([A, A], m, None, CoordinationConfig(waypoints=12), report=rep).array
    assert T.shape == (12, 3, 2)
    assert np.array_equal(T, np.broadcast_to(A, T.shape))
    assert rep.max_iterations == 0


@pytest.mark.parametrize("n_links", [4, 6])
def test_free_space_arm_meets_link_tolerance_within_ten_iterations(n_links):
    m, A, B = free_arm_pair(np.random.default_rng(n_links), n_links)
    rep = CoordinationReport()
    T = coordinate([A, B], m, EMPTY, report=rep).array
    first = min(it for _, it, viol, _ in rep.rows if it > 0 and viol <= 1e-6)
    assert first <= 10
    assert link_scan(T, m) <= 1e-6


def test_boundary_states_are_bit_identical_and_links_hold(rng):
    for n_links in (3, 4, 5):
        m, A, B = free_arm_pair(rng, n_links)
        A0, B0 = A.copy(), B.copy()
        cfg = CoordinationConfig(waypoints=30)
        T = coordinate([A, B], m, EMPTY, cfg).array
        assert np.array_equal(T[0], A0) and np.array_equal(T[-1], B0)
        assert link_scan(T, m) <= cfg.eps_constraint


def test_step_limits_hold_on_output(rng):
    m, A, B = free_arm_pair(rng, 4)
    v = 1.5 * np.abs(B - A).max() * math.sqrt(2) / 29
    cfg = CoordinationConfig(waypoints=30, step_limit=v)
    T = coordinate([A, B], m, EMPTY, cfg).array
    steps = np.hypot(*np.moveaxis(np.diff(T, axis=0), -1, 0))
    assert steps.max() <= v + cfg.eps_constraint
    assert link_scan(T, m) <= cfg.eps_constraint


def test_unreachable_tolerance_raises_with_residual(rng):
    m, A, B = free_arm_pair(rng, 4)
    cfg = CoordinationConfig(eps_constraint=1e-300, max_outer_iters=3, waypoints=10)
    with pytest.raises(NonConvergenceError) as err:
        coordinate([A, B], m, None, cfg)
    assert err.value.residual > 0


def test_coordinate_is_deterministic(rng):
    m, A, B = free_arm_pair(rng, 4)
    T1 = coordinate([A, B], m, EMPTY).array
    T2 = coordinate([A, B], m, EMPTY).array
    assert np.array_equal(T1, T2)


# second-order diagnostic


def lagrangian_gradient(X, model, lam):
    """Gradient of total length minus lambda-weighted link residuals, over interior waypoints."""
    N, K, _ = X.shape
    G = np.zeros((N - 2, K, 2))
    for t in range(1, N - 1):
        for k in range(K):
            for other, sign in ((t - 1, 1.0), (t + 1, 1.0)):
                D = X[t, k] - X[other, k]
                G[t - 1, k] += sign * D / np.linalg.norm(D)
        for j, L in enumerate(model.links):
            D = X[t, L.a] - X[t, L.b]
            u = D / np.linalg.norm(D)
            w = lam[(t - 1) * model.n_links + j]
            G[t - 1, L.a] -= w * u
            G[t - 1, L.b] += w * u
    return G.ravel()


def fd_hessian(X, model, lam, h=1e-6):
    n = 2 * X.shape[1] * (len(X) - 2)
    H = np.zeros((n, n))
    for c in range(n):
        Xp, Xm = X.copy(), X.copy()
        Xp[1:-1].reshape(-1)[c] += h
        Xm[1:-1].reshape(-1)[c] -= h
        H[:, c] = (lagrangian_gradient(Xp, model, lam) - lagrangian_gradient(Xm, model, lam)) / (2 * h)
    return H


def test_two_point_hessian_without_multipliers_is_objective_only():
    m = one_link()
    X = np.array([[(0, 0), (1, 0)], [(1, 1), (2, 1.2)], [(2, 0), (3, 0.4)]], float)
    rep = hessian_diagnostic(X, m, multipliers=np.zeros(1))
    _, _, Hf, _ = lagrangian_parts(X, m)
    assert np.array_equal(rep.hessian, Hf)
    assert rep.min_eigenvalue >= -1e-12


def test_two_point_hessian_matches_finite_differences(rng):
    m = one_link()
    for _ in range(20):
        X = rng.uniform(-2, 2, (3, 2, 2))
        lam = rng.normal(size=1)
        H = hessian_diagnostic(X, m, multipliers=lam).hessian
        assert np.abs(H - fd_hessian(X, m, lam)).max() < 1e-6


def test_chain_hessian_matches_finite_differences(rng):
    m = chain_model([0.7, 0.5, 0.9])
    X = rng.uniform(-2, 2, (5, 4, 2))
    lam = rng.normal(size=3 * 3)
    H = hessian_diagnostic(X, m, multipliers=lam).hessian
    F = fd_hessian(X, m, lam)
    assert np.abs(H - F).max() <= 1e-6 * np.abs(F).max()


def test_zero_length_step_is_singular():
    m = one_link()
    X = np.array([[(0, 0), (1, 0)], [(0, 0), (1, 0)], [(2, 0), (3, 0)]], float)
    with pytest.raises(SingularConfigurationError):
        hessian_diagnostic(X, m)


def test_fitted_multipliers_solve_least_squares_stationarity(rng):
    m, A, B = free_arm_pair(rng, 4)
    T = coordinate([A, B], m, EMPTY, CoordinationConfig(waypoints=20)).array
    rep = hessian_diagnostic(T, m)
    g, J, _, _ = lagrangian_parts(T, m)
    assert rep.multipliers.shape == (4 * 18,)
    assert np.linalg.norm(J @ (J.T @ rep.multipliers - g)) <= 1e-9 * np.linalg.norm(J) * np.linalg.norm(g)
    assert rep.stationarity_residual == pytest.approx(np.linalg.norm(J.T @ rep.multipliers - g))
    assert {"A", "B", "time"} <= set(rep.blocks)


def test_length_and_residual_gradients_nearly_orthogonal_at_convergence(rng):
    worst = 0.0
    for n_links in (4, 6):
        for _ in range(3):
            m, A, B = free_arm_pair(rng, n_links)
            T = coordinate([A, B], m, EMPTY)
            worst = max(worst, gradient_alignment(T, m))
    assert worst < 0.1


def test_keypoint_trajectory_input_is_accepted():
    m = one_link()
    X = np.array([[(0, 0), (1, 0)], [(0, 0), (2, 0)], [(0, 0), (1, 0)]], float)
    assert np.array_equal(distance_project(KeypointTrajectory(X), m).array, distance_project(X, m).array)
