import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsplan.errors import PreconditionError
from wsplan.nonholo import (RigidBodyState, VelocityPair, constraint_gradient, cspace_side_slip_residual,
                            gradient_flow_demo, rigid_velocities, scaled_corner, to_v_omega, workspace_residual)

ORIGIN = RigidBodyState((0, 0), (1, 0))
angles = st.floats(-math.pi, math.pi, allow_subnormal=False)


def residual_by_hand(p1, p2, q, dt):
    """Predicted link vector after dt, dotted with the left normal of v1."""
    v1, v2 = np.asarray(q[:2]), np.asarray(q[2:])
    link = (np.asarray(p2) + v2 * dt) - (np.asarray(p1) + v1 * dt)
    return float(link @ np.array([-v1[1], v1[0]]))


def fd_gradient(state, vel, h=1e-6):
    q = vel.as_vector()
    g = np.zeros(4)
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        g[i] = (residual_by_hand(state.p1, state.p2, q + e, vel.dt)
                - residual_by_hand(state.p1, state.p2, q - e, vel.dt)) / (2 * h)
    return g


def unit(a):
    return np.array([math.cos(a), math.sin(a)])


def test_side_slip_residual_examples():
    assert cspace_side_slip_residual(0.0, (1, 0, 0)) == 0.0
    assert cspace_side_slip_residual(0.0, (0, 1, 0)) == 1.0
    assert cspace_side_slip_residual(math.pi / 4, np.array([1, 1, 0]) / math.sqrt(2)) == pytest.approx(0, abs=1e-15)


def test_literal_side_slip_adds_turn_rate():
    assert cspace_side_slip_residual(0.0, (1, 0, 0.5), literal=True) == 0.5
    assert cspace_side_slip_residual(0.0, (1, 0, 0.5)) == 0.0


def test_translation_along_heading_has_zero_residual():
    assert workspace_residual(ORIGIN, VelocityPair((1, 0), (1, 0))) == 0.0


def test_sideways_translation_residual():
    vel = VelocityPair((0, 1), (0, 1), dt=0.1)
    assert workspace_residual(ORIGIN, vel) == pytest.approx(-1.0, abs=1e-15)
    assert residual_by_hand(ORIGIN.p1, ORIGIN.p2, vel.as_vector(), 0.1) == pytest.approx(-1.0, abs=1e-15)


def test_non_unit_reference_velocity_is_rejected():
    with pytest.raises(PreconditionError):
        workspace_residual(ORIGIN, VelocityPair((0, 0), (0, 1)))
    with pytest.raises(PreconditionError):
        constraint_gradient(ORIGIN, VelocityPair((2, 0), (0, 1)))


def test_state_needs_unit_link():
    with pytest.raises(PreconditionError):
        RigidBodyState((0, 0), (2, 0))


def test_gradient_at_forward_translation():
    vel = VelocityPair((1, 0), (1, 0), dt=0.1)
    g = constraint_gradient(ORIGIN, vel)
    assert np.allclose(g, [0, -1.1, 0, 0.1], atol=1e-15)
    assert np.allclose(g, fd_gradient(ORIGIN, vel), rtol=1e-6, atol=1e-9)


def test_literal_gradient_keeps_printed_sign():
    vel = VelocityPair((1, 0), (1, 0), dt=0.1)
    assert np.allclose(constraint_gradient(ORIGIN, vel, literal=True), [0, -0.9, 0, 0.1], atol=1e-15)


def test_gradient_matches_finite_differences(rng):
    for _ in range(100):
        state = RigidBodyState.from_pose(*rng.uniform(-5, 5, 2), rng.uniform(-np.pi, np.pi))
        vel = VelocityPair(unit(rng.uniform(-np.pi, np.pi)), rng.normal(size=2), dt=rng.uniform(0.01, 1))
        g, f = constraint_gradient(state, vel), fd_gradient(state, vel)
        assert np.linalg.norm(g - f) <= 1e-6 * np.linalg.norm(f)


def test_gradient_small_dt_limit():
    state = RigidBodyState.from_pose(1, 2, 0.7)
    vel = VelocityPair(unit(0.3), (0.4, -0.2), dt=1e-12)
    (x1, y1), (x2, y2) = state.p1, state.p2
    assert np.allclose(constraint_gradient(state, vel), [y2 - y1, x1 - x2, 0, 0], atol=1e-11)


@settings(max_examples=200, deadline=None)
@given(angles, st.sampled_from([-1.0, 1.0]), st.floats(0.01, 1.0))
def test_translation_along_heading_is_feasible(theta, c, dt):
    state = RigidBodyState.from_pose(0.3, -0.2, theta)
    v = c * state.heading
    assert workspace_residual(state, VelocityPair(v, v, dt)) == pytest.approx(0, abs=1e-12)


def test_v_omega_examples():
    assert to_v_omega(ORIGIN, VelocityPair((1, 0), (1, 0))) == (1.0, 0.0)
    assert to_v_omega(ORIGIN, VelocityPair((0, 0), (0, 1)), check_norm=False) == (0.0, 1.0)


def test_v_omega_reconstructs_rigid_velocities(rng):
    for _ in range(200):
        state = RigidBodyState.from_pose(*rng.uniform(-5, 5, 2), rng.uniform(-np.pi, np.pi))
        v, w = rng.normal(size=2)
        vel = rigid_velocities(state, v, w)
        v2, w2 = to_v_omega(state, vel, check_norm=False)
        u = state.heading
        n = np.array([-u[1], u[0]])
        v1 = v2 * u
        assert np.allclose(v1, vel.v1, atol=1e-9)
        assert np.allclose(v1 + w2 * n, vel.v2, atol=1e-9)


def test_heading_velocity_is_a_fixed_point():
    vel = VelocityPair((1, 0), (1, 0))
    tr = gradient_flow_demo(ORIGIN, vel, iters=1000)
    assert all(r == 0 for r in tr.residual)
    assert all(v == 1 and w == 0 for v, w in zip(tr.v, tr.omega))


def test_small_heading_error_grows_toward_rotation():
    vel = VelocityPair(unit(math.radians(5)), unit(math.radians(5)))
    tr = gradient_flow_demo(ORIGIN, vel, iters=10)
    w = np.abs(tr.omega)
    assert np.all(np.diff(w) > 0)


def test_long_runs_end_near_scaled_corners(rng):
    ratios = []
    for _ in range(20):
        a = math.radians(rng.uniform(1, 30)) * rng.choice([-1, 1])
        state = RigidBodyState.from_pose(0, 0, rng.uniform(-np.pi, np.pi))
        d = state.heading @ np.array([[math.cos(a), math.sin(a)], [-math.sin(a), math.cos(a)]])
        d = d * rng.choice([-1, 1])
        tr = gradient_flow_demo(state, VelocityPair(d, d), iters=2000)
        if tr.diverged:
            continue
        v, w = scaled_corner(state, tr.final)
        ratios.append(abs(w / v))
    assert np.median(np.abs(np.array(ratios) - 1)) < 0.1


def test_divergence_is_reported_not_raised():
    vel = VelocityPair(unit(1.0), unit(1.0), dt=1.0)
    tr = gradient_flow_demo(ORIGIN, vel, step=3.0, iters=200)
    assert tr.diverged
    assert len(tr.v) >= 1
