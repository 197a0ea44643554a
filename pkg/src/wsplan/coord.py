"""
Constraint-projection coordination of key-point paths.

Each key-point gets its own polyline between two robot states. The optimizer
alternates a path-shortening step with projections that restore the link
lengths (and optional per-step motion limits) at every interior time index.
Boundary states are never modified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DegenerateLinkError, NonConvergenceError, PlanningFailure, SingularConfigurationError
from .geom import EPS_GEOM
from .robot import segment_clearance, states_clearance, states_collide, states_self_cross
from .scene import KeypointTrajectory, RobotModel, RobotState, Scene

INNER_SWEEPS = 50
# standalone projection iterates to tolerance; long chains converge linearly
STANDALONE_SWEEPS = 1000


@dataclass(frozen=True)
class CoordinationConfig:
    """Optimizer settings.

    Attributes:
        alpha: shortening step size in (0, 1].
        eps_constraint: link-length tolerance (m).
        eps_length: stop once the per-iteration change of total path length
            falls below this (m).
        max_outer_iters: outer iteration cap per segment.
        waypoints: waypoints per segment (N).
        step_limit: per-index motion limit (m), a scalar for every key-point
            or a per-key-point sequence with None for unlimited.
        max_subdivisions: validation retries per segment.
        step_mode: "scaled" multiplies alpha by the local waypoint spacing;
            "absolute" applies alpha as a length.
        validation_steps: sweep samples between consecutive waypoints.
    """
    alpha: float = 0.2
    eps_constraint: float = 1e-6
    eps_length: float = 1e-5
    max_outer_iters: int = 200
    waypoints: int = 100
    step_limit: Union[None, float, Sequence] = None
    max_subdivisions: int = 8
    step_mode: str = "scaled"
    validation_steps: int = 2

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if self.eps_constraint <= 0 or self.eps_length <= 0:
            raise ValueError("tolerances must be positive")
        if self.waypoints < 2:
            raise ValueError("need at least 2 waypoints per segment")
        if self.step_mode not in ("scaled", "absolute"):
            raise ValueError("step_mode must be 'scaled' or 'absolute'")

    def limits(self, K: int) -> Optional[np.ndarray]:
        """Per-key-point limits as an array with inf for unlimited, or None."""
        if self.step_limit is None:
            return None
        if np.isscalar(self.step_limit):
            return np.full(K, float(self.step_limit))
        lim = [np.inf if v is None else float(v) for v in self.step_limit]
        if len(lim) != K:
            raise ValueError("step_limit needs one entry per key-point")
        return np.array(lim)

    @classmethod
    def from_dict(cls, d: dict) -> "CoordinationConfig":
        names = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown coordination settings: {sorted(unknown)}")
        return cls(**d)


def _arr(traj) -> np.ndarray:
    if isinstance(traj, KeypointTrajectory):
        return np.array(traj.array, float)
    return np.array(traj, float)


# --------------------------------------------------------------------------
# distance projection
#
# All kernels below accept arrays with any leading batch axes; the last two
# axes are (key-point, xy) and, for trajectories, the axis before them is time.


def project_states(X: np.ndarray, model: RobotModel, eps: float = 1e-9, max_sweeps: int = INNER_SWEEPS,
                   prev: Optional[np.ndarray] = None, fallback: Optional[np.ndarray] = None) -> int:
    """Symmetric link-length projection of a stack of states, in place.

    Args:
        X: (..., K, 2) positions, modified in place.
        prev: optional array shaped like X whose link directions replace
            coincident endpoints (the previous time step).
        fallback: optional array broadcastable to X, used when ``prev`` is
            degenerate too.

    Returns:
        Number of sweeps performed.

    Raises:
        DegenerateLinkError: coincident endpoints with no fallback direction.
    """
    if model.n_links == 0 or X.size == 0:
        return 0
    a_idx, b_idx = model.link_index_arrays
    lengths = model.lengths
    for sweep in range(1, max_sweeps + 1):
        for p, c, li in model.bfs:
            a, b = a_idx[li], b_idx[li]
            Xa, Xb = X[..., a, :], X[..., b, :]
            D = Xa - Xb
            d = np.hypot(D[..., 0], D[..., 1])
            if d.min(initial=np.inf) <= EPS_GEOM:
                D = _fallback_direction(D, d <= EPS_GEOM, a, b, li, prev, fallback)
                D /= np.hypot(D[..., 0], D[..., 1])[..., None]
            else:
                D /= d[..., None]
            D *= (0.5 * (lengths[li] - d))[..., None]
            Xa += D
            Xb -= D
        if _violation(X, model).max(initial=0.0) <= eps:
            return sweep
    return max_sweeps


def _fallback_direction(D, deg, a, b, li, prev, fallback):
    if prev is None:
        raise DegenerateLinkError(f"link {li} has coincident endpoints")
    Dp = prev[..., a, :] - prev[..., b, :]
    still = deg & (np.hypot(Dp[..., 0], Dp[..., 1]) <= EPS_GEOM)
    if np.any(still):
        if fallback is None:
            raise DegenerateLinkError(f"link {li} has coincident endpoints and no previous direction")
        F = np.broadcast_to(fallback, prev.shape)
        Dp = np.where(still[..., None], F[..., a, :] - F[..., b, :], Dp)
    return np.where(deg[..., None], Dp, D)


def _violation(X: np.ndarray, model: RobotModel) -> np.ndarray:
    """Max link-length error per state (shape X.shape[:-2])."""
    if model.n_links == 0:
        return np.zeros(X.shape[:-2])
    a, b = model.link_index_arrays
    D = X[..., a, :] - X[..., b, :]
    return np.abs(np.hypot(D[..., 0], D[..., 1]) - model.lengths).max(axis=-1)


def distance_project(traj, model: RobotModel, eps: float = 1e-6, max_sweeps: int = STANDALONE_SWEEPS,
                     fix_ends: bool = True) -> KeypointTrajectory:
    """Restore link lengths at every time index.

    For each link (a, b) with length l and current distance d, both
    endpoints move by (l - d)/2 along the link direction, links taken in BFS
    order from the root. Sweeps repeat until every state is within eps or
    ``max_sweeps`` is reached; the coordination loop uses a 50-sweep cap.
    The first and last states are left untouched when ``fix_ends`` is set.
    """
    X = _arr(traj)
    _distance_project_inplace(X, model, eps, max_sweeps, fix_ends)
    return KeypointTrajectory(X)


def _distance_project_inplace(X, model, eps, max_sweeps, fix_ends=True) -> int:
    N = X.shape[-3]
    if not fix_ends:
        return project_states(X, model, eps, max_sweeps)
    if N <= 2:
        return 0
    inner = X[..., 1:-1, :, :]
    prev = X[..., :-2, :, :]
    return project_states(inner, model, eps, max_sweeps, prev=prev, fallback=X[..., :1, :, :])


# --------------------------------------------------------------------------
# path shortening


def _unit_steps(X):
    D = np.diff(X, axis=-3)
    n = np.hypot(D[..., 0], D[..., 1])
    U = np.where(n[..., None] > EPS_GEOM, D / np.where(n > EPS_GEOM, n, 1.0)[..., None], 0.0)
    return U, n


def length_gradient(X: np.ndarray) -> np.ndarray:
    """Gradient of total path length w.r.t. every interior waypoint.

    Returns:
        (..., N-2, K, 2) array: u1 - u2 with u1 the unit incoming and u2 the
        unit outgoing step direction (zero for zero-length steps).
    """
    U, _ = _unit_steps(X)
    return U[..., :-1, :, :] - U[..., 1:, :, :]


def path_lengths(X: np.ndarray) -> np.ndarray:
    """Arclength of each key-point path, shape (..., K)."""
    D = np.diff(X, axis=-3)
    return np.hypot(D[..., 0], D[..., 1]).sum(axis=-2)


def length_descent_step(traj, config: Optional[CoordinationConfig] = None, model: Optional[RobotModel] = None,
                        scene: Optional[Scene] = None) -> KeypointTrajectory:
    """One simultaneous shortening step on every interior waypoint.

    p(i+1) <- p(i+1) - step * (u1 - u2), all updates computed from the
    pre-step trajectory. With a scene, updates that create a new collision
    at their time step are rejected.
    """
    cfg = config or CoordinationConfig()
    X = _arr(traj)
    if len(X) < 3:
        raise ValueError("length descent needs at least 3 waypoints")
    Y = _descent(X, cfg)
    if scene is not None and model is not None:
        _reject_new_collisions(X, Y, model, scene)
    return KeypointTrajectory(Y)


def _descent(X: np.ndarray, cfg: CoordinationConfig) -> np.ndarray:
    U, n = _unit_steps(X)
    G = U[..., :-1, :, :] - U[..., 1:, :, :]
    if cfg.step_mode == "absolute":
        step = cfg.alpha
    else:
        step = cfg.alpha * np.minimum(n[..., :-1, :], n[..., 1:, :])[..., None]
    Y = X.copy()
    Y[..., 1:-1, :, :] -= step * G
    return Y


def _reject_new_collisions(X, Y, model, scene, before=None) -> np.ndarray:
    """Undo shortening updates that create collisions, in place on Y.

    Key-points of the offending links are reverted first; if the state
    still collides, the whole state is. Returns the collision mask of the
    interior states of Y (shape Y.shape[:-3] + (N-2,)).
    """
    K = X.shape[-2]
    Xi = X[..., 1:-1, :, :].reshape(-1, K, 2)
    Yi = Y[..., 1:-1, :, :].reshape(-1, K, 2)
    shape = Y.shape[:-3] + (Y.shape[-3] - 2,)
    if before is None:
        before = states_collide(Xi, model, scene)
    else:
        before = np.asarray(before).reshape(-1)
    after = states_collide(Yi, model, scene)
    new = np.flatnonzero(after & ~before)
    if len(new) and model.n_links:
        c = states_clearance(Yi[new], model, scene)
        bad_link = np.any(c < -EPS_GEOM, axis=2)
        a, b = model.link_index_arrays
        revert = np.zeros((len(new), K), bool)
        revert[:, a] |= bad_link
        revert[:, b] |= bad_link
        Yi[new] = np.where(revert[..., None], Xi[new], Yi[new])
        still = states_collide(Yi[new], model, scene)
        Yi[new[still]] = Xi[new[still]]
    elif len(new):
        Yi[new] = Xi[new]
    Y[..., 1:-1, :, :] = Yi.reshape(Y[..., 1:-1, :, :].shape)
    return (after & before).reshape(shape)


# --------------------------------------------------------------------------
# motion limits


def velocity_project(traj, config: CoordinationConfig, sweeps: int = INNER_SWEEPS) -> KeypointTrajectory:
    """Pull consecutive waypoints together where a step exceeds its limit.

    Interior pairs each move (s - v)/2 toward the other; a pair touching a
    fixed boundary state moves only its free point, by s - v. Even and odd
    steps alternate so no point takes two updates at once.
    """
    X = _arr(traj)
    lim = config.limits(X.shape[1])
    if lim is None:
        return KeypointTrajectory(X)
    _velocity_inplace(X, lim, config.eps_constraint, sweeps)
    return KeypointTrajectory(X)


def _velocity_inplace(X, lim, eps, sweeps) -> float:
    N = X.shape[-3]
    if N < 3:
        return 0.0
    for _ in range(sweeps):
        for parity in (0, 1):
            i = np.arange(parity, N - 1, 2)
            D = X[..., i + 1, :, :] - X[..., i, :, :]
            s = np.hypot(D[..., 0], D[..., 1])
            over = np.maximum(s - lim, 0.0)
            if not np.any(over > 0):
                continue
            U = D / np.where(s > 0, s, 1.0)[..., None]
            left_fixed = (i == 0)[:, None]
            right_fixed = (i + 1 == N - 1)[:, None]
            mv_left = np.where(left_fixed, 0.0, np.where(right_fixed, over, over / 2))
            mv_right = np.where(right_fixed, 0.0, np.where(left_fixed, over, over / 2))
            X[..., i, :, :] += mv_left[..., None] * U
            X[..., i + 1, :, :] -= mv_right[..., None] * U
        if _step_excess(X, lim).max(initial=0.0) <= eps:
            break
    return float(_step_excess(X, lim).max(initial=0.0))


def _step_excess(X, lim) -> np.ndarray:
    """Largest per-step motion above the limit, per trajectory (shape X.shape[:-3])."""
    D = np.diff(X, axis=-3)
    s = np.hypot(D[..., 0], D[..., 1])
    return np.max(s - lim, axis=(-2, -1), initial=0.0)


# --------------------------------------------------------------------------
# segment coordination


def resample_polyline(poly, n: int) -> np.ndarray:
    """n points spaced uniformly by arclength along a polyline."""
    P = np.asarray(poly, float).reshape(-1, 2)
    if len(P) == 1:
        return np.repeat(P, n, axis=0)
    seg = np.hypot(*np.diff(P, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] <= 0:
        return np.repeat(P[:1], n, axis=0)
    s = np.linspace(0.0, cum[-1], n)
    out = np.stack([np.interp(s, cum, P[:, 0]), np.interp(s, cum, P[:, 1])], axis=1)
    out[0], out[-1] = P[0], P[-1]
    return out


def initial_segment(polylines: Sequence, n: int) -> np.ndarray:
    """(n, K, 2) trajectory from one polyline per key-point."""
    return np.stack([resample_polyline(p, n) for p in polylines], axis=1)


@dataclass
class SegmentLog:
    iterations: int = 0
    rows: list = field(default_factory=list)  # (iter, max_violation, total_length)
    converged: bool = False


def coordinate_segment(X0: np.ndarray, model: RobotModel, scene: Optional[Scene],
                       config: CoordinationConfig) -> tuple:
    """Run the outer loop on one segment.

    Returns:
        (X, SegmentLog)

    Raises:
        NonConvergenceError: link lengths still violated after the cap.
    """
    X, logs = coordinate_batch(np.asarray(X0, float)[None], model, scene, config)
    return X[0], logs[0]


def coordinate_batch(X0: np.ndarray, model: RobotModel, scene: Optional[Scene],
                     config: CoordinationConfig) -> tuple:
    """Run the outer loop on M independent segments at once.

    Each segment stops updating once its link lengths (and motion limits)
    hold and its total length changed by less than eps_length.

    Args:
        X0: (M, N, K, 2) initial segments.

    Returns:
        (X (M, N, K, 2), list of SegmentLog)

    Raises:
        NonConvergenceError: some segment still violates its link lengths
            after max_outer_iters.
    """
    X = np.array(X0, float)
    M, N = X.shape[:2]
    logs = [SegmentLog() for _ in range(M)]
    viol = _violation(X, model).max(axis=-1, initial=0.0)
    L_prev = path_lengths(X).sum(axis=-1)
    for m in range(M):
        logs[m].rows.append((0, float(viol[m]), float(L_prev[m])))
    if N < 3:
        for lg in logs:
            lg.converged = True
        return X, logs
    lim = config.limits(X.shape[2])
    # segments that do not move at all need no iterations
    active = ~np.all(X == X[:, :1], axis=(1, 2, 3))
    for m in np.flatnonzero(~active):
        logs[m].converged = True
    if not active.any():
        return X, logs
    coll = None
    for it in range(1, config.max_outer_iters + 1):
        idx = np.flatnonzero(active)
        Xa = X[idx]
        Y = _descent(Xa, config)
        if scene is not None:
            coll = _reject_new_collisions(Xa, Y, model, scene, None if coll is None else coll[idx])
        if lim is not None:
            _velocity_inplace(Y, lim, config.eps_constraint, INNER_SWEEPS)
        _distance_project_inplace(Y, model, config.eps_constraint, INNER_SWEEPS)
        X[idx] = Y
        if coll is not None:
            full = np.zeros((M, N - 2), bool)
            full[idx] = coll
            coll = full
        v = _violation(Y, model).max(axis=-1, initial=0.0)
        L = path_lengths(Y).sum(axis=-1)
        ok = v <= config.eps_constraint
        if lim is not None:
            ok &= _step_excess(Y, lim) <= config.eps_constraint
        done = ok & (np.abs(L_prev[idx] - L) < config.eps_length)
        for j, m in enumerate(idx):
            logs[m].rows.append((it, float(v[j]), float(L[j])))
            logs[m].iterations = it
            logs[m].converged = bool(done[j])
        viol[idx] = v
        L_prev[idx] = L
        active[idx[done]] = False
        if not active.any():
            break
    if np.any(viol > config.eps_constraint):
        worst = float(viol.max())
        raise NonConvergenceError(f"link lengths violated by {worst:.3g} after {config.max_outer_iters} iterations",
                                  worst)
    return X, logs


def validate_segment(X: np.ndarray, model: RobotModel, scene: Optional[Scene], steps: int = 2):
    """First problem along a coordinated segment: None, ("collision", t) or ("self", t)."""
    return validate_batch(np.asarray(X, float)[None], model, scene, steps)[0]


def validate_batch(X: np.ndarray, model: RobotModel, scene: Optional[Scene], steps: int = 2) -> list:
    """Per-segment first problem for (M, N, K, 2) segments.

    Waypoint states are checked directly; between consecutive waypoints each
    link is checked at ``steps - 1`` length-preserving interpolations, and
    self-crossing is checked on the linearly interpolated states.
    """
    M, N, K, _ = X.shape
    ts = np.linspace(0, 1, steps + 1)[1:-1]
    problems = [None] * M
    if scene is not None:
        if model.n_links:
            r = model.radius_array
            A, B, ra, rb, hw, owner = [], [], [], [], [], []
            t_idx = np.broadcast_to(np.arange(N), (M, N))
            t_mid = np.broadcast_to(np.arange(N - 1), (M, N - 1))
            m_idx = np.broadcast_to(np.arange(M)[:, None], (M, N))
            m_mid = np.broadcast_to(np.arange(M)[:, None], (M, N - 1))
            for li, L in enumerate(model.links):
                A.append(X[:, :, L.a].reshape(-1, 2))
                B.append(X[:, :, L.b].reshape(-1, 2))
                owner.append(np.stack([m_idx.ravel(), t_idx.ravel()], 1))
                for t in ts:
                    pa, pb = _interp_link_many(X[:, :-1, L.a].reshape(-1, 2), X[:, :-1, L.b].reshape(-1, 2),
                                               X[:, 1:, L.a].reshape(-1, 2), X[:, 1:, L.b].reshape(-1, 2), L.length, t)
                    A.append(pa)
                    B.append(pb)
                    owner.append(np.stack([m_mid.ravel(), t_mid.ravel()], 1))
                n = M * N + len(ts) * M * (N - 1)
                ra.append(np.full(n, r[L.a]))
                rb.append(np.full(n, r[L.b]))
                hw.append(np.full(n, L.width / 2))
            A, B = np.concatenate(A), np.concatenate(B)
            ra, rb, hw = np.concatenate(ra), np.concatenate(rb), np.concatenate(hw)
            own = np.concatenate(owner)
            bad = np.zeros(len(A), bool)
            for s in range(0, len(A), 8192):
                c = segment_clearance(A[s:s + 8192], B[s:s + 8192], ra[s:s + 8192], rb[s:s + 8192],
                                      hw[s:s + 8192], scene)
                bad[s:s + 8192] = np.any(c < -EPS_GEOM, axis=1)
            for m, t in own[bad]:
                if problems[m] is None or t < problems[m][1]:
                    problems[m] = ("collision", int(t))
        else:
            hits = states_collide(X.reshape(-1, K, 2), model, scene).reshape(M, N)
            for m in np.flatnonzero(hits.any(axis=1)):
                problems[m] = ("collision", int(np.argmax(hits[m])))
    fine = np.concatenate([X] + [(1 - t) * X[:, :-1] + t * X[:, 1:] for t in ts], axis=1)
    hits = states_self_cross(fine.reshape(-1, K, 2), model).reshape(M, -1)
    for m in np.flatnonzero(hits.any(axis=1)):
        if problems[m] is None:
            problems[m] = ("self", int(np.argmax(hits[m])) % N)
    return problems


def _interp_link_many(a0, b0, a1, b1, length, t):
    pa = (1 - t) * a0 + t * a1
    pb = (1 - t) * b0 + t * b1
    mid = 0.5 * (pa + pb)
    D = pa - pb
    d = np.hypot(D[:, 0], D[:, 1])
    D0 = a0 - b0
    U = np.where((d > EPS_GEOM)[:, None], D / np.where(d > EPS_GEOM, d, 1.0)[:, None],
                 D0 / np.maximum(np.hypot(D0[:, 0], D0[:, 1]), EPS_GEOM)[:, None])
    return mid + 0.5 * length * U, mid - 0.5 * length * U


@dataclass
class CoordinationReport:
    iterations: list = field(default_factory=list)  # per final segment
    rows: list = field(default_factory=list)  # (segment, iter, max_violation, total_length)
    subdivisions: int = 0

    @property
    def max_iterations(self) -> int:
        return max(self.iterations, default=0)


def coordinate(states: Sequence, model: RobotModel, scene: Optional[Scene] = None,
               config: Optional[CoordinationConfig] = None, report: Optional[CoordinationReport] = None,
               polylines: Optional[Sequence] = None) -> KeypointTrajectory:
    """Coordinate the key-point paths between consecutive intermediate states.

    Args:
        states: intermediate robot states S_0..S_M (each constraint-exact).
        polylines: optional per-segment list of K key-point polylines; the
            default is the straight segment between consecutive states.
        report: filled with iteration counts and the per-iteration log.

    Returns:
        Concatenated trajectory; shared boundary states appear once.

    Raises:
        NonConvergenceError: a segment failed to reach eps_constraint.
        PlanningFailure: validation still fails after max_subdivisions.
    """
    cfg = config or CoordinationConfig()
    rep = report if report is not None else CoordinationReport()
    S = [st.positions if isinstance(st, RobotState) else np.asarray(st, float) for st in states]
    if len(S) == 1:
        S = S * 2
    pairs = []
    for j, (A, B) in enumerate(zip(S[:-1], S[1:])):
        polys = polylines[j] if polylines is not None else [np.array([A[k], B[k]]) for k in range(len(A))]
        pairs.append((A, B, polys))
    out = [S[0][None]]
    for X, logs in _coordinate_pairs(pairs, model, scene, cfg, rep, 0):
        out.append(X[1:])
        for lg in logs:
            seg = len(rep.iterations)
            rep.iterations.append(lg.iterations)
            rep.rows.extend((seg,) + row for row in lg.rows)
    return KeypointTrajectory(np.concatenate(out))


def _coordinate_pairs(pairs, model, scene, cfg, rep, depth) -> list:
    """Coordinate and validate a batch of segments, subdividing failures.

    Returns:
        One (X, logs) per input pair; X spans the pair, logs lists the
        final sub-segments in order.
    """
    X0 = np.stack([initial_segment(polys, cfg.waypoints) for _, _, polys in pairs])
    for m, (A, B, _) in enumerate(pairs):
        X0[m, 0], X0[m, -1] = A, B
    X, logs = coordinate_batch(X0, model, scene, cfg)
    problems = validate_batch(X, model, scene, cfg.validation_steps)
    results = [(X[m], [logs[m]]) for m in range(len(pairs))]
    failing = [m for m, p in enumerate(problems) if p is not None]
    if not failing:
        return results
    if depth >= cfg.max_subdivisions or scene is None:
        m = failing[0]
        raise PlanningFailure(f"coordinated segment fails validation ({problems[m][0]}) after {depth} subdivisions")
    from .search import SearchConfig, _Context, _midpoint_state, insert_unfolding_state, pair_problem
    ctx = _Context(model, scene, None, SearchConfig())
    sub = []
    for m in failing:
        A, B, _ = pairs[m]
        rep.subdivisions += 1
        if problems[m][0] == "self":
            pp = pair_problem(A, B, model, scene, SearchConfig())
            crossing = pp[1] if pp is not None and pp[0] == "self" else _crossing_at(X[m], problems[m][1], model)
            Mid = insert_unfolding_state(A, B, crossing, model, scene).positions
        else:
            Mid = _midpoint_state(A, B, ctx)
        sub.append((A, Mid, [np.array([A[k], Mid[k]]) for k in range(len(A))]))
        sub.append((Mid, B, [np.array([Mid[k], B[k]]) for k in range(len(A))]))
    halves = _coordinate_pairs(sub, model, scene, cfg, rep, depth + 1)
    for i, m in enumerate(failing):
        (XL, lL), (XR, lR) = halves[2 * i], halves[2 * i + 1]
        results[m] = (np.concatenate([XL, XR[1:]]), lL + lR)
    return results


def _crossing_at(X, t, model):
    from .robot import self_crossing
    pairs = self_crossing(X[t], model)
    if not pairs:
        pairs = [(i, j) for i in range(model.n_links) for j in range(i + 2, model.n_links)]
    return pairs


# --------------------------------------------------------------------------
# second-order diagnostic


def _norm_hessian(D: np.ndarray) -> np.ndarray:
    """Hessian of ||v|| at v = D: (I - u u^T)/d, i.e. [[dy^2, -dx dy], [-dx dy, dx^2]] / d^3."""
    dx, dy = D
    d = math.hypot(dx, dy)
    return np.array([[dy * dy, -dx * dy], [-dx * dy, dx * dx]]) / d ** 3


@dataclass
class HessianReport:
    min_eigenvalue: float
    hessian: np.ndarray
    multipliers: np.ndarray
    stationarity_residual: float
    blocks: dict


def _interior_index(N, K):
    return lambda t, k: ((t - 1) * K + k) * 2


def lagrangian_parts(X: np.ndarray, model: RobotModel):
    """Objective gradient, constraint Jacobian and Hessian pieces over interior waypoints.

    Returns:
        (g_f (n,), J (m, n), H_f (n, n), H_c list of (row, (n, n)) sparse-ish
        dense blocks) where n = 2 K (N - 2) and m = L (N - 2).
    """
    X = np.asarray(X, float)
    N, K, _ = X.shape
    n = 2 * K * (N - 2)
    idx = _interior_index(N, K)
    g = np.zeros(n)
    Hf = np.zeros((n, n))
    for k in range(K):
        for i in range(N - 1):
            D = X[i + 1, k] - X[i, k]
            d = float(np.hypot(*D))
            if d <= EPS_GEOM:
                raise SingularConfigurationError(f"key-point {k} has a zero-length step at index {i}")
            u = D / d
            H = _norm_hessian(D)
            free = [(i, -1.0), (i + 1, 1.0)]
            free = [(t, s) for t, s in free if 1 <= t <= N - 2]
            for t, s in free:
                g[idx(t, k):idx(t, k) + 2] += s * u
            for t1, s1 in free:
                for t2, s2 in free:
                    Hf[idx(t1, k):idx(t1, k) + 2, idx(t2, k):idx(t2, k) + 2] += s1 * s2 * H
    m = model.n_links * (N - 2)
    J = np.zeros((m, n))
    Hc = []
    row = 0
    for t in range(1, N - 1):
        for li, L in enumerate(model.links):
            D = X[t, L.a] - X[t, L.b]
            d = float(np.hypot(*D))
            if d <= EPS_GEOM:
                raise SingularConfigurationError(f"link {li} has coincident endpoints at index {t}")
            u = D / d
            ia, ib = idx(t, L.a), idx(t, L.b)
            J[row, ia:ia + 2] = u
            J[row, ib:ib + 2] = -u
            Hc.append((row, ia, ib, _norm_hessian(D)))
            row += 1
    return g, J, Hf, Hc


def lagrangian_hessian(X: np.ndarray, model: RobotModel, multipliers: np.ndarray) -> np.ndarray:
    """Hessian of f - sum(lambda * c) over interior waypoint coordinates."""
    _, _, Hf, Hc = lagrangian_parts(X, model)
    H = Hf.copy()
    for row, ia, ib, h in Hc:
        lam = multipliers[row]
        H[ia:ia + 2, ia:ia + 2] -= lam * h
        H[ib:ib + 2, ib:ib + 2] -= lam * h
        H[ia:ia + 2, ib:ib + 2] += lam * h
        H[ib:ib + 2, ia:ia + 2] += lam * h
    return H


def lagrangian_value(X: np.ndarray, model: RobotModel, multipliers: np.ndarray) -> float:
    f = float(path_lengths(X).sum())
    N = len(X)
    a, b = model.link_index_arrays
    D = X[1:N - 1, a] - X[1:N - 1, b]
    c = (np.hypot(D[..., 0], D[..., 1]) - model.lengths).reshape(-1)
    return f - float(np.dot(multipliers, c))


def fit_multipliers(X: np.ndarray, model: RobotModel) -> tuple:
    """Least-squares multipliers for grad f = J^T lambda; returns (lambda, residual norm)."""
    g, J, _, _ = lagrangian_parts(X, model)
    lam, *_ = np.linalg.lstsq(J.T, g, rcond=None)
    return lam, float(np.linalg.norm(J.T @ lam - g))


def hessian_diagnostic(traj, model: RobotModel, multipliers: Optional[np.ndarray] = None) -> HessianReport:
    """Minimum eigenvalue of the Lagrangian Hessian plus block summaries.

    Blocks follow the two-point pattern: diagonal 2x2 blocks of one
    key-point at one time index ("A"/"C" type), blocks coupling two
    key-points at the same time index ("B" type), and blocks coupling one
    key-point at consecutive time indices ("time" type).

    Args:
        multipliers: one per (interior time index, link), in time-major
            order; estimated by least squares when omitted.

    Raises:
        SingularConfigurationError: a zero-length step or link makes the
            Hessian undefined.
    """
    X = _arr(traj)
    N, K, _ = X.shape
    if multipliers is None:
        lam, res = fit_multipliers(X, model)
    else:
        lam = np.asarray(multipliers, float)
        g, J, _, _ = lagrangian_parts(X, model)
        res = float(np.linalg.norm(J.T @ lam - g))
    H = lagrangian_hessian(X, model, lam)
    ev = float(np.linalg.eigvalsh(H).min()) if H.size else 0.0
    idx = _interior_index(N, K)
    diag_blocks, pair_blocks, time_blocks = [], [], []
    for t in range(1, N - 1):
        for k in range(K):
            i = idx(t, k)
            diag_blocks.append(np.diag(H[i:i + 2, i:i + 2]))
            if t + 1 <= N - 2:
                j = idx(t + 1, k)
                time_blocks.append(np.diag(H[i:i + 2, j:j + 2]))
        for L in model.links:
            ia, ib = idx(t, L.a), idx(t, L.b)
            pair_blocks.append(np.diag(H[ia:ia + 2, ib:ib + 2]))

    def summary(blocks):
        if not blocks:
            return {"count": 0}
        B = np.array(blocks)
        return {"count": len(B), "diag_min": float(B.min()), "diag_max": float(B.max()),
                "frac_diag_positive": float(np.mean(B > 0)), "frac_diag_negative": float(np.mean(B < 0))}

    return HessianReport(ev, H, lam, res, {"A": summary(diag_blocks), "B": summary(pair_blocks),
                                           "time": summary(time_blocks)})


def gradient_alignment(traj, model: RobotModel) -> float:
    """|cos| between the total length gradient and the link-residual gradient.

    The residual gradient is J^T c, the gradient of half the squared
    link-length residuals, over all interior waypoint coordinates.
    """
    X = _arr(traj)
    g, J, _, _ = lagrangian_parts(X, model)
    N = len(X)
    a, b = model.link_index_arrays
    D = X[1:N - 1, a] - X[1:N - 1, b]
    c = (np.hypot(D[..., 0], D[..., 1]) - model.lengths).reshape(-1)
    gc = J.T @ c
    ng, nc = np.linalg.norm(g), np.linalg.norm(gc)
    if ng == 0 or nc == 0:
        return 0.0
    return float(abs(g @ gc) / (ng * nc))
