"""
Intermediate robot states along a topological route.

The root key-point follows its shortest point path; every other key-point is
placed breadth-first from the root, keeping the direction toward its previous
position and resolving collisions by penetration pushes, then by rotating
about its parent. Consecutive states are validated with per-link sweeps and
dense self-crossing checks; failing pairs are subdivided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .decomp import Decomposition, decompose
from .errors import (InfeasibleStateError, InvalidEndpointError, NoPathError, PlanningFailure,
                     PreconditionError, ValidationFailure)
from .geom import EPS_GEOM, Disk, Segment, penetration_vector, seg_seg_dist_broadcast, segment_intersect
from .robot import (link_mtv, linear_states, point_clearance, segment_clearance, states_self_cross,
                    sweep_check, BOUNDS_ID)
from .scene import RobotModel, RobotState, Scene, constraint_violation
from .visibility import VisibilityGraph, build_visibility_graph, shortest_point_path


@dataclass(frozen=True)
class SearchConfig:
    max_routes: int = 5
    dphi: float = math.pi / 36
    max_rotations: int = 72
    rotation_refine: int = 10  # rotational sweep resolution is dphi / rotation_refine
    max_pushes: int = 3
    sweep_steps: int = 32
    max_subdivisions: int = 8
    max_advance: Optional[float] = None  # defaults to the shortest link length
    self_cross_samples: int = 33
    unfold_samples: int = 513  # dense re-check of the two halves around an unfolding state
    reorient_threshold: float = math.pi / 2
    reorient_step: float = math.pi / 6
    route_sample_step: float = 0.05
    adjust_margin: float = 2e-3


def _pos(state) -> np.ndarray:
    return state.positions if isinstance(state, RobotState) else np.asarray(state, float)


# --------------------------------------------------------------------------
# link-angle representation


def link_angles(positions, model: RobotModel) -> np.ndarray:
    """Absolute angle of each BFS link (parent -> child), in BFS order."""
    P = _pos(positions)
    return np.array([math.atan2(P[c, 1] - P[p, 1], P[c, 0] - P[p, 0]) for p, c, _ in model.bfs])


def from_angles(root_pos, angles, model: RobotModel) -> np.ndarray:
    P = np.zeros((model.n_keypoints, 2))
    P[model.root] = root_pos
    for (p, c, li), th in zip(model.bfs, angles):
        P[c] = P[p] + model.links[li].length * np.array([math.cos(th), math.sin(th)])
    return P


def angle_interpolate(A, B, t: float, model: RobotModel) -> np.ndarray:
    """Root moves linearly, every link angle turns by the shorter way."""
    A, B = _pos(A), _pos(B)
    a0, a1 = link_angles(A, model), link_angles(B, model)
    d = (a1 - a0 + math.pi) % (2 * math.pi) - math.pi
    root = (1 - t) * A[model.root] + t * B[model.root]
    return from_angles(root, a0 + t * d, model)


def orientation(positions, model: RobotModel) -> float:
    """Angle of the vector from the root to the key-point centroid."""
    P = _pos(positions)
    v = P.mean(axis=0) - P[model.root]
    return math.atan2(v[1], v[0])


# --------------------------------------------------------------------------
# placement


class _Placer:
    def __init__(self, model: RobotModel, scene: Scene, config: SearchConfig):
        self.model = model
        self.scene = scene
        self.cfg = config
        self.r = model.radius_array

    def link_clear(self, P, placed_links, li, parent, child, margin: float = 0.0) -> bool:
        L = self.model.links[li]
        A, B = P[L.a], P[L.b]
        c = segment_clearance(A[None], B[None], self.r[L.a], self.r[L.b], L.width / 2, self.scene)
        if np.any(c < max(margin, 0.0) - EPS_GEOM):
            return False
        return not self._crosses(P, placed_links, li)

    def _crosses(self, P, placed_links, li) -> bool:
        L = self.model.links[li]
        others = [j for j in placed_links if not {L.a, L.b} & {self.model.links[j].a, self.model.links[j].b}]
        if not others:
            return False
        a = np.array([P[self.model.links[j].a] for j in others])
        b = np.array([P[self.model.links[j].b] for j in others])
        d = seg_seg_dist_broadcast(P[L.a][None], P[L.b][None], a, b)
        return bool(np.any(d <= EPS_GEOM))

    def root(self, target) -> np.ndarray:
        p = np.array(target, float)
        rr = self.r[self.model.root]
        for _ in range(self.cfg.max_pushes + 1):
            c = point_clearance(p[None], rr, self.scene)[0]
            bad = np.flatnonzero(c < -EPS_GEOM)
            if len(bad) == 0:
                return p
            k = bad[np.argmin(c[bad])]
            if k == len(c) - 1:
                xmin, ymin, xmax, ymax = self.scene.bounds
                p = np.array([min(max(p[0], xmin + rr), xmax - rr), min(max(p[1], ymin + rr), ymax - rr)])
            else:
                pen = penetration_vector(Disk(tuple(p), rr), self.scene.obstacles[k])
                if pen is None:
                    return p
                p = p + pen.vector * (1 + 1e-9) + pen.direction * 1e-9
        raise InfeasibleStateError(f"root key-point cannot be placed near {tuple(map(float, target))}")

    def place(self, root_pos, guide: np.ndarray, prev: Optional[np.ndarray] = None) -> np.ndarray:
        """BFS placement from a fixed root toward guide positions."""
        m = self.model
        P = np.array(guide, float)
        P[m.root] = root_pos
        placed = []
        for p, c, li in m.bfs:
            l = m.links[li].length
            u = P[c] - P[p]
            n = float(np.hypot(*u))
            if n <= EPS_GEOM and prev is not None:
                u = prev[c] - prev[p]
                n = float(np.hypot(*u))
            if n <= EPS_GEOM:
                u, n = np.array([1.0, 0.0]), 1.0
            u = u / n
            P[c] = P[p] + l * u
            if not self.link_clear(P, placed, li, p, c):
                P[c] = self._adjust(P, placed, li, p, c, u)
            placed.append(li)
        return P

    def _adjust(self, P, placed, li, p, c, u0) -> np.ndarray:
        # adjusted links keep a small margin: two states that both touch an
        # obstacle interpolate into it, so zero-margin placements never validate
        try:
            return self._adjust_with(P, placed, li, p, c, u0, self.cfg.adjust_margin)
        except InfeasibleStateError:
            if self.cfg.adjust_margin <= 0:
                raise
            return self._adjust_with(P, placed, li, p, c, u0, 0.0)

    def _contact_arm(self, pp, pc, k, L, p) -> float:
        """Distance from the parent to the deepest point of the link against obstacle k."""
        ts = np.linspace(0.0, 1.0, 41)[1:]
        pts = pp + ts[:, None] * (pc - pp)
        cl = point_clearance(pts, 0.0, self.scene)[:, k]
        return max(float(ts[int(np.argmin(cl))]), 0.05) * L.length

    def _adjust_with(self, P, placed, li, p, c, u0, margin) -> np.ndarray:
        m = self.model
        L = m.links[li]
        l = L.length
        Q = P.copy()
        for _ in range(self.cfg.max_pushes):
            A, B = Q[L.a], Q[L.b]
            cl = segment_clearance(A[None], B[None], self.r[L.a], self.r[L.b], L.width / 2, self.scene)[0]
            k = int(np.argmin(cl))
            if cl[k] >= margin - EPS_GEOM:
                break
            pen = link_mtv(A, B, self.r[L.a], self.r[L.b], L.width / 2, self.scene,
                           BOUNDS_ID if k == len(cl) - 1 else k)
            if pen is None:
                break
            # only rotation about the parent keeps the length, so use the push
            # component across the link, scaled by the lever arm of the contact
            u = (Q[c] - Q[p]) / l
            v = pen.vector + pen.direction * (margin + 1e-9)
            v_perp = v - (v @ u) * u
            if np.hypot(*v_perp) <= EPS_GEOM:
                break
            s_arm = self._contact_arm(Q[p], Q[c], k, L, p)
            w = u * l + v_perp * (l / s_arm)
            if w @ u <= 0:
                break
            Q[c] = Q[p] + l * w / float(np.hypot(*w))
            if self.link_clear(Q, placed, li, p, c, margin):
                return Q[c]
        phi0 = math.atan2(u0[1], u0[0])
        phis = rotation_candidates(phi0, self.cfg.dphi / self.cfg.rotation_refine,
                                   self.cfg.max_rotations * self.cfg.rotation_refine)
        C = Q[p] + l * np.stack([np.cos(phis), np.sin(phis)], axis=1)
        A = np.broadcast_to(Q[p], C.shape)
        ra, rb = (self.r[p], self.r[c]) if L.a == p else (self.r[c], self.r[p])
        cl = segment_clearance(A, C, ra, rb, L.width / 2, self.scene)
        ok = np.all(cl >= margin - EPS_GEOM, axis=1)
        others = [j for j in placed if not {L.a, L.b} & {m.links[j].a, m.links[j].b}]
        if others:
            oa = np.array([Q[m.links[j].a] for j in others])
            ob = np.array([Q[m.links[j].b] for j in others])
            d = seg_seg_dist_broadcast(A[:, None], C[:, None], oa[None], ob[None])
            ok &= np.all(d > EPS_GEOM, axis=1)
        hit = np.flatnonzero(ok)
        if len(hit):
            return C[hit[0]].copy()
        raise InfeasibleStateError(f"key-point {c} cannot be placed collision-free around key-point {p}")


def rotation_candidates(phi0: float, dphi: float = math.pi / 36, n: int = 72) -> np.ndarray:
    """Angles tried by the rotational sweep, in order."""
    k = np.arange(1, n + 1)
    return phi0 + np.where(k % 2 == 1, 1, -1) * ((k + 1) // 2) * dphi


def find_next_state(P: RobotState, base_path, model: RobotModel, scene: Scene,
                    config: Optional[SearchConfig] = None) -> RobotState:
    """Advance the root to the next base-path waypoint and re-place the robot.

    Args:
        P: current collision-free state.
        base_path: polyline for the root key-point; the next waypoint is its
            first vertex different from the current root position.

    Returns:
        New state with every link length exact.

    Raises:
        InfeasibleStateError: some key-point cannot be adjusted collision-free.
    """
    cfg = config or SearchConfig()
    cur = _pos(P)
    path = np.asarray(base_path, float).reshape(-1, 2)
    d = np.hypot(*(path - cur[model.root]).T)
    nxt = np.flatnonzero(d > EPS_GEOM)
    if len(nxt) == 0:
        return RobotState(cur)
    placer = _Placer(model, scene, cfg)
    root = placer.root(path[nxt[0]])
    return RobotState(placer.place(root, cur, prev=cur))


# --------------------------------------------------------------------------
# validation of consecutive states


def pair_problem(A, B, model: RobotModel, scene: Scene, config: SearchConfig, decomp: Optional[Decomposition] = None):
    """Why the straight interpolation A -> B is invalid, or None.

    Returns one of None, ("sweep", link), ("self", pairs), ("region", keypoint).
    """
    for li in range(model.n_links):
        if not sweep_check(li, A, B, model, scene, config.sweep_steps).ok:
            return ("sweep", li)
    S = linear_states(_pos(A), _pos(B), config.self_cross_samples)
    hits = states_self_cross(S, model)
    if np.any(hits):
        pairs = set()
        for s in np.flatnonzero(hits):
            from .robot import self_crossing
            pairs.update(self_crossing(S[s], model))
        if not pairs:
            pairs = _near_pairs(S[hits], model)
        return ("self", sorted(pairs))
    if decomp is not None:
        ra = decomp.locate_many(_pos(A))
        rb = decomp.locate_many(_pos(B))
        for k, (x, y) in enumerate(zip(ra, rb)):
            if x != y and x >= 0 and y >= 0 and not decomp.graph.has_edge(int(x), int(y)):
                return ("region", k)
    return None


def _near_pairs(S, model):
    out = set()
    for i in range(model.n_links):
        for j in range(i + 1, model.n_links):
            li, lj = model.links[i], model.links[j]
            if {li.a, li.b} & {lj.a, lj.b}:
                continue
            d = seg_seg_dist_broadcast(S[:, li.a], S[:, li.b], S[:, lj.a], S[:, lj.b])
            if np.any(d <= EPS_GEOM):
                out.add((i, j))
    return out


# --------------------------------------------------------------------------
# unfolding


def _tree_path(model: RobotModel, u: int, v: int) -> list:
    """Key-points on the tree path between u and v."""
    up = lambda k: [k] + (up(model.parent[k]) if model.parent[k] >= 0 else [])
    pu, pv = up(u), up(v)
    common = next(k for k in pu if k in pv)
    return pu[:pu.index(common) + 1] + list(reversed(pv[:pv.index(common)]))


def _depth(model: RobotModel, k: int) -> int:
    d = 0
    while model.parent[k] >= 0:
        k = model.parent[k]
        d += 1
    return d


def insert_unfolding_state(A, B, crossing, model: RobotModel, scene: Scene,
                           config: Optional[SearchConfig] = None) -> RobotState:
    """Straightened intermediate state that removes a self-crossing.

    The sub-chain spanning the crossing links is laid out collinearly from
    its proximal joint toward the midpoint of its distal key-point in A and
    B. The rest of the robot sits halfway between A and B (link angles
    interpolated). If that state collides, or either half still self-crosses,
    the straightening direction is rotated in alternating steps.

    Raises:
        InfeasibleStateError: every direction fails.
    """
    cfg = config or SearchConfig()
    PA, PB = _pos(A), _pos(B)
    if np.array_equal(PA, PB):
        return RobotState(PA)
    crossing = [tuple(c) for c in crossing]
    if not crossing:
        raise PreconditionError("no crossing link pairs given")
    kps = set()
    for i, j in crossing:
        for li in (i, j):
            kps.update((model.links[li].a, model.links[li].b))
    kps = sorted(kps, key=lambda k: (_depth(model, k), k))
    proximal = kps[0]
    distal = kps[-1]
    chain = _tree_path(model, proximal, distal)
    if _depth(model, chain[0]) > _depth(model, chain[-1]):
        chain = chain[::-1]
    # proximal joint must be the shallowest key-point on the path
    top = min(chain, key=lambda k: _depth(model, k))
    if top != chain[0]:
        chain = chain[chain.index(top):]
    proximal, distal = chain[0], chain[-1]

    mid = angle_interpolate(PA, PB, 0.5, model)
    target = 0.5 * (PA[distal] + PB[distal])
    d = target - mid[proximal]
    if np.hypot(*d) <= EPS_GEOM:
        d = mid[distal] - mid[proximal]
    phi0 = math.atan2(d[1], d[0])

    def build(phi):
        Q = mid.copy()
        u = np.array([math.cos(phi), math.sin(phi)])
        for k in range(1, len(chain)):
            a, b = chain[k - 1], chain[k]
            l = next(L.length for L in model.links if {L.a, L.b} == {a, b})
            shift = Q[a] + l * u - Q[b]
            # carry the subtree hanging from b along with it
            for s in model.subtree(b):
                Q[s] = Q[s] + shift
        return Q

    from .robot import is_collision_free, self_crossing
    for phi in np.concatenate([[phi0], rotation_candidates(phi0, cfg.dphi, cfg.max_rotations)]):
        Q = build(phi)
        if not is_collision_free(Q, model, scene) or self_crossing(Q, model):
            continue
        halves = np.concatenate([linear_states(PA, Q, cfg.unfold_samples),
                                 linear_states(Q, PB, cfg.unfold_samples)])
        if np.any(states_self_cross(halves, model)):
            continue
        return RobotState(Q)
    raise InfeasibleStateError("no straightened intermediate state is collision-free")


# --------------------------------------------------------------------------
# planning


class _Context:
    def __init__(self, model, scene, decomp, cfg):
        self.model = model
        self.scene = scene
        self.decomp = decomp
        self.cfg = cfg
        self.placer = _Placer(model, scene, cfg)
        self._vis = {}

    def vis(self, r) -> VisibilityGraph:
        if r not in self._vis:
            self._vis[r] = build_visibility_graph(self.scene, r)
        return self._vis[r]

    def route_filter(self, route):
        allowed = np.zeros(len(self.decomp.regions), dtype=bool)
        allowed[list(route)] = True
        step = self.cfg.route_sample_step

        def ok(A, B):
            if len(A) == 0:
                return np.zeros(0, bool)
            L = np.hypot(*(B - A).T)
            n = np.maximum(2, np.ceil(L / step).astype(int) + 1)
            out = np.ones(len(A), dtype=bool)
            ts = [np.linspace(0, 1, k) for k in n]
            pts = np.concatenate([A[i] + t[:, None] * (B[i] - A[i]) for i, t in enumerate(ts)])
            owner = np.repeat(np.arange(len(A)), n)
            reg = self.decomp.locate_many(pts)
            good = (reg >= 0) & allowed[np.maximum(reg, 0)]
            np.logical_and.at(out, owner, good)
            return out
        return ok


def densify(path: np.ndarray, max_step: float) -> np.ndarray:
    """Insert points so no polyline step exceeds max_step."""
    out = [path[0]]
    for a, b in zip(path[:-1], path[1:]):
        L = float(np.hypot(*(b - a)))
        n = max(1, int(math.ceil(L / max_step - 1e-9)))
        for k in range(1, n + 1):
            out.append(a + (b - a) * k / n)
    return np.array(out)


def _reorient(state: np.ndarray, goal: np.ndarray, ctx: _Context) -> list:
    m = ctx.model
    err = (orientation(goal, m) - orientation(state, m) + math.pi) % (2 * math.pi) - math.pi
    if abs(err) <= ctx.cfg.reorient_threshold:
        return []
    root = state[m.root]
    for total in (err, err - math.copysign(2 * math.pi, err)):
        n = max(1, int(math.ceil(abs(total) / ctx.cfg.reorient_step - 1e-9)))
        out = []
        ok = True
        for k in range(1, n + 1):
            th = total * k / n
            R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
            Q = (state - root) @ R.T + root
            from .robot import is_collision_free
            if not is_collision_free(Q, m, ctx.scene):
                ok = False
                break
            out.append(Q)
        if ok:
            return out
    raise InfeasibleStateError("in-place reorientation collides in both directions")


def _midpoint_state(A: np.ndarray, B: np.ndarray, ctx: _Context) -> np.ndarray:
    m = ctx.model
    ra, rb = A[m.root], B[m.root]
    try:
        path = shortest_point_path(ctx.vis(ctx.model.radii[m.root]), ra, rb)
        seg = np.hypot(*np.diff(path, axis=0).T)
        half = 0.5 * seg.sum()
        cum = np.concatenate([[0], np.cumsum(seg)])
        i = min(int(np.searchsorted(cum, half, side="right")) - 1, len(seg) - 1)
        t = (half - cum[i]) / seg[i] if seg[i] > 0 else 0.0
        root = path[i] + t * (path[i + 1] - path[i])
    except (NoPathError, InvalidEndpointError):
        root = 0.5 * (ra + rb)
    guide = angle_interpolate(A, B, 0.5, m)
    guide = guide - guide[m.root] + root
    root = ctx.placer.root(root)
    return ctx.placer.place(root, guide, prev=A)


def _fix_pair(A: np.ndarray, B: np.ndarray, ctx: _Context, depth: int) -> list:
    prob = pair_problem(A, B, ctx.model, ctx.scene, ctx.cfg, ctx.decomp)
    if prob is None:
        return [A, B]
    if depth >= ctx.cfg.max_subdivisions:
        raise ValidationFailure(f"interpolation still invalid after {depth} subdivisions ({prob[0]})")
    if prob[0] == "self":
        M = _pos(insert_unfolding_state(A, B, prob[1], ctx.model, ctx.scene, ctx.cfg))
    else:
        M = _midpoint_state(A, B, ctx)
    if np.allclose(M, A, atol=1e-12) or np.allclose(M, B, atol=1e-12):
        raise ValidationFailure("subdivision made no progress")
    return _fix_pair(A, M, ctx, depth + 1) + _fix_pair(M, B, ctx, depth + 1)[1:]


def validate_states(states, model, scene, config: Optional[SearchConfig] = None, decomp=None):
    """First failing consecutive pair as (index, problem), or None."""
    cfg = config or SearchConfig()
    for i in range(len(states) - 1):
        p = pair_problem(states[i], states[i + 1], model, scene, cfg, decomp)
        if p is not None:
            return i, p
    return None


def _check_endpoint(name, S, model, scene):
    from .robot import is_collision_free, self_crossing
    if constraint_violation(S, model) > 1e-6:
        raise InvalidEndpointError(f"{name} state violates the link lengths")
    if not is_collision_free(S, model, scene) or self_crossing(S, model):
        raise InvalidEndpointError(f"{name} state is in collision")


def plan_intermediate_states(start: RobotState, goal: RobotState, model: RobotModel, scene: Scene,
                             decomposition: Optional[Decomposition] = None,
                             config: Optional[SearchConfig] = None) -> list:
    """Collision-free state sequence from start to goal.

    Tries up to ``config.max_routes`` region routes in order of estimated
    cost. Along a route the root follows its clearance-aware shortest path
    restricted to the route's regions, the other key-points trail behind it,
    in-place reorientation states are appended when the arrival orientation
    is more than ``reorient_threshold`` off the goal, and every consecutive
    pair is then validated and subdivided where needed.

    Raises:
        InvalidEndpointError: start or goal invalid.
        NoPathError: no region route connects start and goal.
        PlanningFailure: all routes exhausted.
    """
    cfg = config or SearchConfig()
    S0, G0 = _pos(start), _pos(goal)
    _check_endpoint("start", S0, model, scene)
    _check_endpoint("goal", G0, model, scene)
    if np.array_equal(S0, G0):
        return [RobotState(S0)]
    decomp = decomposition if decomposition is not None else decompose(scene)
    if pair_problem(S0, G0, model, scene, cfg, decomp) is None:
        return [RobotState(S0), RobotState(G0)]
    ctx = _Context(model, scene, decomp, cfg)
    rs, rg = decomp.locate(S0[model.root]), decomp.locate(G0[model.root])
    if rs < 0 or rg < 0:
        raise InvalidEndpointError("root key-point is not in free space")
    routes = decomp.route(rs, rg, k=cfg.max_routes)
    step = cfg.max_advance or float(model.lengths.min()) if model.n_links else (cfg.max_advance or 1.0)
    rr = model.radii[model.root]
    errors = []
    for route in routes:
        try:
            path = shortest_point_path(ctx.vis(rr), S0[model.root], G0[model.root],
                                       edge_filter=ctx.route_filter(route))
            states = [S0]
            for w in densify(path, step)[1:]:
                root = ctx.placer.root(w)
                states.append(ctx.placer.place(root, states[-1], prev=states[-1]))
            states += _reorient(states[-1], G0, ctx)
            states.append(G0)
            out = [states[0]]
            for A, B in zip(states[:-1], states[1:]):
                if np.array_equal(A, B):
                    continue
                out += _fix_pair(A, B, ctx, 0)[1:]
            return [RobotState(s) for s in out]
        except (InfeasibleStateError, NoPathError, ValidationFailure) as e:
            errors.append(f"route {route}: {e}")
    raise PlanningFailure("all region routes exhausted: " + "; ".join(errors))
