"""
Collision and self-collision checks for link robots.

A link occupies the width-w rectangle between its key-points together with
the two key-point disks.  Because every radius is at least w/2, that union
equals a capsule of radius w/2 plus the disks, so overlap reduces to point
and segment distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geom import (EPS_GEOM, Disk, Penetration, WideSegment, penetration_vector,
                   seg_seg_dist_broadcast, segment_intersect, Segment)
from .scene import RobotModel, RobotState, Scene

BOUNDS_ID = -1
DEFAULT_SWEEP_STEPS = 32


# --------------------------------------------------------------------------
# vectorised clearance kernel


class _EdgeKernel:
    """Obstacle edges as contiguous coordinate rows for the distance kernels."""

    def __init__(self, scene: Scene):
        ea, eb, ids = scene.edge_arrays
        self.x0 = ea[:, 0][None].copy()
        self.y0 = ea[:, 1][None].copy()
        self.x1 = eb[:, 0][None].copy()
        self.y1 = eb[:, 1][None].copy()
        self.dx = self.x1 - self.x0
        self.dy = self.y1 - self.y0
        L2 = self.dx ** 2 + self.dy ** 2
        self.inv = np.where(L2 > 0, 1.0 / np.where(L2 > 0, L2, 1.0), 0.0)
        self.starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]]) if len(ids) else np.zeros(0, int)
        # edge i ends where edge nxt[i] starts (edges are contiguous per obstacle)
        nxt = np.arange(len(ids)) + 1
        ends = np.r_[self.starts[1:], len(ids)] if len(ids) else np.zeros(0, int)
        nxt[ends - 1] = self.starts
        self.nxt = nxt


def _kernel(scene: Scene) -> _EdgeKernel:
    k = scene.__dict__.get("_edge_kernel")
    if k is None:
        k = scene.__dict__["_edge_kernel"] = _EdgeKernel(scene)
    return k


def _pt_edges_d2(px, py, K: _EdgeKernel):
    wx = px - K.x0
    wy = py - K.y0
    t = (wx * K.dx + wy * K.dy) * K.inv
    np.clip(t, 0.0, 1.0, out=t)
    wx -= t * K.dx
    wy -= t * K.dy
    return wx * wx + wy * wy


def _point_obstacle_dist(P: np.ndarray, scene: Scene) -> np.ndarray:
    """(M, O) distances from points to each obstacle region (0 inside)."""
    if len(scene.obstacles) == 0:
        return np.zeros((len(P), 0))
    K = _kernel(scene)
    x, y = P[:, 0:1], P[:, 1:2]
    dmin = np.sqrt(np.minimum.reduceat(_pt_edges_d2(x, y, K), K.starts, axis=1))
    cond = (K.y0 > y) != (K.y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = K.x0 + (y - K.y0) * K.dx / K.dy
    cross = (cond & (x < xint)).astype(np.int32)
    inside = (np.add.reduceat(cross, K.starts, axis=1) % 2) == 1
    return np.where(inside & (dmin > EPS_GEOM), 0.0, dmin)


def _segment_obstacle_dist(A: np.ndarray, B: np.ndarray, scene: Scene) -> np.ndarray:
    """(M, O) distances from segments A_i B_i to each obstacle boundary."""
    if len(scene.obstacles) == 0:
        return np.zeros((len(A), 0))
    K = _kernel(scene)
    ax, ay, bx, by = A[:, 0:1], A[:, 1:2], B[:, 0:1], B[:, 1:2]
    sdx, sdy = bx - ax, by - ay
    sL2 = sdx * sdx + sdy * sdy
    sinv = np.where(sL2 > 0, 1.0 / np.where(sL2 > 0, sL2, 1.0), 0.0)
    d2 = np.minimum(_pt_edges_d2(ax, ay, K), _pt_edges_d2(bx, by, K))
    # obstacle vertices against the segment
    wx = K.x0 - ax
    wy = K.y0 - ay
    o1 = sdx * wy - sdy * wx
    t = (wx * sdx + wy * sdy) * sinv
    np.clip(t, 0.0, 1.0, out=t)
    wx -= t * sdx
    wy -= t * sdy
    dv = wx * wx + wy * wy
    d2 = np.minimum(np.minimum(d2, dv), dv[:, K.nxt])
    o2 = o1[:, K.nxt]
    o3 = K.dx * (ay - K.y0) - K.dy * (ax - K.x0)
    o4 = K.dx * (by - K.y0) - K.dy * (bx - K.x0)
    proper = (((o1 > 0) & (o2 < 0)) | ((o1 < 0) & (o2 > 0))) & (((o3 > 0) & (o4 < 0)) | ((o3 < 0) & (o4 > 0)))
    d2[proper] = 0.0
    return np.sqrt(np.minimum.reduceat(d2, K.starts, axis=1))


def _bounds_slack(P: np.ndarray, scene: Scene) -> np.ndarray:
    xmin, ymin, xmax, ymax = scene.bounds
    return np.minimum(np.minimum(P[:, 0] - xmin, xmax - P[:, 0]), np.minimum(P[:, 1] - ymin, ymax - P[:, 1]))


def segment_clearance(A, B, ra, rb, hw, scene: Scene) -> np.ndarray:
    """Clearance of M link shapes against every obstacle and the bounds.

    Args:
        A, B: (M, 2) link endpoints.
        ra, rb: (M,) key-point radii at A and B.
        hw: (M,) link half-widths.

    Returns:
        (M, O + 1) array; column O is the bounds. Negative means overlap.
    """
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    M = len(A)
    ra = np.broadcast_to(np.asarray(ra, float), (M,))
    rb = np.broadcast_to(np.asarray(rb, float), (M,))
    hw = np.broadcast_to(np.asarray(hw, float), (M,))
    PA = _point_obstacle_dist(A, scene) - ra[:, None]
    PB = _point_obstacle_dist(B, scene) - rb[:, None]
    body = _segment_obstacle_dist(A, B, scene) - hw[:, None]
    obst = np.minimum(np.minimum(PA, PB), body)
    bnd = np.minimum(_bounds_slack(A, scene) - ra, _bounds_slack(B, scene) - rb)
    return np.concatenate([obst, bnd[:, None]], axis=1)


def point_clearance(P, r, scene: Scene) -> np.ndarray:
    """(M, O + 1) clearance of disks (bounds in the last column)."""
    P = np.asarray(P, float).reshape(-1, 2)
    r = np.broadcast_to(np.asarray(r, float), (len(P),))
    return np.concatenate([_point_obstacle_dist(P, scene) - r[:, None], (_bounds_slack(P, scene) - r)[:, None]], axis=1)


def states_clearance(positions: np.ndarray, model: RobotModel, scene: Scene) -> np.ndarray:
    """Clearance for a batch of states: (S, K, 2) -> (S, L, O + 1)."""
    pos = np.asarray(positions, float)
    S = pos.shape[0]
    L = model.n_links
    if L == 0:
        c = point_clearance(pos[:, 0, :], model.radii[0], scene)
        return c[:, None, :]
    a, b = model.link_index_arrays
    A = pos[:, a, :].reshape(-1, 2)
    B = pos[:, b, :].reshape(-1, 2)
    r = model.radius_array
    c = segment_clearance(A, B, np.tile(r[a], S), np.tile(r[b], S), np.tile(model.half_widths, S), scene)
    return c.reshape(S, L, -1)


def states_collide(positions: np.ndarray, model: RobotModel, scene: Scene, chunk: int = 4096) -> np.ndarray:
    """Boolean (S,) mask of states with any obstacle or bounds overlap."""
    pos = np.asarray(positions, float)
    out = np.zeros(pos.shape[0], dtype=bool)
    for s in range(0, pos.shape[0], chunk):
        c = states_clearance(pos[s:s + chunk], model, scene)
        out[s:s + chunk] = np.any(c < -EPS_GEOM, axis=(1, 2))
    return out


def min_clearance(positions: np.ndarray, model: RobotModel, scene: Scene) -> float:
    pos = np.asarray(positions, float)
    best = math.inf
    for s in range(0, pos.shape[0], 4096):
        c = states_clearance(pos[s:s + 4096], model, scene)
        if c.size:
            best = min(best, float(c.min()))
    return best


# --------------------------------------------------------------------------
# collision report


@dataclass(frozen=True)
class Collision:
    link: int
    obstacle: int
    penetration: Penetration

    @property
    def vector(self) -> np.ndarray:
        return self.penetration.vector


def _bounds_push(A, B, ra, rb, scene) -> np.ndarray:
    xmin, ymin, xmax, ymax = scene.bounds
    push = np.zeros(2)
    for ax, lo, hi in ((0, xmin, xmax), (1, ymin, ymax)):
        need_up = max(lo + ra - A[ax], lo + rb - B[ax], 0.0)
        need_dn = max(A[ax] + ra - hi, B[ax] + rb - hi, 0.0)
        push[ax] = need_up - need_dn
    return push


def link_mtv(A, B, ra, rb, hw, scene: Scene, obstacle: int) -> Optional[Penetration]:
    """Minimum translation separating one link shape from one obstacle (or bounds)."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    if obstacle == BOUNDS_ID:
        v = _bounds_push(A, B, ra, rb, scene)
        n = float(np.hypot(*v))
        if n == 0.0:
            return None
        return Penetration(v / n, n)
    poly = scene.obstacles[obstacle]
    sub = Scene(scene.bounds, [poly]) if len(scene.obstacles) != 1 else scene

    def clear(ts: np.ndarray) -> np.ndarray:
        c = segment_clearance(A[None] + ts, B[None] + ts, ra, rb, hw, sub)
        return c[:, 0] >= -EPS_GEOM

    cands = []
    for probe in (Disk(tuple(A), ra), Disk(tuple(B), rb), WideSegment(tuple(A), tuple(B), hw)):
        pen = penetration_vector(probe, poly)
        if pen is not None:
            cands.append(pen)
    if not cands:
        return None
    ts = np.array([p.vector for p in cands])
    ok = clear(ts)
    feasible = [p for p, good in zip(cands, ok) if good]
    if feasible:
        return min(feasible, key=lambda p: (round(p.depth, 12), math.atan2(p.direction[1], p.direction[0]) % (2 * math.pi)))
    return _directional_link_mtv(clear, reach=scene.diagonal)


def _directional_link_mtv(clear, n_dirs: int = 360, reach: float = 100.0) -> Optional[Penetration]:
    th = 2 * np.pi * np.arange(n_dirs) / n_dirs
    U = np.stack([np.cos(th), np.sin(th)], axis=1)
    hi = np.full(n_dirs, 1e-3)
    lo = np.zeros(n_dirs)
    done = clear(U * hi[:, None])
    while not np.all(done) and hi.max() < reach:
        lo = np.where(done, lo, hi)
        hi = np.where(done, hi, hi * 2)
        done = done | clear(U * hi[:, None])
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        ok = clear(U * mid[:, None])
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    hi = np.where(done, hi, np.inf)
    k = int(np.argmin(hi))
    if not np.isfinite(hi[k]):
        return None
    return Penetration(U[k], float(hi[k]))


def robot_collides(state: RobotState, model: RobotModel, scene: Scene) -> list:
    """All (link, obstacle) overlaps of a state with their separating translations.

    Obstacle id -1 stands for leaving the world bounds. A robot without
    links reports its single key-point disk as link -1.
    """
    pos = state.positions if isinstance(state, RobotState) else np.asarray(state, float)
    clr = states_clearance(pos[None], model, scene)[0]
    report = []
    O = len(scene.obstacles)
    r = model.radius_array
    for li, col in zip(*np.nonzero(clr < -EPS_GEOM)):
        obstacle = BOUNDS_ID if col == O else int(col)
        if model.n_links == 0:
            A = B = pos[0]
            ra = rb = r[0]
            hw = 0.0
            li = -1
        else:
            link = model.links[li]
            A, B = pos[link.a], pos[link.b]
            ra, rb, hw = r[link.a], r[link.b], link.width / 2
        pen = link_mtv(A, B, ra, rb, hw, scene, obstacle)
        if pen is None:
            pen = Penetration(np.array([1.0, 0.0]), 0.0)
        report.append(Collision(int(li), obstacle, pen))
    return report


def is_collision_free(state, model: RobotModel, scene: Scene) -> bool:
    pos = state.positions if isinstance(state, RobotState) else np.asarray(state, float)
    return not states_collide(pos[None], model, scene)[0]


# --------------------------------------------------------------------------
# self crossing


def adjacent_links(model: RobotModel, i: int, j: int) -> bool:
    li, lj = model.links[i], model.links[j]
    return bool({li.a, li.b} & {lj.a, lj.b})


def self_crossing(state, model: RobotModel) -> list:
    """Pairs (i, j), i < j, of non-adjacent links whose segments intersect."""
    pos = state.positions if isinstance(state, RobotState) else np.asarray(state, float)
    out = []
    for i in range(model.n_links):
        for j in range(i + 1, model.n_links):
            if adjacent_links(model, i, j):
                continue
            li, lj = model.links[i], model.links[j]
            if segment_intersect(Segment(pos[li.a], pos[li.b]), Segment(pos[lj.a], pos[lj.b])) is not None:
                out.append((i, j))
    return out


def _nonadjacent_pairs(model: RobotModel):
    pairs = [(i, j) for i in range(model.n_links) for j in range(i + 1, model.n_links)
             if not adjacent_links(model, i, j)]
    return np.array(pairs, dtype=int).reshape(-1, 2)


def states_self_cross(positions: np.ndarray, model: RobotModel) -> np.ndarray:
    """Boolean (S,) mask: any non-adjacent link pair intersecting (within EPS_GEOM)."""
    pos = np.asarray(positions, float)
    pairs = _nonadjacent_pairs(model)
    if len(pairs) == 0:
        return np.zeros(pos.shape[0], dtype=bool)
    a, b = model.link_index_arrays
    i, j = pairs[:, 0], pairs[:, 1]
    d = seg_seg_dist_broadcast(pos[:, a[i], :], pos[:, b[i], :], pos[:, a[j], :], pos[:, b[j], :])
    return np.any(d <= EPS_GEOM, axis=1)


# --------------------------------------------------------------------------
# sweep check


@dataclass(frozen=True)
class SweepResult:
    ok: bool
    t_fail: Optional[float] = None

    def __bool__(self):
        return self.ok


def interpolate_link(pa0, pb0, pa1, pb1, length: float, ts: np.ndarray):
    """Length-preserving interpolation of one link's endpoints.

    Both endpoints move linearly; each sample is then stretched or shrunk
    symmetrically about its midpoint back to ``length``. When the linear
    endpoints coincide, the link angle is interpolated instead.
    """
    ts = np.asarray(ts, float)[:, None]
    pa = (1 - ts) * np.asarray(pa0, float) + ts * np.asarray(pa1, float)
    pb = (1 - ts) * np.asarray(pb0, float) + ts * np.asarray(pb1, float)
    mid = 0.5 * (pa + pb)
    d = pa - pb
    n = np.hypot(d[:, 0], d[:, 1])
    th0 = math.atan2(pa0[1] - pb0[1], pa0[0] - pb0[0])
    th1 = math.atan2(pa1[1] - pb1[1], pa1[0] - pb1[0])
    dth = (th1 - th0 + math.pi) % (2 * math.pi) - math.pi
    th = th0 + ts[:, 0] * dth
    fallback = np.stack([np.cos(th), np.sin(th)], axis=1)
    safe = np.where(n > EPS_GEOM, n, 1.0)
    u = np.where((n > EPS_GEOM)[:, None], d / safe[:, None], fallback)
    half = 0.5 * length * u
    return mid + half, mid - half


def sweep_check(link: int, stateA: RobotState, stateB: RobotState, model: RobotModel, scene: Scene,
                steps: int = DEFAULT_SWEEP_STEPS) -> SweepResult:
    """Check one link along the interpolation between two states.

    Args:
        link: link index into ``model.links``.
        steps: number of interpolation intervals; ``steps + 1`` samples
            including both end states are tested.

    Returns:
        SweepResult with ``ok`` and the first failing interpolation
        parameter (None when it passes).
    """
    L = model.links[link]
    A = stateA.positions if isinstance(stateA, RobotState) else np.asarray(stateA, float)
    B = stateB.positions if isinstance(stateB, RobotState) else np.asarray(stateB, float)
    ts = np.linspace(0.0, 1.0, int(steps) + 1)
    pa, pb = interpolate_link(A[L.a], A[L.b], B[L.a], B[L.b], L.length, ts)
    r = model.radius_array
    c = segment_clearance(pa, pb, r[L.a], r[L.b], L.width / 2, scene)
    bad = np.flatnonzero(np.any(c < -EPS_GEOM, axis=1))
    if len(bad):
        return SweepResult(False, float(ts[bad[0]]))
    return SweepResult(True)


def pair_sweeps_ok(stateA, stateB, model: RobotModel, scene: Scene, steps: int = DEFAULT_SWEEP_STEPS):
    """Run sweep_check on every link; returns (ok, first failing link or None)."""
    for li in range(model.n_links):
        if not sweep_check(li, stateA, stateB, model, scene, steps).ok:
            return False, li
    if model.n_links == 0:
        A = stateA.positions if isinstance(stateA, RobotState) else np.asarray(stateA, float)
        B = stateB.positions if isinstance(stateB, RobotState) else np.asarray(stateB, float)
        ts = np.linspace(0, 1, steps + 1)[:, None]
        P = (1 - ts) * A[0] + ts * B[0]
        if np.any(point_clearance(P, model.radii[0], scene) < -EPS_GEOM):
            return False, -1
    return True, None


def linear_states(A: np.ndarray, B: np.ndarray, n: int) -> np.ndarray:
    ts = np.linspace(0.0, 1.0, n)[:, None, None]
    return (1 - ts) * np.asarray(A, float)[None] + ts * np.asarray(B, float)[None]
