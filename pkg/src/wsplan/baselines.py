"""
Configuration-space sampling planners (PRM, PRM*, RRT) for comparison.

An arm configuration is a base position plus one angle per link: the
absolute angle of each root link and, for every other link, its angle
relative to the parent link. Collision checking goes through forward
kinematics and the workspace clearance kernels, so all planners see the same
robot geometry.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidEndpointError, PreconditionError
from .robot import states_collide, states_self_cross
from .scene import RobotModel, RobotState, Scene


@dataclass(frozen=True)
class ArmConfiguration:
    base: tuple
    angles: tuple

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(float(v) for v in self.base))
        object.__setattr__(self, "angles", tuple(float(v) for v in self.angles))

    def as_vector(self) -> np.ndarray:
        return np.array(self.base + self.angles)

    @classmethod
    def from_vector(cls, q) -> "ArmConfiguration":
        q = np.asarray(q, float)
        return cls(q[:2], q[2:])


@dataclass(frozen=True)
class SamplerParams:
    """Sampling-planner settings.

    Attributes:
        n_samples: configurations drawn (PRM) or expansions (RRT), counting
            ones rejected for collision.
        k_neighbors: neighbours per sample, or "star" for
            ceil(e (1 + 1/dim) ln i) at the i-th sample.
        rrt_step: RRT steering distance in the weighted metric (m).
        edge_check_resolution: minimum interpolation steps per edge.
        goal_bias: RRT probability of sampling the goal.
    """
    n_samples: int = 4000
    k_neighbors: Union[int, str] = 10
    rrt_step: float = 1.0
    seed: int = 0
    edge_check_resolution: int = 32
    goal_bias: float = 0.05

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")
        if self.k_neighbors != "star" and not (isinstance(self.k_neighbors, int) and self.k_neighbors > 0):
            raise ValueError("k_neighbors must be a positive integer or 'star'")
        if self.edge_check_resolution < 1:
            raise ValueError("edge_check_resolution must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown sampler settings: {sorted(unknown)}")
        return cls(**d)


def wrap(a):
    """Angles wrapped to (-pi, pi]."""
    a = np.asarray(a, float)
    return np.pi - np.mod(np.pi - a, 2 * np.pi)


def _fk_many(Q: np.ndarray, model: RobotModel) -> np.ndarray:
    """(S, 2 + L) configurations -> (S, K, 2) key-point positions."""
    Q = np.atleast_2d(Q)
    S = len(Q)
    P = np.zeros((S, model.n_keypoints, 2))
    P[:, model.root] = Q[:, :2]
    absolute = np.zeros((S, model.n_links))
    parent_link = {}
    for j, (p, c, li) in enumerate(model.bfs):
        prev = parent_link.get(p)
        theta = Q[:, 2 + j] + (absolute[:, prev] if prev is not None else 0.0)
        absolute[:, j] = theta
        parent_link[c] = j
        L = model.links[li].length
        P[:, c, 0] = P[:, p, 0] + L * np.cos(theta)
        P[:, c, 1] = P[:, p, 1] + L * np.sin(theta)
    return P


def forward_kinematics(config: ArmConfiguration, model: RobotModel) -> RobotState:
    """Key-point positions by chaining link lengths along cumulative angles."""
    if len(config.angles) != model.n_links:
        raise PreconditionError(f"expected {model.n_links} angles, got {len(config.angles)}")
    return RobotState(_fk_many(config.as_vector()[None], model)[0])


def config_from_state(state, model: RobotModel) -> ArmConfiguration:
    """Inverse of forward_kinematics for a constraint-exact state."""
    P = state.positions if isinstance(state, RobotState) else np.asarray(state, float)
    absolute, parent_link, rel = [], {}, []
    for j, (p, c, li) in enumerate(model.bfs):
        th = math.atan2(P[c, 1] - P[p, 1], P[c, 0] - P[p, 0])
        prev = parent_link.get(p)
        rel.append(float(wrap(th - absolute[prev])) if prev is not None else th)
        absolute.append(th)
        parent_link[c] = j
    return ArmConfiguration(P[model.root], rel)


class _Space:
    """Sampling box, metric embedding and collision checks for one problem."""

    def __init__(self, model: RobotModel, scene: Scene, params: SamplerParams):
        self.model, self.scene, self.params = model, scene, params
        self.dim = 2 + model.n_links
        self.reach = model.total_length
        xmin, ymin, xmax, ymax = scene.bounds
        self.lo = np.array([xmin, ymin])
        self.hi = np.array([xmax, ymax])
        span = max(xmax - xmin, ymax - ymin)
        self.rmin = max(float(model.radius_array.min()), 1e-3)
        # ancestry[i, j]: relative angle i contributes to absolute angle of link j (BFS order)
        L = model.n_links
        self.ancestry = np.zeros((L, L))
        owner = {}
        for j, (p, c, li) in enumerate(model.bfs):
            prev = owner.get(p)
            if prev is not None:
                self.ancestry[:, j] = self.ancestry[:, prev]
            self.ancestry[j, j] = 1.0
            owner[c] = j
        self.link_lengths = np.array([model.links[li].length for _, _, li in model.bfs])
        self.boxsize = np.concatenate([[10 * span + 1, 10 * span + 1],
                                       np.full(model.n_links, 2 * np.pi * self.reach)])

    def sample(self, rng, n) -> np.ndarray:
        """Uniform configurations drawn row by row, so a longer draw extends a shorter one."""
        U = rng.random((n, self.dim))
        base = self.lo + U[:, :2] * (self.hi - self.lo)
        return np.hstack([base, np.pi - 2 * np.pi * U[:, 2:]])

    def embed(self, Q) -> np.ndarray:
        Q = np.atleast_2d(Q)
        E = np.empty_like(Q)
        E[:, :2] = Q[:, :2] - self.lo
        E[:, 2:] = np.mod(Q[:, 2:], 2 * np.pi) * self.reach
        return np.mod(E, self.boxsize)

    def distance(self, a, b) -> np.ndarray:
        a, b = np.atleast_2d(a), np.atleast_2d(b)
        db = a[:, :2] - b[:, :2]
        da = wrap(a[:, 2:] - b[:, 2:]) * self.reach
        return np.sqrt((db ** 2).sum(1) + (da ** 2).sum(1))

    def valid(self, Q) -> np.ndarray:
        P = _fk_many(Q, self.model)
        return ~(states_collide(P, self.model, self.scene) | states_self_cross(P, self.model))

    def edge_steps(self, a, b, resolution: Optional[int] = None) -> int:
        """Interpolation steps so no key-point moves more than the smallest radius per step.

        Along the interpolated motion every absolute link angle changes
        linearly, so a key-point travels at most |d base| + sum L_i |d theta_i|.
        """
        res = resolution or self.params.edge_check_resolution
        d_rel = wrap(b[2:] - a[2:])
        d_abs = d_rel @ self.ancestry
        travel = float(np.hypot(*(b[:2] - a[:2])) + np.abs(d_abs) @ self.link_lengths)
        return max(res, int(math.ceil(travel / self.rmin)))

    def interpolate(self, a, b, steps: int) -> np.ndarray:
        t = np.linspace(0.0, 1.0, steps + 1)[:, None]
        d = np.concatenate([b[:2] - a[:2], wrap(b[2:] - a[2:])])
        return a + t * d

    def edges_ok(self, a, B, resolution: Optional[int] = None):
        """Validity and workspace length of straight edges a -> B_i.

        Returns:
            (ok (m,), lengths (m,)) with lengths the summed key-point
            arclength along the interpolated motion.
        """
        segs, owners = [], []
        for i, b in enumerate(B):
            s = self.interpolate(a, b, self.edge_steps(a, b, resolution))
            segs.append(s)
            owners.append(np.full(len(s), i))
        Q = np.concatenate(segs)
        own = np.concatenate(owners)
        P = _fk_many(Q, self.model)
        bad = states_collide(P, self.model, self.scene) | states_self_cross(P, self.model)
        ok = np.ones(len(B), bool)
        ok[np.unique(own[bad])] = False
        lengths = np.zeros(len(B))
        step = np.hypot(*np.moveaxis(np.diff(P, axis=0), -1, 0)).sum(axis=1)
        same = own[1:] == own[:-1]
        np.add.at(lengths, own[1:][same], step[same])
        return ok, lengths


@dataclass
class BaselineResult:
    success: bool
    path: Optional[list]  # ArmConfiguration waypoints
    samples: int
    nodes: int
    components: int
    time_s: float
    message: str = ""
    dense_states: Optional[np.ndarray] = field(default=None, repr=False)

    def path_length_sum(self) -> float:
        if self.dense_states is None or len(self.dense_states) < 2:
            return 0.0
        D = np.diff(self.dense_states, axis=0)
        return float(np.hypot(D[..., 0], D[..., 1]).sum())

    def path_length_max(self) -> float:
        if self.dense_states is None or len(self.dense_states) < 2:
            return 0.0
        D = np.diff(self.dense_states, axis=0)
        return float(np.hypot(D[..., 0], D[..., 1]).sum(axis=0).max())


def _check_endpoints(space: _Space, qs, qg):
    for name, q in (("start", qs), ("goal", qg)):
        if not space.valid(q[None])[0]:
            raise InvalidEndpointError(f"{name} configuration is in collision")


def _densify(space: _Space, path_q: list) -> np.ndarray:
    if len(path_q) == 1:
        return _fk_many(path_q[0][None], space.model)
    parts = [space.interpolate(a, b, space.edge_steps(a, b))[:-1] for a, b in zip(path_q[:-1], path_q[1:])]
    parts.append(path_q[-1][None])
    return _fk_many(np.concatenate(parts), space.model)


def _k_for(params: SamplerParams, i: int, dim: int) -> int:
    if params.k_neighbors == "star":
        return int(math.ceil(math.e * (1 + 1 / dim) * math.log(max(i, 2))))
    return int(params.k_neighbors)


def prm_plan(start: ArmConfiguration, goal: ArmConfiguration, model: RobotModel, scene: Scene,
             params: Optional[SamplerParams] = None) -> BaselineResult:
    """Incremental probabilistic roadmap.

    Samples are drawn uniformly over base-in-bounds times angles in
    (-pi, pi]; each accepted sample connects to its k nearest earlier nodes
    (start and goal are the first two nodes). Edge weights are the workspace
    key-point arclength of the interpolated motion. With
    ``k_neighbors="star"`` this is PRM*.

    Raises:
        InvalidEndpointError: start or goal in collision.
    """
    params = params or SamplerParams()
    t0 = time.perf_counter()
    space = _Space(model, scene, params)
    qs, qg = start.as_vector(), goal.as_vector()
    _check_endpoints(space, qs, qg)
    if np.allclose(qs, qg):
        return BaselineResult(True, [start], 0, 1, 1, time.perf_counter() - t0,
                              dense_states=_fk_many(qs[None], model))
    rng = np.random.default_rng(params.seed)
    Q = space.sample(rng, params.n_samples)
    free = np.flatnonzero(space.valid(Q))
    nodes = np.vstack([qs, qg, Q[free]])
    emb = space.embed(nodes)
    G = nx.Graph()
    G.add_nodes_from(range(len(nodes)))
    ok, w = space.edges_ok(qs, qg[None])
    if ok[0]:
        G.add_edge(0, 1, weight=w[0])
    # incremental k-nearest: rebuild the tree on a doubling schedule
    tree, tree_n = None, 0
    for i in range(2, len(nodes)):
        k = min(_k_for(params, i, space.dim), i)
        if tree is None or i >= 2 * tree_n:
            tree_n = i
            tree = cKDTree(emb[:i], boxsize=space.boxsize)
        kk = min(k, tree_n)
        _, idx = tree.query(emb[i], k=kk)
        cand = np.atleast_1d(idx)
        extra = np.arange(tree_n, i)
        cand = np.concatenate([cand, extra])
        d = space.distance(nodes[i], nodes[cand])
        order = np.lexsort((cand, d))[:k]
        nbrs = cand[order]
        ok, w = space.edges_ok(nodes[i], nodes[nbrs])
        for j, good, wt in zip(nbrs, ok, w):
            if good:
                G.add_edge(i, int(j), weight=float(wt))
    elapsed = time.perf_counter() - t0
    comps = nx.number_connected_components(G)
    if not nx.has_path(G, 0, 1):
        return BaselineResult(False, None, params.n_samples, len(nodes), comps, elapsed,
                              message=f"no path after {params.n_samples} samples ({len(free)} free, {comps} components)")
    idx = nx.dijkstra_path(G, 0, 1, weight="weight")
    path_q = [nodes[i] for i in idx]
    elapsed = time.perf_counter() - t0
    return BaselineResult(True, [ArmConfiguration.from_vector(q) for q in path_q], params.n_samples, len(nodes),
                          comps, elapsed, dense_states=_densify(space, path_q))


def rrt_plan(start: ArmConfiguration, goal: ArmConfiguration, model: RobotModel, scene: Scene,
             params: Optional[SamplerParams] = None) -> BaselineResult:
    """Single-tree RRT with goal bias.

    Raises:
        InvalidEndpointError: start or goal in collision.
    """
    params = params or SamplerParams()
    t0 = time.perf_counter()
    space = _Space(model, scene, params)
    qs, qg = start.as_vector(), goal.as_vector()
    _check_endpoints(space, qs, qg)
    if np.allclose(qs, qg):
        return BaselineResult(True, [start], 0, 1, 1, time.perf_counter() - t0,
                              dense_states=_fk_many(qs[None], model))
    rng = np.random.default_rng(params.seed)
    nodes = [qs]
    parent = [-1]
    for it in range(1, params.n_samples + 1):
        target = qg if rng.random() < params.goal_bias else space.sample(rng, 1)[0]
        N = np.array(nodes)
        d = space.distance(target, N)
        near = int(np.argmin(d))
        qn = N[near]
        if d[near] <= 0:
            continue
        frac = min(1.0, params.rrt_step / d[near])
        delta = np.concatenate([target[:2] - qn[:2], wrap(target[2:] - qn[2:])])
        qnew = qn + frac * delta
        qnew[2:] = wrap(qnew[2:])
        ok, _ = space.edges_ok(qn, qnew[None])
        if not ok[0]:
            continue
        nodes.append(qnew)
        parent.append(near)
        if space.distance(qnew, qg)[0] <= params.rrt_step:
            ok, _ = space.edges_ok(qnew, qg[None])
            if ok[0]:
                nodes.append(qg)
                parent.append(len(nodes) - 2)
                chain, j = [], len(nodes) - 1
                while j >= 0:
                    chain.append(nodes[j])
                    j = parent[j]
                path_q = chain[::-1]
                return BaselineResult(True, [ArmConfiguration.from_vector(q) for q in path_q], it, len(nodes), 1,
                                      time.perf_counter() - t0, dense_states=_densify(space, path_q))
    return BaselineResult(False, None, params.n_samples, len(nodes), 1, time.perf_counter() - t0,
                          message=f"goal not reached after {params.n_samples} expansions")


def revalidate(result: BaselineResult, model: RobotModel, scene: Scene, factor: int = 10) -> bool:
    """Re-check every path edge at ``factor`` times the planning resolution."""
    if not result.success:
        return False
    params = SamplerParams(edge_check_resolution=32 * factor)
    space = _Space(model, scene, params)
    Q = [c.as_vector() for c in result.path]
    if len(Q) == 1:
        return bool(space.valid(Q[0][None])[0])
    for a, b in zip(Q[:-1], Q[1:]):
        ok, _ = space.edges_ok(a, b[None], resolution=None)
        fine = space.interpolate(a, b, factor * space.edge_steps(a, b))
        if not (ok[0] and np.all(space.valid(fine))):
            return False
    return True
