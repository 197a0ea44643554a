"""Scene, robot model, state and trajectory types plus JSON file I/O."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInputError, PreconditionError, SceneParseError, SceneValidationError
from .geom import EPS_GEOM, Polygon


class Scene:
    """Rectangular world with polygonal obstacles; obstacle ids are list indices."""

    def __init__(self, bounds: Sequence[float], obstacles: Iterable = ()):
        xmin, ymin, xmax, ymax = (float(b) for b in bounds)
        if not all(math.isfinite(b) for b in (xmin, ymin, xmax, ymax)) or xmax <= xmin or ymax <= ymin:
            raise SceneValidationError(f"invalid bounds {list(bounds)!r}")
        self.bounds = (xmin, ymin, xmax, ymax)
        obs = []
        for k, o in enumerate(obstacles):
            if isinstance(o, Polygon):
                obs.append(o)
                continue
            try:
                obs.append(Polygon(o))
            except SceneValidationError:
                raise SceneValidationError(f"obstacle {k} not simple") from None
            except DegenerateInputError as exc:
                raise SceneValidationError(f"obstacle {k} invalid: {exc}") from None
        self.obstacles: list[Polygon] = obs
        self._validate()

    def _validate(self):
        xmin, ymin, xmax, ymax = self.bounds
        for k, poly in enumerate(self.obstacles):
            v = poly.vertices
            if (np.any(v[:, 0] < xmin - EPS_GEOM) or np.any(v[:, 0] > xmax + EPS_GEOM)
                    or np.any(v[:, 1] < ymin - EPS_GEOM) or np.any(v[:, 1] > ymax + EPS_GEOM)):
                raise SceneValidationError(f"obstacle {k} has a vertex outside the bounds")
        for i in range(len(self.obstacles)):
            for j in range(i + 1, len(self.obstacles)):
                a, b = self.obstacles[i].vertices, self.obstacles[j].vertices
                if a.shape == b.shape and _same_cycle(a, b):
                    raise SceneValidationError(f"obstacles {i} and {j} are identical")

    def __eq__(self, other):
        return (isinstance(other, Scene) and self.bounds == other.bounds
                and len(self.obstacles) == len(other.obstacles)
                and all(a == b for a, b in zip(self.obstacles, other.obstacles)))

    def approx_equal(self, other: "Scene", tol: float = EPS_GEOM) -> bool:
        if not np.allclose(self.bounds, other.bounds, atol=tol, rtol=0):
            return False
        if len(self.obstacles) != len(other.obstacles):
            return False
        return all(a.vertices.shape == b.vertices.shape and np.allclose(a.vertices, b.vertices, atol=tol, rtol=0)
                   for a, b in zip(self.obstacles, other.obstacles))

    @property
    def corners(self) -> np.ndarray:
        xmin, ymin, xmax, ymax = self.bounds
        return np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]], float)

    @property
    def diagonal(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return math.hypot(xmax - xmin, ymax - ymin)

    @cached_property
    def edge_arrays(self):
        """(starts, ends, obstacle_index) over every obstacle edge."""
        if not self.obstacles:
            z = np.zeros((0, 2))
            return z, z, np.zeros(0, dtype=int)
        a = np.concatenate([p.vertices for p in self.obstacles])
        b = np.concatenate([np.roll(p.vertices, -1, axis=0) for p in self.obstacles])
        ids = np.concatenate([np.full(len(p), k) for k, p in enumerate(self.obstacles)])
        return a, b, ids

    def to_dict(self) -> dict:
        return {
            "bounds": list(self.bounds),
            "obstacles": [{"id": k, "vertices": p.vertices.tolist()} for k, p in enumerate(self.obstacles)],
        }

    @classmethod
    def from_dict(cls, data: dict, source: str = "<scene>") -> "Scene":
        bounds = _field(data, "bounds", source)
        if not (isinstance(bounds, list) and len(bounds) == 4 and all(_is_num(b) for b in bounds)):
            raise SceneParseError(f"{source}: field 'bounds' must be [xmin, ymin, xmax, ymax]")
        raw = data.get("obstacles", [])
        if not isinstance(raw, list):
            raise SceneParseError(f"{source}: field 'obstacles' must be a list")
        polys = [None] * len(raw)
        for pos, item in enumerate(raw):
            if not isinstance(item, dict):
                raise SceneParseError(f"{source}: obstacles[{pos}] must be an object")
            oid = item.get("id", pos)
            if not isinstance(oid, int) or not 0 <= oid < len(raw) or polys[oid] is not None:
                raise SceneValidationError(f"{source}: obstacles[{pos}].id must be unique and dense in 0..{len(raw) - 1}")
            verts = item.get("vertices")
            if not _is_pointlist(verts):
                raise SceneParseError(f"{source}: obstacles[{pos}].vertices must be a list of [x, y] pairs")
            polys[oid] = verts
        return cls(bounds, polys)


def _same_cycle(a: np.ndarray, b: np.ndarray) -> bool:
    for s in range(len(a)):
        if np.allclose(np.roll(a, s, axis=0), b, atol=EPS_GEOM, rtol=0):
            return True
    return False


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_pointlist(v) -> bool:
    return isinstance(v, list) and all(isinstance(p, list) and len(p) == 2 and all(_is_num(c) for c in p) for p in v)


def _field(data, name, source):
    if not isinstance(data, dict):
        raise SceneParseError(f"{source}: top level must be a JSON object")
    if name not in data:
        raise SceneParseError(f"{source}: missing field '{name}'")
    return data[name]


def _read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SceneParseError(f"{path}: cannot read file ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def load_scene(path) -> Scene:
    return Scene.from_dict(_read_json(path), str(path))


def save_scene(scene: Scene, path):
    _write_json(scene.to_dict(), path)


# --------------------------------------------------------------------------
# robot


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    length: float
    width: float = 0.0


@dataclass(frozen=True)
class RobotModel:
    """Key-points with radii joined by rigid links forming a tree."""

    radii: tuple
    links: tuple
    root: int = 0
    bfs: tuple = field(init=False, repr=False, compare=False)
    parent: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        links = tuple(l if isinstance(l, Link) else Link(*l) for l in self.links)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "links", links)
        K = len(radii)
        if K == 0:
            raise SceneValidationError("robot needs at least one key-point")
        if not 0 <= self.root < K:
            raise SceneValidationError(f"root {self.root} is not a key-point id")
        if any(r < 0 for r in radii):
            raise SceneValidationError("key-point radii must be non-negative")
        if len(links) != K - 1:
            raise SceneValidationError("link graph must be a tree (links = key-points - 1)")
        adj = [[] for _ in range(K)]
        for i, l in enumerate(links):
            if not (0 <= l.a < K and 0 <= l.b < K) or l.a == l.b:
                raise SceneValidationError(f"link {i} references an invalid key-point")
            if not l.length > 0:
                raise SceneValidationError(f"link {i} must have positive length")
            if l.width < 0:
                raise SceneValidationError(f"link {i} must have non-negative width")
            for k in (l.a, l.b):
                if radii[k] < l.width / 2 - EPS_GEOM:
                    raise SceneValidationError(f"key-point {k} radius is smaller than half the width of link {i}")
            adj[l.a].append((l.b, i))
            adj[l.b].append((l.a, i))
        parent = [-1] * K
        order = []
        seen = {self.root}
        q = deque([self.root])
        while q:
            p = q.popleft()
            for c, li in sorted(adj[p]):
                if c not in seen:
                    seen.add(c)
                    parent[c] = p
                    order.append((p, c, li))
                    q.append(c)
        if len(seen) != K:
            raise SceneValidationError("link graph is not connected")
        object.__setattr__(self, "bfs", tuple(order))
        object.__setattr__(self, "parent", tuple(parent))

    @property
    def n_keypoints(self) -> int:
        return len(self.radii)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @cached_property
    def link_index_arrays(self):
        a = np.array([l.a for l in self.links], dtype=int)
        b = np.array([l.b for l in self.links], dtype=int)
        return a, b

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([l.length for l in self.links], float)

    @cached_property
    def half_widths(self) -> np.ndarray:
        return np.array([l.width / 2 for l in self.links], float)

    @cached_property
    def radius_array(self) -> np.ndarray:
        return np.array(self.radii, float)

    @property
    def total_length(self) -> float:
        return float(sum(l.length for l in self.links))

    def neighbors(self, k: int) -> list:
        out = []
        for i, l in enumerate(self.links):
            if l.a == k:
                out.append((l.b, i))
            elif l.b == k:
                out.append((l.a, i))
        return out

    def children(self, k: int) -> list:
        return [(c, li) for p, c, li in self.bfs if p == k]

    def subtree(self, k: int) -> list:
        out, stack = [], [k]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(c for c, _ in self.children(n))
        return out

    def is_chain(self) -> bool:
        deg = np.bincount(np.concatenate(self.link_index_arrays), minlength=self.n_keypoints) if self.links else np.zeros(1)
        return bool(np.all(deg <= 2)) and (self.n_keypoints == 1 or deg[self.root] == 1)

    def to_dict(self) -> dict:
        return {
            "keypoints": [{"id": k, "radius": r} for k, r in enumerate(self.radii)],
            "links": [{"a": l.a, "b": l.b, "length": l.length, "width": l.width} for l in self.links],
            "root": self.root,
        }

    @classmethod
    def from_dict(cls, data: dict, source: str = "<robot>") -> "RobotModel":
        kps = _field(data, "keypoints", source)
        links = _field(data, "links", source)
        if not isinstance(kps, list) or not isinstance(links, list):
            raise SceneParseError(f"{source}: 'keypoints' and 'links' must be lists")
        radii = [None] * len(kps)
        for pos, kp in enumerate(kps):
            if not isinstance(kp, dict) or not _is_num(kp.get("radius")):
                raise SceneParseError(f"{source}: keypoints[{pos}].radius must be a number")
            kid = kp.get("id", pos)
            if not isinstance(kid, int) or not 0 <= kid < len(kps) or radii[kid] is not None:
                raise SceneValidationError(f"{source}: keypoints[{pos}].id must be dense in 0..{len(kps) - 1}")
            radii[kid] = kp["radius"]
        out = []
        for pos, l in enumerate(links):
            if not isinstance(l, dict):
                raise SceneParseError(f"{source}: links[{pos}] must be an object")
            for key in ("a", "b", "length"):
                if key not in l:
                    raise SceneParseError(f"{source}: links[{pos}] missing field '{key}'")
            if not (isinstance(l["a"], int) and isinstance(l["b"], int) and _is_num(l["length"])
                    and _is_num(l.get("width", 0.0))):
                raise SceneParseError(f"{source}: links[{pos}] has a field of the wrong type")
            out.append(Link(l["a"], l["b"], float(l["length"]), float(l.get("width", 0.0))))
        root = data.get("root", 0)
        if not isinstance(root, int):
            raise SceneParseError(f"{source}: field 'root' must be an integer")
        return cls(tuple(radii), tuple(out), root)


def chain_model(lengths, radius=0.1, width=0.1) -> RobotModel:
    """Serial chain rooted at key-point 0 with the given link lengths."""
    n = len(lengths)
    return RobotModel(tuple([radius] * (n + 1)),
                      tuple(Link(i, i + 1, float(L), width) for i, L in enumerate(lengths)), 0)


def load_robot(path) -> RobotModel:
    return RobotModel.from_dict(_read_json(path), str(path))


def save_robot(model: RobotModel, path):
    _write_json(model.to_dict(), path)


class RobotState:
    """One position per key-point id, stored as a read-only (K, 2) array."""

    __slots__ = ("positions",)

    def __init__(self, positions):
        p = np.array(positions, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(p)):
            raise DegenerateInputError("state has non-finite positions")
        p.setflags(write=False)
        self.positions = p

    def __len__(self):
        return len(self.positions)

    def __getitem__(self, k):
        return self.positions[k]

    def __eq__(self, other):
        return isinstance(other, RobotState) and np.array_equal(self.positions, other.positions)

    def __repr__(self):
        return f"RobotState({self.positions.tolist()!r})"

    def translated(self, v) -> "RobotState":
        return RobotState(self.positions + np.asarray(v, float))

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist()}

    @classmethod
    def from_dict(cls, data, source="<state>") -> "RobotState":
        pos = _field(data, "positions", source)
        if not _is_pointlist(pos):
            raise SceneParseError(f"{source}: 'positions' must be a list of [x, y] pairs")
        return cls(pos)


def load_state(path) -> RobotState:
    return RobotState.from_dict(_read_json(path), str(path))


def save_state(state: RobotState, path):
    _write_json(state.to_dict(), path)


class KeypointTrajectory:
    """Time-indexed robot states stored as an (N, K, 2) array."""

    __slots__ = ("array",)

    def __init__(self, states):
        if isinstance(states, np.ndarray):
            arr = np.array(states, dtype=float)
        else:
            arr = np.array([s.positions if isinstance(s, RobotState) else s for s in states], dtype=float)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise DegenerateInputError("trajectory must have shape (N, K, 2)")
        if arr.shape[0] < 2:
            raise DegenerateInputError("trajectory needs at least 2 states")
        if not np.all(np.isfinite(arr)):
            raise DegenerateInputError("trajectory has non-finite positions")
        arr.setflags(write=False)
        self.array = arr

    def __len__(self):
        return self.array.shape[0]

    def __getitem__(self, t) -> RobotState:
        return RobotState(self.array[t])

    @property
    def states(self) -> list:
        return [RobotState(s) for s in self.array]

    @property
    def n_keypoints(self) -> int:
        return self.array.shape[1]

    def keypoint_lengths(self) -> np.ndarray:
        d = np.diff(self.array, axis=0)
        return np.hypot(d[..., 0], d[..., 1]).sum(axis=0)

    def total_length(self) -> float:
        return float(self.keypoint_lengths().sum())

    def to_dict(self) -> dict:
        return {"states": [{"positions": s.tolist()} for s in self.array]}

    @classmethod
    def from_dict(cls, data, source="<trajectory>") -> "KeypointTrajectory":
        states = _field(data, "states", source)
        if not isinstance(states, list):
            raise SceneParseError(f"{source}: 'states' must be a list")
        return cls([RobotState.from_dict(s, f"{source}: states[{i}]") for i, s in enumerate(states)])


def load_trajectory(path) -> KeypointTrajectory:
    return KeypointTrajectory.from_dict(_read_json(path), str(path))


def save_trajectory(traj: KeypointTrajectory, path):
    _write_json(traj.to_dict(), path)


# --------------------------------------------------------------------------
# constraints


def link_errors(positions: np.ndarray, model: RobotModel) -> np.ndarray:
    """Signed length errors ``|p_a - p_b| - l`` for (..., K, 2) positions -> (..., L)."""
    a, b = model.link_index_arrays
    d = positions[..., a, :] - positions[..., b, :]
    return np.hypot(d[..., 0], d[..., 1]) - model.lengths


def constraint_violation(state, model: RobotModel) -> float:
    """Largest absolute link-length error of a state, in meters."""
    pos = state.positions if isinstance(state, RobotState) else np.asarray(state, float)
    if pos.shape[0] != model.n_keypoints:
        raise PreconditionError(f"state has {pos.shape[0]} key-points, model has {model.n_keypoints}")
    if model.n_links == 0:
        return 0.0
    return float(np.max(np.abs(link_errors(pos, model))))


def trajectory_violation(traj, model: RobotModel) -> np.ndarray:
    """Per-time-step constraint violation of a trajectory."""
    arr = traj.array if isinstance(traj, KeypointTrajectory) else np.asarray(traj, float)
    if model.n_links == 0:
        return np.zeros(arr.shape[0])
    return np.max(np.abs(link_errors(arr, model)), axis=-1)
