"""
No-side-slip constraint for a planar rigid body written on two points.

The body is the unit segment p1 -> p2 (p2 marks the heading). Its
configuration-space constraint is rewritten as a residual on the two point
velocities, whose gradient drives a small descent demo in (v, omega) space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .geom import as_point, cross2

NORM_TOL = 1e-9
DIVERGENCE_NORM = 1e6


@dataclass(frozen=True)
class RigidBodyState:
    """Reference point p1 and heading point p2 at unit distance."""
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p1", as_point(self.p1))
        object.__setattr__(self, "p2", as_point(self.p2))
        d = float(np.hypot(*(self.p2 - self.p1)))
        if abs(d - 1.0) > NORM_TOL:
            raise PreconditionError(f"heading link must have unit length, got {d:.6g}")

    @property
    def heading(self) -> np.ndarray:
        return self.p2 - self.p1

    @classmethod
    def from_pose(cls, x: float, y: float, theta: float) -> "RigidBodyState":
        p1 = np.array([x, y], float)
        return cls(p1, p1 + [math.cos(theta), math.sin(theta)])


@dataclass(frozen=True)
class VelocityPair:
    """Velocities of p1 and p2 over one time step dt."""
    v1: np.ndarray
    v2: np.ndarray
    dt: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "v1", as_point(self.v1))
        object.__setattr__(self, "v2", as_point(self.v2))
        if not self.dt > 0:
            raise PreconditionError("dt must be positive")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v1, self.v2])

    @classmethod
    def from_vector(cls, q, dt: float) -> "VelocityPair":
        q = np.asarray(q, float)
        return cls(q[:2], q[2:], dt)


def _require_unit(vel: VelocityPair):
    n = float(np.hypot(*vel.v1))
    if abs(n - 1.0) > NORM_TOL:
        raise PreconditionError(f"reference velocity must have unit norm, got {n!r}")


def cspace_side_slip_residual(theta: float, qdot, literal: bool = False) -> float:
    """-xdot sin(theta) + ydot cos(theta), the lateral velocity.

    Args:
        qdot: (xdot, ydot, thetadot).
        literal: add thetadot, the printed variant with a unit third
            coefficient.
    """
    xd, yd, td = (float(v) for v in qdot)
    r = -xd * math.sin(theta) + yd * math.cos(theta)
    return r + td if literal else r


def _residual(p1, p2, q, dt) -> float:
    x1, y1 = p1
    x2, y2 = p2
    xd1, yd1, xd2, yd2 = q
    return (x2 + xd2 * dt - x1 - xd1 * dt) * (-yd1) + (y2 + yd2 * dt - y1 - yd1 * dt) * xd1


def workspace_residual(state: RigidBodyState, vel: VelocityPair) -> float:
    """Predicted link vector after dt dotted with the normal of v1.

    Zero when the link stays parallel to the reference velocity.
    """
    _require_unit(vel)
    return _residual(state.p1, state.p2, vel.as_vector(), vel.dt)


def constraint_gradient(state: RigidBodyState, vel: VelocityPair, literal: bool = False) -> np.ndarray:
    """Gradient of the workspace residual w.r.t. (xd1, yd1, xd2, yd2).

    Args:
        literal: return the printed closed form, whose second component
            carries +xd2*dt where the derivative has -xd2*dt.
    """
    _require_unit(vel)
    (x1, y1), (x2, y2) = state.p1, state.p2
    xd1, yd1, xd2, yd2 = vel.as_vector()
    dt = vel.dt
    second = x1 - x2 + xd2 * dt if literal else x1 - x2 - xd2 * dt
    return np.array([y2 - y1 + yd2 * dt, second, -yd1 * dt, xd1 * dt])


def to_v_omega(state: RigidBodyState, vel: VelocityPair, check_norm: bool = True) -> tuple:
    """Forward speed of p1 along the heading and angular velocity of the link."""
    if check_norm:
        _require_unit(vel)
    u = state.heading
    return float(vel.v1 @ u), float(cross2(u, vel.v2 - vel.v1))


def rigid_velocities(state: RigidBodyState, v: float, omega: float, lateral: float = 0.0, dt: float = 0.1) -> VelocityPair:
    """Point velocities of a rigid unit link moving with (v, omega).

    ``lateral`` adds side-slip of p1 along the link normal.
    """
    u = state.heading
    n = np.array([-u[1], u[0]])
    v1 = v * u + lateral * n
    return VelocityPair(v1, v1 + omega * n, dt)


@dataclass
class FlowTrace:
    """(v, omega, residual) per iteration, starting with the initial velocity."""
    v: list = field(default_factory=list)
    omega: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    diverged: bool = False
    final: VelocityPair = None

    def rows(self):
        return [(i, v, w, r) for i, (v, w, r) in enumerate(zip(self.v, self.omega, self.residual))]


def gradient_flow_demo(state: RigidBodyState, vel: VelocityPair, step: float = 0.1, iters: int = 100,
                       literal: bool = False) -> FlowTrace:
    """Descend half the squared residual over the velocity pair.

    Each iteration applies vel <- vel - step * C * grad C, renormalizes
    v1 to unit length and records (v, omega, C). Stops early and flags
    divergence once the velocity norm exceeds 1e6.
    """
    _require_unit(vel)
    dt = vel.dt
    q = vel.as_vector()
    out = FlowTrace()

    def record(q):
        vp = VelocityPair.from_vector(q, dt)
        v, w = to_v_omega(state, vp, check_norm=False)
        out.v.append(v)
        out.omega.append(w)
        out.residual.append(_residual(state.p1, state.p2, q, dt))

    record(q)
    for _ in range(iters):
        vp = VelocityPair.from_vector(q, dt)
        C = _residual(state.p1, state.p2, q, dt)
        q = q - step * C * constraint_gradient(state, vp, literal=literal)
        n = float(np.hypot(*q[:2]))
        if not np.all(np.isfinite(q)) or np.linalg.norm(q) > DIVERGENCE_NORM or n == 0:
            out.diverged = True
            break
        q[:2] /= n
        record(q)
    out.final = VelocityPair.from_vector(q, dt)
    return out


def scaled_corner(state: RigidBodyState, vel: VelocityPair) -> tuple:
    """(v, omega) scaled onto the unit box: omega divided by |v2 - v1|."""
    v, w = to_v_omega(state, vel, check_norm=False)
    rel = float(np.hypot(*(vel.v2 - vel.v1)))
    return v, (w / rel if rel > 0 else 0.0)
