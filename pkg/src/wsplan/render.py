"""
Deterministic SVG 1.1 drawings of scenes, regions and trajectories.

Output depends only on the inputs: fixed colour tables, fixed number
formatting and no timestamps, so identical inputs give identical bytes.
"""

from __future__ import annotations

from typing import Optional
from xml.sax.saxutils import quoteattr

import numpy as np

from .scene import KeypointTrajectory, RobotModel, Scene

KEYPOINT_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                   "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f")
REGION_COLORS = ("#fde0dd", "#e0f3db", "#deebf7", "#fff7bc", "#efedf5",
                 "#fee6ce", "#e5f5f9", "#f7f4f9", "#edf8e9", "#f0f0f0")


def _f(v: float) -> str:
    s = f"{v:.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class _Canvas:
    def __init__(self, scene: Scene, width: int):
        xmin, ymin, xmax, ymax = scene.bounds
        self.scale = width / (xmax - xmin)
        self.xmin, self.ymax = xmin, ymax
        self.w = width
        self.h = int(round((ymax - ymin) * self.scale))
        self.items = []

    def pt(self, p) -> str:
        x = (p[0] - self.xmin) * self.scale
        y = (self.ymax - p[1]) * self.scale
        return f"{_f(x)},{_f(y)}"

    def polygon(self, pts, **attrs):
        self.items.append(f'<polygon points="{" ".join(self.pt(p) for p in pts)}"{_attrs(attrs)}/>')

    def polyline(self, pts, **attrs):
        self.items.append(f'<polyline points="{" ".join(self.pt(p) for p in pts)}"{_attrs(attrs)}/>')

    def circle(self, p, r, **attrs):
        x, y = self.pt(p).split(",")
        self.items.append(f'<circle cx="{x}" cy="{y}" r="{_f(r * self.scale)}"{_attrs(attrs)}/>')

    def group(self, name: str):
        self.items.append(f'<g id={quoteattr(name)}>')

    def end(self):
        self.items.append("</g>")

    def svg(self) -> str:
        head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">')
        return "\n".join([head] + self.items + ["</svg>"]) + "\n"


def _attrs(attrs: dict) -> str:
    return "".join(f" {k.replace('_', '-')}={quoteattr(str(v))}" for k, v in attrs.items())


def render_svg(scene: Scene, trajectory: Optional[KeypointTrajectory] = None, model: Optional[RobotModel] = None,
               decomposition=None, states: Optional[list] = None, width: int = 800) -> str:
    """Draw bounds, obstacles and optional overlays.

    Args:
        trajectory: one polyline per key-point, coloured by key-point id.
        model: needed to draw ``states`` as link chains.
        decomposition: regions filled by label code.
        states: intermediate states drawn as ghosted link chains.
    """
    c = _Canvas(scene, width)
    c.polygon(scene.corners, fill="#ffffff", stroke="#000000", stroke_width=2)
    if decomposition is not None:
        c.group("regions")
        tri = decomposition.triangulation
        for reg in decomposition.regions:
            color = REGION_COLORS[reg.code % len(REGION_COLORS)]
            for t in reg.triangles:
                c.polygon(tri.points[tri.triangles[t]], fill=color, stroke=color, stroke_width=0.5)
        c.end()
    c.group("obstacles")
    for poly in scene.obstacles:
        c.polygon(poly.vertices, fill="#555555", stroke="#222222", stroke_width=1)
    c.end()
    if states is not None and model is not None:
        c.group("states")
        for s in states:
            P = s.positions if hasattr(s, "positions") else np.asarray(s)
            for L in model.links:
                c.polyline([P[L.a], P[L.b]], fill="none", stroke="#000000", stroke_opacity=0.25,
                           stroke_width=_f(max(L.width * c.scale, 1.0)))
        c.end()
    if trajectory is not None:
        c.group("paths")
        X = trajectory.array
        for k in range(X.shape[1]):
            color = KEYPOINT_COLORS[k % len(KEYPOINT_COLORS)]
            c.polyline(X[:, k], fill="none", stroke=color, stroke_width=1.5)
            c.circle(X[0, k], 0.02 * (scene.bounds[2] - scene.bounds[0]) / 10, fill=color)
        c.end()
    return c.svg()


def render_velocity_scatter(v, omega, width: int = 400) -> str:
    """Scatter of (v, omega) samples on [-1.5, 1.5]^2 with the unit box drawn."""
    box = Scene([-1.5, -1.5, 1.5, 1.5])
    c = _Canvas(box, width)
    c.polygon(box.corners, fill="#ffffff", stroke="#000000")
    c.polygon([(-1, -1), (1, -1), (1, 1), (-1, 1)], fill="none", stroke="#999999")
    c.group("samples")
    for a, b in zip(v, omega):
        c.circle((float(np.clip(a, -1.5, 1.5)), float(np.clip(b, -1.5, 1.5))), 0.015, fill="#1f77b4")
    c.end()
    return c.svg()
