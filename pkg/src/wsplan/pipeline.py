"""End-to-end workspace planning: decompose, place intermediate states, coordinate."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coord import CoordinationConfig, CoordinationReport, coordinate
from .decomp import Decomposition, decompose
from .robot import min_clearance
from .scene import KeypointTrajectory, RobotModel, RobotState, Scene
from .search import SearchConfig, plan_intermediate_states


@dataclass
class PlanResult:
    trajectory: KeypointTrajectory
    states: list
    report: CoordinationReport
    timings: dict = field(default_factory=dict)

    @property
    def time_s(self) -> float:
        return sum(self.timings.values())

    @property
    def iterations(self) -> int:
        return self.report.max_iterations

    def path_length_sum(self) -> float:
        return float(self.trajectory.keypoint_lengths().sum())

    def path_length_max(self) -> float:
        return float(self.trajectory.keypoint_lengths().max())

    def min_clearance(self, model: RobotModel, scene: Scene) -> float:
        return min_clearance(self.trajectory.array, model, scene)


def plan(start: RobotState, goal: RobotState, model: RobotModel, scene: Scene,
         search_config: Optional[SearchConfig] = None, coord_config: Optional[CoordinationConfig] = None,
         decomposition: Optional[Decomposition] = None) -> PlanResult:
    """Plan a coordinated key-point trajectory from start to goal.

    Raises:
        InvalidEndpointError, NoPathError, PlanningFailure,
        NonConvergenceError: as raised by the individual stages.
    """
    timings = {}
    t = time.perf_counter()
    dec = decomposition if decomposition is not None else decompose(scene)
    timings["decompose"] = time.perf_counter() - t
    t = time.perf_counter()
    states = plan_intermediate_states(start, goal, model, scene, dec, search_config)
    timings["search"] = time.perf_counter() - t
    t = time.perf_counter()
    report = CoordinationReport()
    traj = coordinate(states, model, scene, coord_config, report=report)
    timings["coordinate"] = time.perf_counter() - t
    return PlanResult(traj, states, report, timings)
