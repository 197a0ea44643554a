"""
Command-line entry point.

Exit codes: 0 success, 1 other planner error, 2 usage error, 3 invalid
endpoint, 4 no route, 5 non-convergence, 6 planning or validation failure,
7 unreadable or invalid input file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import fields

import numpy as np

from .errors import (InvalidEndpointError, NoPathError, NonConvergenceError, PlannerError, PlanningFailure,
                     SceneParseError, SceneValidationError)
from .scene import KeypointTrajectory, load_robot, load_scene, load_state, load_trajectory, save_trajectory

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID_ENDPOINT = 3
EXIT_NO_ROUTE = 4
EXIT_NONCONVERGENCE = 5
EXIT_FAILURE = 6
EXIT_INPUT = 7

BENCH_HEADER = ["planner", "seed", "success", "time_ms", "samples_or_iters", "path_length_sum",
                "path_length_max", "min_clearance"]
OPTIMIZE_HEADER = ["segment", "iter", "max_violation", "total_length"]
NONHOLO_HEADER = ["iter", "v", "omega", "residual"]

log = logging.getLogger("wsplan")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, InvalidEndpointError):
        return EXIT_INVALID_ENDPOINT
    if isinstance(exc, NoPathError):
        return EXIT_NO_ROUTE
    if isinstance(exc, NonConvergenceError):
        return EXIT_NONCONVERGENCE
    if isinstance(exc, PlanningFailure):
        return EXIT_FAILURE
    if isinstance(exc, (SceneParseError, SceneValidationError, OSError, json.JSONDecodeError)):
        return EXIT_INPUT
    return EXIT_ERROR


# --------------------------------------------------------------------------
# configuration


def _load_config(args) -> dict:
    if not args.config:
        return {}
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise SceneParseError(f"{args.config}: invalid JSON ({e})") from e
    if not isinstance(data, dict):
        raise SceneParseError(f"{args.config}: expected an object with 'coord', 'search' or 'sampler' sections")
    unknown = set(data) - {"coord", "search", "sampler"}
    if unknown:
        raise SceneParseError(f"{args.config}: unknown sections {sorted(unknown)}")
    return data


def _build(cls, section: dict, overrides: dict):
    names = {f.name for f in fields(cls)}
    d = dict(section)
    unknown = set(d) - names
    if unknown:
        raise SceneParseError(f"unknown {cls.__name__} settings: {sorted(unknown)}")
    d.update({k: v for k, v in overrides.items() if v is not None and k in names})
    try:
        return cls(**d)
    except (TypeError, ValueError) as e:
        raise SceneParseError(f"invalid {cls.__name__}: {e}") from e


def coord_config(args, cfg: dict):
    from .coord import CoordinationConfig
    o = {"alpha": args.alpha, "eps_constraint": args.eps_constraint, "eps_length": args.eps_length,
         "max_outer_iters": args.max_outer_iters, "waypoints": args.waypoints, "step_limit": args.step_limit}
    return _build(CoordinationConfig, cfg.get("coord", {}), o)


def search_config(args, cfg: dict):
    from .search import SearchConfig
    return _build(SearchConfig, cfg.get("search", {}), {})


def sampler_params(args, cfg: dict, planner: str, seed: int):
    from .baselines import SamplerParams
    k = args.k_neighbors
    if k is not None and k != "star":
        k = int(k)
    o = {"n_samples": args.n_samples, "k_neighbors": k, "edge_check_resolution": args.edge_check_resolution,
         "rrt_step": args.rrt_step, "seed": seed}
    section = dict(cfg.get("sampler", {}))
    if planner == "prmstar":
        section["k_neighbors"] = "star"
        o["k_neighbors"] = None
    return _build(SamplerParams, section, o)


def _add_coord_flags(p):
    g = p.add_argument_group("coordination")
    g.add_argument("--alpha", type=float)
    g.add_argument("--eps-constraint", type=float)
    g.add_argument("--eps-length", type=float)
    g.add_argument("--max-outer-iters", type=int)
    g.add_argument("--waypoints", type=int)
    g.add_argument("--step-limit", type=float)


def _add_sampler_flags(p):
    g = p.add_argument_group("sampling baselines")
    g.add_argument("--n-samples", type=int)
    g.add_argument("--k-neighbors")
    g.add_argument("--edge-check-resolution", type=int)
    g.add_argument("--rrt-step", type=float)


# --------------------------------------------------------------------------
# commands


def cmd_decompose(args) -> int:
    from .decomp import decompose
    scene = load_scene(args.scene)
    t = time.perf_counter()
    dec = decompose(scene)
    elapsed = time.perf_counter() - t
    out = dec.to_dict()
    text = json.dumps(out, indent=1)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if args.render:
        from .render import render_svg
        _write_text(args.render, render_svg(scene, decomposition=dec))
    print(f"regions={len(dec.regions)} triangles={len(dec.triangulation.triangles)} time_ms={elapsed * 1e3:.1f}",
          file=sys.stderr)
    return EXIT_OK


def cmd_plan(args) -> int:
    from .pipeline import plan
    cfg = _load_config(args)
    scene = load_scene(args.scene)
    model = load_robot(args.robot)
    start, goal = load_state(args.start), load_state(args.goal)
    res = plan(start, goal, model, scene, search_config(args, cfg), coord_config(args, cfg))
    save_trajectory(res.trajectory, args.output)
    summary = {"time_ms": round(res.time_s * 1e3, 3), "states": len(res.states),
               "waypoints": len(res.trajectory), "iterations": res.iterations,
               "subdivisions": res.report.subdivisions, "path_length_sum": res.path_length_sum(),
               "path_length_max": res.path_length_max(),
               "timings_ms": {k: round(v * 1e3, 3) for k, v in res.timings.items()}}
    print(json.dumps(summary))
    if args.render:
        from .render import render_svg
        _write_text(args.render, render_svg(scene, res.trajectory, model, states=res.states))
    return EXIT_OK


def cmd_optimize(args) -> int:
    from .coord import CoordinationReport, coordinate
    cfg = _load_config(args)
    scene = load_scene(args.scene) if args.scene else None
    model = load_robot(args.robot)
    states = load_trajectory(args.states).states
    rep = CoordinationReport()
    traj = coordinate(states, model, scene, coord_config(args, cfg), report=rep)
    save_trajectory(traj, args.output)
    rows = [OPTIMIZE_HEADER] + [[s, i, _num(v), _num(L)] for s, i, v, L in rep.rows]
    _write_csv(args.log, rows)
    return EXIT_OK


def _bench_row(args, cfg, planner, seed, scene, model, start, goal) -> list:
    from .robot import min_clearance
    if planner == "workspace":
        from .pipeline import plan
        try:
            t = time.perf_counter()
            res = plan(start, goal, model, scene, search_config(args, cfg), coord_config(args, cfg))
            ms = (time.perf_counter() - t) * 1e3
            return [planner, "", "true", _num(ms), res.iterations, _num(res.path_length_sum()),
                    _num(res.path_length_max()), _num(res.min_clearance(model, scene))]
        except (NoPathError, PlanningFailure, NonConvergenceError) as e:
            log.info("workspace planner failed: %s", e)
            return [planner, "", "false", "", "", "", "", ""]
    from .baselines import config_from_state, prm_plan, rrt_plan
    params = sampler_params(args, cfg, planner, seed)
    cs, cg = config_from_state(start, model), config_from_state(goal, model)
    fn = rrt_plan if planner == "rrt" else prm_plan
    res = fn(cs, cg, model, scene, params)
    if not res.success:
        return [planner, seed, "false", _num(res.time_s * 1e3), res.samples, "", "", ""]
    return [planner, seed, "true", _num(res.time_s * 1e3), res.samples, _num(res.path_length_sum()),
            _num(res.path_length_max()), _num(min_clearance(res.dense_states, model, scene))]


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    scene = load_scene(args.scene)
    model = load_robot(args.robot)
    start, goal = load_state(args.start), load_state(args.goal)
    seeds = args.seeds if args.seeds else [args.seed]
    rows = []
    for planner in args.planner:
        for seed in ([None] if planner == "workspace" else seeds):
            rows.append(_bench_row(args, cfg, planner, seed, scene, model, start, goal))
    new = not args.output or not os.path.exists(args.output) or os.path.getsize(args.output) == 0
    _write_csv(args.output, ([BENCH_HEADER] if new else []) + rows, append=bool(args.output))
    return EXIT_OK


def cmd_nonholo_demo(args) -> int:
    from .nonholo import RigidBodyState, VelocityPair, gradient_flow_demo
    state = RigidBodyState.from_pose(args.x, args.y, args.theta)
    if args.v1 is None:
        rng = np.random.default_rng(args.seed)
        d = math.radians(rng.uniform(1, 30)) * rng.choice([-1, 1])
        v1 = np.array([math.cos(args.theta + d), math.sin(args.theta + d)])
        v2 = v1.copy()
    else:
        v1 = np.array(args.v1, float)
        v2 = np.array(args.v2 if args.v2 is not None else args.v1, float)
    tr = gradient_flow_demo(state, VelocityPair(v1, v2, args.dt), args.step, args.iters, literal=args.literal)
    rows = [NONHOLO_HEADER] + [[i, _num(v), _num(w), _num(r)] for i, v, w, r in tr.rows()]
    _write_csv(args.output, rows)
    if tr.diverged:
        print(f"diverged after {len(tr.v) - 1} iterations", file=sys.stderr)
    if args.render:
        from .render import render_velocity_scatter
        _write_text(args.render, render_velocity_scatter(tr.v, tr.omega))
    return EXIT_OK


def cmd_render(args) -> int:
    from .render import render_svg
    scene = load_scene(args.scene)
    traj = load_trajectory(args.trajectory) if args.trajectory else None
    dec = None
    if args.regions:
        from .decomp import decompose
        dec = decompose(scene)
    model = load_robot(args.robot) if args.robot else None
    states = load_trajectory(args.states).states if args.states else None
    _write_text(args.output, render_svg(scene, traj, model, dec, states, width=args.width))
    return EXIT_OK


# --------------------------------------------------------------------------
# helpers


def _num(v) -> str:
    return repr(float(v))


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _write_csv(path, rows, append=False):
    if path:
        with open(path, "a" if append else "w", newline="") as fh:
            csv.writer(fh, lineterminator="\r\n").writerows(rows)
    else:
        csv.writer(sys.stdout, lineterminator="\r\n").writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wsplan", description="Workspace motion planning for link robots.")
    p.add_argument("--seed", type=int, default=0, help="seed for every stochastic component")
    p.add_argument("--config", help="JSON file with 'coord', 'search' and 'sampler' sections")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("decompose", help="free-space regions and adjacency graph as JSON")
    s.add_argument("scene")
    s.add_argument("-o", "--output")
    s.add_argument("--render", help="also write an SVG of the regions")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("plan", help="plan a coordinated trajectory")
    for name in ("scene", "robot", "start", "goal"):
        s.add_argument(name)
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--render")
    _add_coord_flags(s)
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("optimize", help="coordinate given intermediate states")
    s.add_argument("robot")
    s.add_argument("states", help="trajectory file holding the intermediate states")
    s.add_argument("--scene")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--log", help="CSV of per-iteration violation and length (stdout if omitted)")
    _add_coord_flags(s)
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("bench", help="compare planners, one CSV row per run")
    for name in ("scene", "robot", "start", "goal"):
        s.add_argument(name)
    s.add_argument("--planner", nargs="+", choices=["workspace", "prm", "prmstar", "rrt"], default=["workspace"])
    s.add_argument("--seeds", type=int, nargs="*")
    s.add_argument("-o", "--output", help="CSV file, appended to (stdout if omitted)")
    _add_coord_flags(s)
    _add_sampler_flags(s)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("nonholo-demo", help="(v, omega) drift of the side-slip gradient flow")
    s.add_argument("--x", type=float, default=0.0)
    s.add_argument("--y", type=float, default=0.0)
    s.add_argument("--theta", type=float, default=0.0)
    s.add_argument("--v1", type=float, nargs=2)
    s.add_argument("--v2", type=float, nargs=2)
    s.add_argument("--dt", type=float, default=0.1)
    s.add_argument("--step", type=float, default=0.1)
    s.add_argument("--iters", type=int, default=100)
    s.add_argument("--literal", action="store_true", help="use the printed gradient form")
    s.add_argument("-o", "--output")
    s.add_argument("--render", help="also write an SVG scatter")
    s.set_defaults(func=cmd_nonholo_demo)

    s = sub.add_parser("render", help="SVG of a scene with optional overlays")
    s.add_argument("scene")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--trajectory")
    s.add_argument("--regions", action="store_true")
    s.add_argument("--robot")
    s.add_argument("--states")
    s.add_argument("--width", type=int, default=800)
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (PlannerError, OSError, json.JSONDecodeError) as e:
        print(f"wsplan {args.command}: {e}", file=sys.stderr)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
