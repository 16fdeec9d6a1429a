"""Command line entry point: ``plan``, ``synth`` and ``sim`` subcommands."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import (
    BearingPlanError, DegenerateInput, SimulationError, SynthesisInfeasible,
)
from .plan import build_cells, rrt_star, simplify_tree
from .render import render_svg
from .sim import SimConfig, run
from .synth import SystemModel, default_model, gains_from_dict, gains_to_dict, synthesize_all

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_SIM = 4

MODES = {"displacement": "displacement", "bearing-full": "bearing_full", "bearing-fov": "bearing_fov"}


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def parse_point(text: str) -> np.ndarray:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise DegenerateInput(f"expected 'x,y', got {text!r}") from exc
    return np.array([x, y])


def cmd_plan(args) -> int:
    env = io.load_env(args.env)
    if args.iters < 1:
        raise DegenerateInput("--iters must be >= 1")
    if args.eta <= 0:
        raise DegenerateInput("--eta must be positive")
    raw = rrt_star(env, seed=args.seed, max_iter=args.iters, eta=args.eta)
    tree = simplify_tree(raw, env)
    out = _outdir(args.out)
    io.save_tree(raw, out / "tree_raw.json")
    io.save_tree(tree, out / "tree.json")
    print(f"raw tree: {len(raw)} nodes, {len(raw.collision_samples)} collision samples")
    print(f"simplified tree: {len(tree)} nodes -> {out / 'tree.json'}")
    return EXIT_OK


def cmd_synth(args) -> int:
    env = io.load_env(args.env)
    tree = io.load_tree(args.tree)
    if args.cv <= 0 or args.ch <= 0:
        raise DegenerateInput("--cv and --ch must be positive")
    model = default_model(env, args.cv, args.ch) if args.u_max is None else SystemModel.box(args.u_max)
    cells = build_cells(tree, env)
    try:
        ctrls = synthesize_all(tree, cells, env.landmarks, model, args.cv, args.ch)
    except SynthesisInfeasible as exc:
        print(f"infeasible edges: {' '.join(f'{i}-{j}' for i, j in exc.edges)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = _outdir(args.out)
    io.save_json(gains_to_dict(ctrls, model), out / "gains.json")
    for e in sorted(ctrls):
        c = ctrls[e]
        print(f"edge {e[0]}-{e[1]}: margin {c.margin:.6g}, cbf rows {c.cbf.active_rows}, "
              f"fixed landmark {c.fixed_landmark}")
    return EXIT_OK


def cmd_sim(args) -> int:
    env = io.load_env(args.env)
    tree = io.load_tree(args.tree)
    ctrls, _ = gains_from_dict(io.load_json(args.gains))
    cells = build_cells(tree, env)
    missing = [c.edge for c in cells if c.edge not in ctrls]
    if missing:
        raise DegenerateInput(f"gains file lacks edges {missing}")
    starts = [parse_point(s) for s in args.start]
    cfg = SimConfig(
        dt=args.dt, v_nom=args.v_nom, max_steps=args.max_steps, sensing=MODES[args.mode],
        robot=args.robot, alpha=args.alpha, beta_gain=args.beta, fov_deg=args.fov_deg,
    )
    out = _outdir(args.out)
    code = EXIT_OK
    paths = []
    for k, start in enumerate(starts):
        try:
            log = run(env, tree, cells, ctrls, start, cfg)
        except SimulationError as exc:
            log = exc.log
            print(f"start {k}: {type(exc).__name__}: {exc}", file=sys.stderr)
            code = EXIT_SIM
        if log is not None:
            io.write_trajectory_csv(log, out / f"trajectory_{k}.csv")
            paths.append(log.positions())
            print(f"start {k} ({start[0]:g},{start[1]:g}): {log.status}, {len(log)} rows")
    render_svg(env, tree, paths, out / "trajectory.svg")
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bearingplan", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("plan", help="grow and simplify the RRT* tree")
    a.add_argument("--env", required=True, help="environment JSON or 'kitchen'")
    a.add_argument("--seed", type=int, default=1)
    a.add_argument("--iters", type=int, default=1500)
    a.add_argument("--eta", type=float, default=50.0)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_plan)

    a = sub.add_parser("synth", help="synthesize one gain matrix per tree edge")
    a.add_argument("--env", required=True)
    a.add_argument("--tree", required=True)
    a.add_argument("--cv", type=float, default=1.0)
    a.add_argument("--ch", type=float, default=1.0)
    a.add_argument("--u-max", type=float, default=None, help="input box half-width")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_synth)

    a = sub.add_parser("sim", help="simulate from one or more start points")
    a.add_argument("--env", required=True)
    a.add_argument("--tree", required=True)
    a.add_argument("--gains", required=True)
    a.add_argument("--start", action="append", required=True, help="x,y (repeatable)")
    a.add_argument("--mode", choices=sorted(MODES), default="displacement")
    a.add_argument("--robot", choices=["integrator", "unicycle"], default="integrator")
    a.add_argument("--fov-deg", type=float, default=45.0, help="half-angle of the camera cone")
    a.add_argument("--alpha", type=float, default=0.1)
    a.add_argument("--beta", type=float, default=0.5)
    a.add_argument("--dt", type=float, default=0.01)
    a.add_argument("--v-nom", type=float, default=0.5)
    a.add_argument("--max-steps", type=int, default=50_000)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_sim)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DegenerateInput, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BearingPlanError as exc:
        # NotCovered and the other geometric errors are input problems too
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
