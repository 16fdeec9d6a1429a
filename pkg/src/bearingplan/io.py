"""JSON/CSV serialization for environments, trees, gains and trajectory logs."""
from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DegenerateInput
from .plan import Environment, PlanTree

BUNDLED = {"kitchen": "kitchen.json"}


def _dump(obj, path):
    text = json.dumps(obj, indent=1, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _pts(a):
    return [[float(x), float(y)] for x, y in np.asarray(a, dtype=float).reshape(-1, 2)]


def bundled_env_path(name: str = "kitchen") -> Path:
    return Path(str(resources.files("bearingplan") / "data" / BUNDLED[name]))


def resolve_env_path(spec) -> Path:
    """Accept a file path or the name of a bundled environment."""
    p = Path(spec)
    if p.exists():
        return p
    if str(spec) in BUNDLED:
        return bundled_env_path(str(spec))
    raise DegenerateInput(f"environment file not found: {spec}")


def env_from_dict(d) -> Environment:
    try:
        env = Environment(
            bounds_box=d["bounds"],
            obstacles=d.get("obstacles", []),
            landmarks=d["landmarks"],
            root=d["root"],
            collision_step=d.get("collision_step"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DegenerateInput(f"malformed environment: {exc}") from exc
    return env.validate()


def load_env(path) -> Environment:
    try:
        d = json.loads(Path(resolve_env_path(path)).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DegenerateInput(f"environment is not valid JSON: {exc}") from exc
    return env_from_dict(d)


def env_to_dict(env: Environment):
    return {
        "bounds": list(env.bounds_box),
        "obstacles": [_pts(o) for o in env.obstacles],
        "landmarks": _pts(env.landmarks),
        "root": [float(v) for v in env.root],
        "collision_step": env.collision_step,
    }


def tree_to_dict(tree: PlanTree):
    return {
        "nodes": _pts(tree.nodes),
        "parents": list(tree.parent),
        "collision_samples": _pts(tree.collision_samples),
    }


def tree_from_dict(d) -> PlanTree:
    try:
        tree = PlanTree(d["nodes"], d["parents"], d.get("collision_samples", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise DegenerateInput(f"malformed tree: {exc}") from exc
    if len(tree.parent) != len(tree.nodes) or not tree.nodes.size:
        raise DegenerateInput("tree needs one parent index per node")
    if tree.parent[0] != 0:
        raise DegenerateInput("node 0 must be the root")
    for i in range(len(tree)):
        tree.path_to_root(i)
    return tree


def save_tree(tree: PlanTree, path):
    _dump(tree_to_dict(tree), path)


def load_tree(path) -> PlanTree:
    return tree_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_json(obj, path):
    _dump(obj, path)


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


CSV_HEADER = ["t", "x", "y", "heading", "edge", "ux", "uy", "V", "min_h", "visible"]


def write_trajectory_csv(log, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in log.rows:
            w.writerow([
                repr(r.t), repr(r.x), repr(r.y), repr(r.heading), f"{r.edge[0]}-{r.edge[1]}",
                repr(r.ux), repr(r.uy), repr(r.V), repr(r.min_h), r.visible,
            ])


def read_trajectory_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
