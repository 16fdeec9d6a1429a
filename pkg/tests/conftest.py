from types import SimpleNamespace

import numpy as np
import pytest

from bearingplan.io import load_env
from bearingplan.plan import Environment, build_cells, rrt_star, simplify_tree
from bearingplan.synth import default_model, synthesize_all

# four starts in the kitchen fixture, each inside the safe cone of its cell;
# the first two need one controller switch on the way to the root
KITCHEN_STARTS = [(2.0, 5.5), (9.5, 1.5), (3.5, 1.0), (7.0, 2.5)]


@pytest.fixture(scope="session")
def kitchen():
    env = load_env("kitchen")
    raw = rrt_star(env, seed=1, max_iter=1500, eta=50.0)
    tree = simplify_tree(raw, env)
    cells = build_cells(tree, env)
    model = default_model(env)
    ctrls = synthesize_all(tree, cells, env.landmarks, model)
    return SimpleNamespace(env=env, raw=raw, tree=tree, cells=cells, model=model, ctrls=ctrls)


@pytest.fixture
def open_env():
    """10 x 10 box without obstacles and four landmarks outside it."""
    return Environment(
        bounds_box=(0, 0, 10, 10),
        obstacles=[],
        landmarks=[[-3, -2], [14, -1], [13, 12], [-2, 13]],
        root=[1, 1],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def run_pipeline(out, starts=KITCHEN_STARTS, mode="displacement", robot="integrator"):
    """plan -> synth -> sim through the command line entry point; returns exit codes."""
    from bearingplan.cli import main

    out = str(out)
    codes = [
        main(["plan", "--env", "kitchen", "--seed", "1", "--iters", "1500", "--eta", "50", "--out", out]),
        main(["synth", "--env", "kitchen", "--tree", f"{out}/tree.json", "--out", out]),
    ]
    argv = ["sim", "--env", "kitchen", "--tree", f"{out}/tree.json", "--gains", f"{out}/gains.json",
            "--mode", mode, "--robot", robot, "--out", out]
    for x, y in starts:
        argv += ["--start", f"{x},{y}"]
    codes.append(main(argv))
    return codes


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline")
    return SimpleNamespace(out=out, codes=run_pipeline(out))


# one line per acceptance criterion, printed after the test session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
