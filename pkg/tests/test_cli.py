import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from bearingplan import io
from bearingplan.cli import main, parse_point
from bearingplan.errors import DegenerateInput
from bearingplan.synth import gains_from_dict, residuals

from conftest import KITCHEN_STARTS

NS = {"s": "http://www.w3.org/2000/svg"}


def _open_env(tmp_path):
    env = {"bounds": [0, 0, 10, 10], "obstacles": [], "landmarks": [[-3, -2], [14, -1], [13, 12], [-2, 13]],
           "root": [1, 1]}
    path = tmp_path / "open.json"
    path.write_text(json.dumps(env))
    return str(path)


def test_parse_point():
    assert np.array_equal(parse_point("1.5,-2"), [1.5, -2])
    for bad in ("1", "a,b", "1,2,3"):
        with pytest.raises(DegenerateInput):
            parse_point(bad)


def test_pipeline_succeeds(pipeline, kitchen):
    assert pipeline.codes == [0, 0, 0]
    out = pipeline.out
    raw, tree = io.load_tree(out / "tree_raw.json"), io.load_tree(out / "tree.json")
    assert len(tree) < len(raw)
    # the command line and the library agree
    assert np.array_equal(tree.nodes, kitchen.tree.nodes) and tree.parent == kitchen.tree.parent
    for k in range(len(KITCHEN_STARTS)):
        rows = io.read_trajectory_csv(out / f"trajectory_{k}.csv")
        last = rows[-1]
        d = np.hypot(float(last["x"]) - tree.nodes[0][0], float(last["y"]) - tree.nodes[0][1])
        assert d <= 0.05


def test_svg_structure(pipeline, kitchen):
    root = ET.parse(pipeline.out / "trajectory.svg").getroot()
    assert len(root.findall(".//s:polygon", NS)) == len(kitchen.env.obstacles)
    assert len(root.findall(".//s:polyline", NS)) == len(KITCHEN_STARTS)
    assert len(root.findall(".//s:g[@id='tree']/s:line", NS)) == len(kitchen.tree) - 1
    assert len(root.findall(".//s:g[@id='collision-samples']/s:circle", NS)) == len(kitchen.raw.collision_samples)


def test_gains_file_reverifies(pipeline, kitchen):
    ctrls, model = gains_from_dict(io.load_json(pipeline.out / "gains.json"))
    for cell in kitchen.cells:
        c = ctrls[cell.edge]
        assert c.margin == kitchen.ctrls[cell.edge].margin
        r = residuals(c.K, c.clf, c.cbf, model, kitchen.env.landmarks, cell.region.vertices)
        assert max(np.max(v) for v in r.values() if v.size) <= 1e-7


def test_plan_is_byte_identical(tmp_path):
    env = _open_env(tmp_path)
    for d in ("a", "b"):
        assert main(["plan", "--env", env, "--seed", "5", "--iters", "200", "--eta", "3", "--out", str(tmp_path / d)]) == 0
    for name in ("tree.json", "tree_raw.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_open_env_margins(tmp_path, capsys):
    env = _open_env(tmp_path)
    out = str(tmp_path)
    assert main(["plan", "--env", env, "--seed", "2", "--iters", "300", "--eta", "3", "--out", out]) == 0
    assert main(["synth", "--env", env, "--tree", f"{out}/tree.json", "--out", out]) == 0
    ctrls, _ = gains_from_dict(io.load_json(tmp_path / "gains.json"))
    assert ctrls and all(c.margin > 0 for c in ctrls.values())
    assert "margin" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    env = _open_env(tmp_path)
    out = str(tmp_path)
    assert main(["plan", "--env", env, "--iters", "0", "--out", out]) == 2
    assert main(["plan", "--env", str(tmp_path / "nope.json"), "--out", out]) == 2
    assert main(["plan", "--env", env, "--seed", "2", "--iters", "100", "--eta", "3", "--out", out]) == 0
    assert main(["synth", "--env", env, "--tree", f"{out}/tree.json", "--u-max", "0", "--out", out]) == 3
    assert "infeasible edges" in capsys.readouterr().err
    assert main(["synth", "--env", env, "--tree", f"{out}/tree.json", "--out", out]) == 0
    sim = ["sim", "--env", env, "--tree", f"{out}/tree.json", "--gains", f"{out}/gains.json", "--out", out]
    assert main(sim + ["--start", "50,50"]) == 2
    assert main(sim + ["--start", "oops"]) == 2
    assert main(sim + ["--start", "9,9", "--max-steps", "3"]) == 4
    # the partial log is still written
    assert len(io.read_trajectory_csv(tmp_path / "trajectory_0.csv")) == 4


def test_start_inside_obstacle_is_rejected(pipeline, kitchen):
    inside = np.mean(kitchen.env.obstacles[0], axis=0)
    out = str(pipeline.out)
    code = main(["sim", "--env", "kitchen", "--tree", f"{out}/tree.json", "--gains", f"{out}/gains.json",
                 "--start", f"{inside[0]},{inside[1]}", "--out", out + "/bad"])
    assert code == 2
