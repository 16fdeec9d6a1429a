import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from shapely.geometry import LineString

from bearingplan.bearing import CameraModel
from bearingplan.errors import DegenerateInput, NotCovered, SensingStarved, Timeout
from bearingplan.plan import PlanTree, build_cells
from bearingplan.sim import (
    RobotState, SimConfig, discrete_frechet, frechet_upper_bound, normalize, raw_input, run,
    step_integrator, step_unicycle, unicycle_commands,
)
from bearingplan.synth import default_model, synthesize_all

from conftest import KITCHEN_STARTS


def test_normalize_examples():
    assert np.allclose(normalize([3, 4], 1.0), [0.6, 0.8])
    assert np.array_equal(normalize([0, 0], 1.0), [0, 0])
    assert np.array_equal(normalize([1e-10, 0], 1.0), [0, 0])
    assert np.allclose(normalize([0, 2], 0.5), [0, 0.5])


def test_step_integrator_examples():
    assert np.allclose(step_integrator([0, 0], [1, 0], 0.1), [0.1, 0])
    assert np.array_equal(step_integrator([2, 3], [0, 0], 0.1), [2, 3])
    two = step_integrator(step_integrator([0, 0], [1, 2], 0.05), [1, 2], 0.05)
    assert np.allclose(two, step_integrator([0, 0], [1, 2], 0.1), atol=1e-15)


def test_unicycle_examples():
    assert unicycle_commands(0.0, [1, 0], 0.1, 0.5) == pytest.approx((0.1, 0.0))
    assert unicycle_commands(0.0, [0, 1], 0.1, 0.5) == pytest.approx((0.0, 0.5))
    v, w = unicycle_commands(math.pi, [1, 0], 0.1, 0.5)
    assert v == pytest.approx(-0.1) and w == pytest.approx(0.0, abs=1e-15)
    s = step_unicycle(RobotState([0, 0], 0.0, "unicycle"), [1, 0], 1.0)
    assert np.allclose(s.position, [0.1, 0]) and s.heading == 0
    s = step_unicycle(RobotState([0, 0], 0.0, "unicycle"), [0, 1], 1.0)
    assert np.allclose(s.position, [0, 0]) and s.heading == pytest.approx(0.5)
    # dead zone holds position and heading
    s = step_unicycle(RobotState([1, 1], 0.3, "unicycle"), [0, 0], 1.0)
    assert np.array_equal(s.position, [1, 1]) and s.heading == pytest.approx(0.3)


def test_state_and_config_validation():
    assert RobotState([0, 0], 3 * math.pi).heading == pytest.approx(math.pi)
    with pytest.raises(DegenerateInput):
        RobotState([0, 0], 0, "tank")
    for bad in (dict(dt=0), dict(eps_goal=0), dict(alpha=-1), dict(sensing="sonar"), dict(beta_gain=0)):
        with pytest.raises(DegenerateInput):
            SimConfig(**bad)


def test_raw_input_modes(kitchen, rng):
    env, tree, cells, ctrls = kitchen.env, kitchen.tree, kitchen.cells, kitchen.ctrls
    L = env.landmarks
    for cell in cells:
        c = ctrls[cell.edge]
        f = c.landmark_ranking[0]
        for x in cell.region.sample(rng, 20):
            u_d, n_d = raw_input(x, c, L, "displacement")
            u_b, n_b = raw_input(x, c, L, "bearing_full")
            s = np.hypot(*(L[f] - x))
            assert n_d == n_b == len(L)
            assert np.allclose(u_b * s, u_d, atol=1e-9 * max(1.0, np.abs(u_d).max()))
            # a 180 degree half-angle sees everything, so the filter is the identity
            u_f, n_f = raw_input(x, c, L, "bearing_fov", heading=1.0, camera=CameraModel(math.pi, mode="limited"))
            assert n_f == len(L) and np.array_equal(u_f, u_b)


def test_raw_input_zero_gain(kitchen):
    c = next(iter(kitchen.ctrls.values()))
    zero = dataclasses.replace(c, K=np.zeros_like(c.K))
    x = kitchen.tree.nodes[c.edge[0]]
    for mode in ("displacement", "bearing_full"):
        assert np.array_equal(raw_input(x, zero, kitchen.env.landmarks, mode)[0], [0, 0])


def _two_node(open_env):
    tree = PlanTree([[1, 1], [6, 6]], [0, 0])
    cells = build_cells(tree, open_env)
    ctrls = synthesize_all(tree, cells, open_env.landmarks, default_model(open_env))
    return tree, cells, ctrls


def test_start_at_root_succeeds_immediately(open_env):
    tree, cells, ctrls = _two_node(open_env)
    log = run(open_env, tree, cells, ctrls, [1.01, 1.0])
    assert log.status == "success" and len(log) == 1


def test_two_node_straight_line(open_env):
    tree, cells, ctrls = _two_node(open_env)
    log = run(open_env, tree, cells, ctrls, [6, 6], SimConfig(dt=0.01))
    assert log.status == "success"
    P = log.positions()
    # every logged state stays on the diagonal (shapely distance oracle)
    line = LineString([(0, 0), (10, 10)])
    assert max(line.distance(LineString([p, p + 1e-12])) for p in P) <= 1e-9
    V = np.array([r.V for r in log.rows])
    assert np.all(np.diff(V) < 0)
    # constant speed: closed-form arrival step count
    dist = math.hypot(5, 5) - 0.05
    assert len(log) - 1 == math.ceil(dist / (0.5 * 0.01) - 1e-9)
    t = np.array([r.t for r in log.rows])
    assert np.allclose(np.diff(t), 0.01)


def test_not_covered_start(kitchen):
    obs = kitchen.env.obstacles[0]
    inside = np.mean(obs, axis=0)
    with pytest.raises(NotCovered):
        run(kitchen.env, kitchen.tree, kitchen.cells, kitchen.ctrls, inside)
    with pytest.raises(NotCovered):
        run(kitchen.env, kitchen.tree, kitchen.cells, kitchen.ctrls, [50, 50])


def test_timeout_carries_log(kitchen):
    with pytest.raises(Timeout) as err:
        run(kitchen.env, kitchen.tree, kitchen.cells, kitchen.ctrls, KITCHEN_STARTS[0], SimConfig(max_steps=5))
    log = err.value.log
    assert log.status == "timeout" and len(log) == 6


def test_sensing_starved_carries_log(kitchen):
    # a one degree cone facing the root sees at most one landmark
    cfg = SimConfig(sensing="bearing_fov", fov_deg=1.0)
    with pytest.raises(SensingStarved) as err:
        run(kitchen.env, kitchen.tree, kitchen.cells, kitchen.ctrls, KITCHEN_STARTS[2], cfg)
    log = err.value.log
    # ten held steps, then the aborting row
    assert log.status == "starved" and len(log) == 11
    assert all(r.visible == 0 for r in log.rows)


@pytest.mark.parametrize("start", KITCHEN_STARTS)
def test_kitchen_run_invariants(kitchen, start):
    env, tree = kitchen.env, kitchen.tree
    log = run(env, tree, kitchen.cells, kitchen.ctrls, start)
    assert log.status == "success"
    P = log.positions()
    assert env.is_free(P).all()
    # edges follow parent pointers and end at the root
    edges = log.edges()
    for (i, j), (a, b) in zip(edges, edges[1:]):
        assert a == j and b == tree.parent[j]
    assert edges[-1][1] == tree.root
    # V never increases within one edge segment
    for e in edges:
        V = np.array([r.V for r in log.rows if r.edge == e])
        assert np.all(np.diff(V) <= 1e-6 * 0.01)
    # safe-cone rows hold on every logged state
    assert all(r.min_h >= -1e-9 for r in log.rows if not math.isnan(r.min_h))


def test_run_is_deterministic(kitchen):
    cfg = SimConfig(sensing="bearing_fov", robot="unicycle")
    a = run(kitchen.env, kitchen.tree, kitchen.cells, kitchen.ctrls, KITCHEN_STARTS[1], cfg)
    b = run(kitchen.env, kitchen.tree, kitchen.cells, kitchen.ctrls, KITCHEN_STARTS[1], cfg)
    assert a.rows == b.rows


def test_frechet_examples():
    P = [[0, 0], [1, 0], [2, 0]]
    assert discrete_frechet(P, P) == 0
    assert discrete_frechet(P, [[0, 1], [1, 1], [2, 1]]) == pytest.approx(1)
    # a single far point dominates
    assert discrete_frechet(P, [[0, 0], [1, 3], [2, 0]]) == pytest.approx(3)
    with pytest.raises(DegenerateInput):
        discrete_frechet([], P)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=12),
       st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=12))
def test_frechet_bound_dominates_exact(P, Q):
    exact = discrete_frechet(P, Q)
    assert exact <= frechet_upper_bound(P, Q) + 1e-12
    assert exact == pytest.approx(discrete_frechet(Q, P))
    ends = max(np.hypot(*np.subtract(P[0], Q[0])), np.hypot(*np.subtract(P[-1], Q[-1])))
    assert exact >= ends - 1e-12
