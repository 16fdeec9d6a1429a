"""Closed-loop simulation of the switched edge controllers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bearing, geom
from .errors import (
    DegenerateGeometry, DegenerateInput, NotCovered, SensingStarved, Timeout, TooFewVisible,
)
from .plan import locate_edge

SENSING_MODES = ("displacement", "bearing_full", "bearing_fov")
ROBOT_MODELS = ("integrator", "unicycle")
DEAD_ZONE = 1e-9
MAX_HOLD = 10


@dataclass
class RobotState:
    position: np.ndarray
    heading: float = 0.0
    model: str = "integrator"

    def __post_init__(self):
        self.position = geom.as_point(self.position)
        self.heading = bearing.wrap_angle(float(self.heading))
        if self.model not in ROBOT_MODELS:
            raise DegenerateInput(f"unknown robot model {self.model!r}")


@dataclass
class SimConfig:
    dt: float = 0.01
    v_nom: float = 0.5
    eps_switch: float = 1e-3
    eps_goal: float = 0.05
    max_steps: int = 50_000
    sensing: str = "displacement"
    robot: str = "integrator"
    alpha: float = 0.1
    beta_gain: float = 0.5
    fov_deg: float = 45.0
    # None: face the parent node of the starting edge
    heading0: float | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise DegenerateInput("dt must be positive")
        if self.eps_switch <= 0 or self.eps_goal <= 0:
            raise DegenerateInput("eps_switch and eps_goal must be positive")
        if self.alpha <= 0 or self.beta_gain <= 0:
            raise DegenerateInput("alpha and beta_gain must be positive")
        if self.v_nom <= 0:
            raise DegenerateInput("v_nom must be positive")
        if self.max_steps < 0:
            raise DegenerateInput("max_steps must be non-negative")
        if self.sensing not in SENSING_MODES:
            raise DegenerateInput(f"unknown sensing mode {self.sensing!r}")
        if self.robot not in ROBOT_MODELS:
            raise DegenerateInput(f"unknown robot model {self.robot!r}")
        if not 0 < self.fov_deg <= 180:
            raise DegenerateInput("fov_deg must be in (0, 180]")

    def camera(self) -> bearing.CameraModel:
        if self.sensing == "bearing_fov":
            return bearing.CameraModel.limited(self.fov_deg)
        return bearing.CameraModel()


@dataclass
class LogRow:
    t: float
    x: float
    y: float
    heading: float
    edge: tuple
    ux: float
    uy: float
    V: float
    min_h: float
    visible: int


@dataclass
class TrajectoryLog:
    rows: list = field(default_factory=list)
    status: str = "running"

    def positions(self) -> np.ndarray:
        return np.array([[r.x, r.y] for r in self.rows]).reshape(-1, 2)

    def edges(self):
        out = []
        for r in self.rows:
            if not out or out[-1] != r.edge:
                out.append(r.edge)
        return out

    def __len__(self):
        return len(self.rows)


def raw_input(x, ctrl, landmarks, sensing="displacement", heading=0.0, camera=None):
    """Unnormalized input for one controller and the number of landmarks seen.

    Displacement mode uses the true landmark displacements.  The bearing modes
    never use ``x``: the scaled landmark set is built in the robot-centred frame
    from bearings alone and the gain is applied to it.
    """
    L = np.asarray(landmarks, dtype=float)
    if sensing == "displacement":
        return ctrl.u(x, L), len(L)
    if camera is None:
        camera = bearing.CameraModel.limited(45.0) if sensing == "bearing_fov" else bearing.CameraModel()
    obs = bearing.measure(x, heading, L, camera)
    origin = np.zeros(2)
    # bearings are position-free, so build the scaled set about the origin
    scaled = bearing.scaled_landmarks(origin, obs, L, ctrl.landmark_ranking)
    return bearing.bearing_control(ctrl, scaled, origin), len(obs)


def normalize(u, v_nom: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    n = float(np.hypot(*u))
    if n <= DEAD_ZONE:
        return np.zeros(2)
    return v_nom * u / n


def step_integrator(x, u, dt: float, B=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return x + dt * (u if B is None else np.asarray(B) @ u)


def unicycle_commands(heading: float, u, alpha: float, beta_gain: float):
    """Forward speed and yaw rate that steer a unicycle along ``u``."""
    u = np.asarray(u, dtype=float)
    n = float(np.hypot(*u))
    if n <= DEAD_ZONE:
        return 0.0, 0.0
    c, s = math.cos(heading), math.sin(heading)
    v = alpha / n * (c * u[0] + s * u[1])
    omega = beta_gain / n * (c * u[1] - s * u[0])
    return v, omega


def step_unicycle(state: RobotState, u, dt: float, alpha: float = 0.1,
                  beta_gain: float = 0.5) -> RobotState:
    v, omega = unicycle_commands(state.heading, u, alpha, beta_gain)
    c, s = math.cos(state.heading), math.sin(state.heading)
    pos = state.position + dt * v * np.array([c, s])
    return RobotState(pos, state.heading + dt * omega, state.model)


def _log_row(log, k, cfg, state, edge, u, ctrl, visible):
    h = ctrl.cbf.value(state.position)
    log.rows.append(LogRow(
        t=k * cfg.dt,
        x=float(state.position[0]),
        y=float(state.position[1]),
        heading=float(state.heading),
        edge=tuple(edge),
        ux=float(u[0]),
        uy=float(u[1]),
        V=float(ctrl.clf.value(state.position)),
        min_h=float(np.min(h)) if h.size else math.nan,
        visible=int(visible),
    ))


def run(env, tree, cells, controllers, start, cfg: SimConfig = SimConfig()) -> TrajectoryLog:
    """Drive from ``start`` to the tree root, switching controllers at exit faces.

    Every step logs the state before the update together with the input
    applied.  The last row is the terminal state with zero input.
    """
    start = geom.as_point(start)
    if not env.is_free(start)[0]:
        raise NotCovered(f"start {start.tolist()} is not in free space")
    root = tree.root
    goal = tree.nodes[root]
    log = TrajectoryLog()
    camera = cfg.camera()

    if np.hypot(*(start - goal)) <= cfg.eps_goal:
        edge = (root, root)
        state = RobotState(start, cfg.heading0 or 0.0, cfg.robot)
        log.rows.append(LogRow(0.0, float(start[0]), float(start[1]), state.heading, edge,
                               0.0, 0.0, 0.0, math.nan, len(env.landmarks)))
        log.status = "success"
        return log

    edge = locate_edge(start, tree, cells)
    if cfg.heading0 is None:
        d = tree.nodes[edge[1]] - start
        heading0 = math.atan2(d[1], d[0])
    else:
        heading0 = cfg.heading0
    state = RobotState(start, heading0, cfg.robot)
    u_prev = np.zeros(2)
    starved = 0
    visible = 0

    for k in range(cfg.max_steps + 1):
        x = state.position
        ctrl = controllers[edge]
        while edge[1] != root and ctrl.clf.value(x) <= cfg.eps_switch:
            j = edge[1]
            edge = (j, tree.parent[j])
            ctrl = controllers[edge]

        if np.hypot(*(x - goal)) <= cfg.eps_goal:
            _log_row(log, k, cfg, state, edge, np.zeros(2), ctrl, visible)
            log.status = "success"
            return log
        if k == cfg.max_steps:
            _log_row(log, k, cfg, state, edge, np.zeros(2), ctrl, visible)
            log.status = "timeout"
            raise Timeout(f"goal not reached within {cfg.max_steps} steps", log)

        try:
            u_raw, visible = raw_input(x, ctrl, env.landmarks, cfg.sensing, state.heading, camera)
            u = normalize(u_raw, cfg.v_nom)
            starved = 0
        except (TooFewVisible, DegenerateGeometry) as exc:
            starved += 1
            visible = 0
            if starved > MAX_HOLD:
                _log_row(log, k, cfg, state, edge, np.zeros(2), ctrl, visible)
                log.status = "starved"
                raise SensingStarved(f"sensing failed {starved} steps in a row: {exc}", log) from exc
            u = u_prev

        _log_row(log, k, cfg, state, edge, u, ctrl, visible)
        if cfg.robot == "unicycle":
            state = step_unicycle(state, u, cfg.dt, cfg.alpha, cfg.beta_gain)
        else:
            heading = math.atan2(u[1], u[0]) if np.any(u) else state.heading
            state = RobotState(step_integrator(x, u, cfg.dt), heading, cfg.robot)
        u_prev = u

    raise AssertionError("unreachable")


def discrete_frechet(P, Q) -> float:
    """Exact discrete Frechet distance by dynamic programming, O(len(P) * len(Q))."""
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    Q = np.asarray(Q, dtype=float).reshape(-1, 2)
    if not len(P) or not len(Q):
        raise DegenerateInput("curves must be non-empty")
    d = np.hypot(P[:, None, 0] - Q[None, :, 0], P[:, None, 1] - Q[None, :, 1])
    n, m = d.shape
    ca = np.empty_like(d)
    ca[0] = np.maximum.accumulate(d[0])
    for i in range(1, n):
        ca[i, 0] = max(ca[i - 1, 0], d[i, 0])
        prev = ca[i - 1]
        row = ca[i]
        for j in range(1, m):
            row[j] = max(d[i, j], min(prev[j], prev[j - 1], row[j - 1]))
    return float(ca[-1, -1])


def frechet_upper_bound(P, Q) -> float:
    """Cost of the index-aligned coupling, padding the shorter curve with its end.

    This is a valid coupling, so it bounds the discrete Frechet distance from above.
    """
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    Q = np.asarray(Q, dtype=float).reshape(-1, 2)
    if not len(P) or not len(Q):
        raise DegenerateInput("curves must be non-empty")
    n = max(len(P), len(Q))
    P = np.vstack([P, np.repeat(P[-1:], n - len(P), axis=0)])
    Q = np.vstack([Q, np.repeat(Q[-1:], n - len(Q), axis=0)])
    return float(np.max(np.hypot(*(P - Q).T)))
