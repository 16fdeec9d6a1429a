"""Per-edge CLF/CBF construction and robust LP synthesis of output-feedback gains.

The controller for edge ``(i, j)`` is ``u(x) = K @ Y(x)`` where ``Y(x)`` stacks
the landmark displacements ``l_k - x``.  For fixed ``K`` every constraint is
affine in ``x``, so imposing it at the vertices of the cell imposes it on the
whole cell.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import geom
from .errors import DegenerateInput, Infeasible, LandmarkInsideCell, SynthesisInfeasible

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-7
# slack kept by the tie-break stage; bounds how far past x_j the flow may aim
MARGIN_CAP = 1e-3


@dataclass
class SystemModel:
    """Driftless dynamics ``xdot = B u`` with input set ``{u : A_u u <= b_u}``."""

    B: np.ndarray
    A_u: np.ndarray
    b_u: np.ndarray

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float).reshape(2, 2)
        self.A_u = np.asarray(self.A_u, dtype=float).reshape(-1, 2)
        self.b_u = np.asarray(self.b_u, dtype=float).reshape(-1)
        if len(self.A_u) != len(self.b_u):
            raise DegenerateInput("A_u and b_u row counts differ")
        if np.linalg.matrix_rank(self.B) < 2:
            raise DegenerateInput("B must be full rank")
        if np.any(self.b_u < 0):
            raise DegenerateInput("input set must contain the origin")

    @classmethod
    def box(cls, u_max: float, B=None) -> "SystemModel":
        B = np.eye(2) if B is None else B
        A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        return cls(B, A, np.full(4, float(u_max)))


def default_model(env, c_v: float = 1.0, c_h: float = 1.0) -> SystemModel:
    """Identity dynamics and a box input set wide enough for the workspace."""
    return SystemModel.box(2.0 * max(c_v, c_h) * env.diagonal)


@dataclass
class EdgeClf:
    """Linear Lyapunov function ``V(x) = z . (x_j - x)``, zero on the exit face."""

    z: np.ndarray
    x_j: np.ndarray
    c_v: float

    def value(self, x):
        return (np.asarray(x, dtype=float) - self.x_j) @ -self.z

    @property
    def grad(self):
        return -self.z


@dataclass
class EdgeCbf:
    """Affine barrier ``h(x) = A_h x + b_h`` with zero, one or two rows."""

    A_h: np.ndarray
    b_h: np.ndarray
    c_h: float
    samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        self.A_h = np.asarray(self.A_h, dtype=float).reshape(-1, 2)
        self.b_h = np.asarray(self.b_h, dtype=float).reshape(-1)
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 2)

    @property
    def active_rows(self) -> int:
        return len(self.b_h)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.A_h.T + self.b_h


@dataclass
class EdgeController:
    edge: tuple
    K: np.ndarray
    clf: EdgeClf
    cbf: EdgeCbf
    fixed_landmark: int
    s_min: float
    s_max: float
    margin: float
    landmark_ranking: list = field(default_factory=list)

    def u(self, x, landmarks):
        """Displacement-feedback input ``K @ stack(l_k - x)``."""
        return self.K @ displacement_stack(landmarks, x)

    def modified_constants(self):
        return modified_constants(self.clf.c_v, self.cbf.c_h, self.s_min, self.s_max)


def displacement_stack(landmarks, x) -> np.ndarray:
    return (np.asarray(landmarks, dtype=float) - np.asarray(x, dtype=float)).reshape(-1)


def build_clf(x_i, x_j, c_v: float = 1.0) -> EdgeClf:
    x_i, x_j = geom.as_point(x_i), geom.as_point(x_j)
    d = x_j - x_i
    dist = float(np.hypot(*d))
    if dist <= geom.TOL:
        raise DegenerateInput("edge endpoints coincide")
    if c_v <= 0:
        raise DegenerateInput("c_v must be positive")
    return EdgeClf(d / dist, x_j, float(c_v))


def side_of_edge(x_i, x_j, pts) -> np.ndarray:
    """True for points on the left of i->j; points on the line count as left."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    d = np.asarray(x_j, dtype=float) - np.asarray(x_i, dtype=float)
    w = pts - x_i
    return d[0] * w[:, 1] - d[1] * w[:, 0] >= 0


def build_cbf(x_i, x_j, region, collision_samples, c_h: float = 1.0) -> EdgeCbf:
    """Cone of two lines through ``x_j`` and the closest collision sample on each side.

    Only samples inside ``region`` are considered; a side without samples
    contributes no row.
    """
    x_i, x_j = geom.as_point(x_i), geom.as_point(x_j)
    if c_h <= 0:
        raise DegenerateInput("c_h must be positive")
    samples = np.asarray(collision_samples, dtype=float).reshape(-1, 2)
    if len(samples):
        samples = samples[region.contains_many(samples)]
    rows, offsets, picked = [], [], []
    if len(samples):
        left = side_of_edge(x_i, x_j, samples)
        dist = geom.point_segment_distance(samples, x_i, x_j)
        for mask in (left, ~left):
            if not mask.any():
                continue
            idx = np.flatnonzero(mask)
            o = samples[idx[np.argmin(dist[idx])]]
            d = o - x_j
            norm = float(np.hypot(*d))
            if norm <= geom.TOL:
                continue
            n = np.array([-d[1], d[0]]) / norm
            b = -float(n @ x_j)
            hi = float(n @ x_i + b)
            if abs(hi) <= geom.TOL:
                warnings.warn("collision sample collinear with edge; barrier row dropped")
                continue
            if hi < 0:
                n, b = -n, -b
            rows.append(n)
            offsets.append(b)
            picked.append(o)
    return EdgeCbf(np.array(rows).reshape(-1, 2), np.array(offsets), float(c_h), np.array(picked))


def solve_feasibility_lp(num_vars: int, A, bounds, prefer=None, slack_cap=None):
    """Maximize a uniform slack ``t`` in ``A v + t <= bounds`` with ``0 <= t <= 1``.

    ``prefer=(P, p)`` then picks, among points keeping slack
    ``min(t, slack_cap)``, the one minimizing ``||P v - p||_1``.  Returns
    ``(v, margin)`` where ``margin`` is the slack ``v`` actually achieves,
    capped at 1.
    """
    A = np.asarray(A, dtype=float).reshape(-1, num_vars)
    bounds = np.asarray(bounds, dtype=float).reshape(-1)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(bounds))):
        raise DegenerateInput("constraints must be finite")
    m = len(bounds)
    c = np.zeros(num_vars + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, np.ones((m, 1))])
    var_bounds = [(None, None)] * num_vars + [(0.0, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=bounds, bounds=var_bounds, method="highs-ds")
    if res.status == 2:
        raise Infeasible("no point with non-negative margin")
    if res.status != 0:
        raise Infeasible(f"LP solver failed: {res.message}")
    v, t = res.x[:num_vars], float(res.x[-1])

    if prefer is not None:
        P, p = prefer
        P = np.asarray(P, dtype=float).reshape(-1, num_vars)
        p = np.asarray(p, dtype=float).reshape(-1)
        k = len(p)
        if slack_cap is not None:
            t = min(t, float(slack_cap))
        # variables [v, e]; minimize sum(e) with |P v - p| <= e
        c2 = np.concatenate([np.zeros(num_vars), np.ones(k)])
        A2 = np.vstack([
            np.hstack([A, np.zeros((m, k))]),
            np.hstack([P, -np.eye(k)]),
            np.hstack([-P, -np.eye(k)]),
        ])
        b2 = np.concatenate([bounds - t, p, -p])
        res2 = linprog(c2, A_ub=A2, b_ub=b2, bounds=[(None, None)] * num_vars + [(0, None)] * k,
                       method="highs-ds")
        if res2.status == 0 and np.min(bounds - A @ res2.x[:num_vars]) >= t - RESIDUAL_TOL * 1e-2:
            v = res2.x[:num_vars]

    achieved = float(np.min(bounds - A @ v)) if m else 1.0
    return v, min(max(achieved, 0.0), 1.0) + 0.0


def constraint_rows(clf: EdgeClf, cbf: EdgeCbf, model: SystemModel):
    """Per-point constraint generators ``(g, bound_fn)`` meaning ``g . u(x) <= bound_fn(x)``.

    Rows are scaled so that ``g`` has unit norm.
    """
    rows = []
    g = -model.B.T @ clf.z
    s = float(np.hypot(*g))
    rows.append(("clf", g / s, lambda x, s=s: -clf.c_v * clf.value(x) / s))
    for r in range(cbf.active_rows):
        g = -model.B.T @ cbf.A_h[r]
        s = float(np.hypot(*g))
        rows.append(("cbf", g / s, lambda x, r=r, s=s: cbf.c_h * cbf.value(x)[..., r] / s))
    for r in range(len(model.b_u)):
        g = model.A_u[r]
        s = float(np.hypot(*g))
        if s == 0:
            continue
        rows.append(("input", g / s, lambda x, r=r, s=s: np.full(np.shape(x)[:-1], model.b_u[r] / s)))
    return rows


def residuals(K, clf, cbf, model, landmarks, pts):
    """Constraint values ``g . u(x) - bound(x)`` (<= 0 when satisfied).

    Returns ``{kind: array (n_points, n_rows_of_kind)}``.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    L = np.asarray(landmarks, dtype=float)
    Y = (L[None, :, :] - pts[:, None, :]).reshape(len(pts), -1)
    U = Y @ K.T
    out = {"clf": [], "cbf": [], "input": []}
    for kind, g, bound in constraint_rows(clf, cbf, model):
        out[kind].append(U @ g - bound(pts))
    return {k: (np.stack(v, axis=1) if v else np.zeros((len(pts), 0))) for k, v in out.items()}


def synthesize_gain(edge, region, clf: EdgeClf, cbf: EdgeCbf, model: SystemModel, landmarks):
    """Solve for ``K`` so the CLF, CBF and input rows hold on all of ``region``.

    Returns ``(K, margin)``; raises SynthesisInfeasible for this edge.
    """
    L = np.asarray(landmarks, dtype=float).reshape(-1, 2)
    if len(L) < 2:
        raise DegenerateInput("need at least two landmarks")
    verts = region.vertices
    if len(verts) < 3:
        raise DegenerateInput("cell needs at least three vertices")
    ny = 2 * len(L)
    nvar = 2 * ny
    A, b = [], []
    gens = constraint_rows(clf, cbf, model)
    for v in verts:
        Y = displacement_stack(L, v)
        for _, g, bound in gens:
            A.append(np.outer(g, Y).ravel())
            b.append(float(bound(v)))
    # Prefer the field aimed just past the parent, x_j + (MARGIN_CAP / c_v) z.
    # A larger margin would let the flow cross the exit face far from x_j.
    Binv = np.linalg.inv(model.B)
    aim = clf.x_j + MARGIN_CAP / clf.c_v * clf.z
    P, p = [], []
    for v in verts:
        Y = displacement_stack(L, v)
        ref = Binv @ (clf.c_v * (aim - v))
        for r in range(2):
            row = np.zeros((2, ny))
            row[r] = Y
            P.append(row.ravel())
            p.append(ref[r])
    try:
        sol, margin = solve_feasibility_lp(nvar, np.array(A), np.array(b), prefer=(np.array(P), np.array(p)),
                                           slack_cap=MARGIN_CAP)
    except Infeasible as exc:
        raise SynthesisInfeasible([edge], f"edge {edge}: {exc}") from exc
    return sol.reshape(2, ny), margin


def scale_bounds(region, l_f):
    """Distance bounds ``(s_min, s_max)`` between landmark ``l_f`` and the cell."""
    l_f = geom.as_point(l_f)
    s_min = geom.point_polygon_distance(l_f, region.vertices)
    if s_min <= geom.TOL:
        raise LandmarkInsideCell(f"landmark {l_f.tolist()} touches the cell")
    s_max = float(np.max(np.hypot(*(region.vertices - l_f).T)))
    return s_min, s_max


def modified_constants(c_v, c_h, s_min, s_max):
    """Barrier/Lyapunov rates that hold for the bearing input ``u / s``."""
    if not 0 < s_min <= s_max:
        raise DegenerateInput("need 0 < s_min <= s_max")
    return c_v / s_max, c_h / s_min


def landmark_ranking(region, landmarks):
    """Candidate fixed landmarks, best first, with their scale bounds.

    Landmarks at least 1 m from the cell come first ordered by ``s_max``; the
    rest follow by decreasing ``s_min``.  Landmarks touching the cell are left
    out.
    """
    far, near, bounds = [], [], {}
    for k, l in enumerate(np.asarray(landmarks, dtype=float)):
        try:
            s_min, s_max = scale_bounds(region, l)
        except LandmarkInsideCell:
            continue
        bounds[k] = (s_min, s_max)
        (far if s_min >= 1.0 else near).append(k)
    far.sort(key=lambda k: (bounds[k][1], k))
    near.sort(key=lambda k: (-bounds[k][0], k))
    return far + near, bounds


def synthesize_edge(tree, cell, landmarks, model, c_v=1.0, c_h=1.0) -> EdgeController:
    i, j = cell.edge
    x_i, x_j = tree.nodes[i], tree.nodes[j]
    clf = build_clf(x_i, x_j, c_v)
    cbf = build_cbf(x_i, x_j, cell.region, tree.collision_samples, c_h)
    ranking, sb = landmark_ranking(cell.region, landmarks)
    if not ranking:
        raise SynthesisInfeasible([cell.edge], f"edge {cell.edge}: every landmark touches the cell")
    f = ranking[0]
    if sb[f][0] < 1.0:
        warnings.warn(
            f"edge {cell.edge}: no landmark is 1 m from the cell; the rescaled input is "
            "no longer guaranteed to stay in the input set"
        )
    K, margin = synthesize_gain(cell.edge, cell.region, clf, cbf, model, landmarks)
    return EdgeController(cell.edge, K, clf, cbf, f, sb[f][0], sb[f][1], margin, ranking)


def synthesize_all(tree, cells, landmarks, model, c_v=1.0, c_h=1.0):
    """Synthesize every edge; returns ``{edge: EdgeController}``.

    Infeasible edges are collected and reported together; the exception keeps
    the feasible controllers in ``.controllers``.
    """
    out, bad = {}, []
    for cell in cells:
        try:
            out[cell.edge] = synthesize_edge(tree, cell, landmarks, model, c_v, c_h)
        except SynthesisInfeasible as exc:
            log.warning("%s", exc)
            bad.extend(exc.edges)
    if bad:
        err = SynthesisInfeasible(bad)
        err.controllers = out
        raise err
    return out


def controller_to_dict(ctrl: EdgeController, model: SystemModel):
    return {
        "edge": [int(ctrl.edge[0]), int(ctrl.edge[1])],
        "K": [float(v) for v in ctrl.K.ravel()],
        "K_shape": list(ctrl.K.shape),
        "z": [float(v) for v in ctrl.clf.z],
        "x_j": [float(v) for v in ctrl.clf.x_j],
        "A_h": [[float(a), float(b)] for a, b in ctrl.cbf.A_h],
        "b_h": [float(v) for v in ctrl.cbf.b_h],
        "c_v": ctrl.clf.c_v,
        "c_h": ctrl.cbf.c_h,
        "fixed_landmark": int(ctrl.fixed_landmark),
        "landmark_ranking": [int(k) for k in ctrl.landmark_ranking],
        "s_min": float(ctrl.s_min),
        "s_max": float(ctrl.s_max),
        "margin": float(ctrl.margin),
    }


def controller_from_dict(d) -> EdgeController:
    K = np.asarray(d["K"], dtype=float).reshape(d["K_shape"])
    clf = EdgeClf(np.asarray(d["z"], dtype=float), np.asarray(d["x_j"], dtype=float), float(d["c_v"]))
    cbf = EdgeCbf(d["A_h"], d["b_h"], float(d["c_h"]))
    return EdgeController(
        tuple(d["edge"]), K, clf, cbf, int(d["fixed_landmark"]),
        float(d["s_min"]), float(d["s_max"]), float(d["margin"]), list(d["landmark_ranking"]),
    )


def gains_to_dict(controllers, model: SystemModel):
    return {
        "model": {"B": model.B.tolist(), "A_u": model.A_u.tolist(), "b_u": model.b_u.tolist()},
        "edges": [controller_to_dict(controllers[e], model) for e in sorted(controllers)],
    }


def gains_from_dict(d):
    m = d["model"]
    model = SystemModel(m["B"], m["A_u"], m["b_u"])
    ctrls = {}
    for e in d["edges"]:
        c = controller_from_dict(e)
        ctrls[c.edge] = c
    return ctrls, model
