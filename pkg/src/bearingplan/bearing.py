"""Bearing measurements, rescaling to uniformly scaled displacements, and
reconstruction of landmarks outside a limited field of view.

Given bearings ``beta_k`` from the robot and a fixed landmark ``f``, the point
``x + beta_f`` is a scaled copy of ``l_f`` and every other scaled landmark is
found by intersecting the measured bearing line with the line through the
scaled ``l_f`` along the known inter-landmark direction.  The scaled set is the
true landmark set shrunk about ``x`` by ``s = |l_f - x|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geom
from .errors import DegenerateGeometry, DegenerateInput, MissingLandmark, TooFewVisible


@dataclass(frozen=True)
class BearingObservation:
    landmark_id: int
    beta: np.ndarray


@dataclass(frozen=True)
class CameraModel:
    fov_half_angle: float = math.pi
    max_range: float = math.inf
    mode: str = "full"

    def __post_init__(self):
        if not 0 < self.fov_half_angle <= math.pi:
            raise DegenerateInput("fov_half_angle must be in (0, pi]")
        if self.mode not in ("full", "limited"):
            raise DegenerateInput("camera mode is 'full' or 'limited'")

    @classmethod
    def limited(cls, fov_deg: float, max_range: float = math.inf) -> "CameraModel":
        return cls(math.radians(fov_deg), max_range, "limited")


@dataclass
class ScaledLandmarkSet:
    tilde_l: dict
    fixed_landmark: int

    def displacements(self, x, n_landmarks: int) -> np.ndarray:
        """Stacked ``tilde_l[k] - x`` in landmark order."""
        missing = [k for k in range(n_landmarks) if k not in self.tilde_l]
        if missing:
            raise MissingLandmark(f"no scaled position for landmarks {missing}")
        x = np.asarray(x, dtype=float)
        return np.concatenate([self.tilde_l[k] - x for k in range(n_landmarks)])


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


def measure(x, heading: float, landmarks, camera: CameraModel = CameraModel()):
    """World-frame unit bearings to the landmarks the camera can see."""
    x = geom.as_point(x)
    L = np.asarray(landmarks, dtype=float).reshape(-1, 2)
    d = L - x
    dist = np.hypot(d[:, 0], d[:, 1])
    if np.any(dist <= geom.TOL):
        raise DegenerateInput("robot coincides with a landmark")
    beta = d / dist[:, None]
    ok = dist <= camera.max_range
    if camera.mode == "limited":
        ang = np.arctan2(beta[:, 1], beta[:, 0]) - heading
        off = np.abs((ang + np.pi) % (2 * np.pi) - np.pi)
        ok &= off <= camera.fov_half_angle
    ids = np.flatnonzero(ok)
    if len(ids) < 2:
        raise TooFewVisible(f"{len(ids)} landmark(s) visible, need 2")
    return [BearingObservation(int(k), beta[k]) for k in ids]


def inter_landmark_bearings(landmarks, f: int) -> np.ndarray:
    """Unit directions from landmark ``f`` to every landmark (row ``f`` is NaN)."""
    L = np.asarray(landmarks, dtype=float).reshape(-1, 2)
    d = L - L[f]
    n = np.hypot(d[:, 0], d[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        out = d / n[:, None]
    out[f] = np.nan
    return out


def _obs_arrays(obs):
    ids = np.array([o.landmark_id for o in obs], dtype=int)
    betas = np.array([o.beta for o in obs], dtype=float).reshape(-1, 2)
    return ids, betas


def rescale(x, obs, f: int, landmarks) -> ScaledLandmarkSet:
    """Scaled positions of every observed landmark with ``f`` pinned at ``x + beta_f``."""
    x = geom.as_point(x)
    ids, betas = _obs_arrays(obs)
    where = np.flatnonzero(ids == f)
    if not len(where):
        raise DegenerateInput(f"fixed landmark {f} was not observed")
    lf = x + betas[where[0]]
    inter = inter_landmark_bearings(landmarks, f)
    others = ids != f
    pts, sines = geom.intersect_lines_many(
        np.broadcast_to(x, (others.sum(), 2)), betas[others],
        np.broadcast_to(lf, (others.sum(), 2)), inter[ids[others]],
    )
    if np.any(np.abs(sines) <= geom.PARALLEL_TOL):
        bad = ids[others][np.abs(sines) <= geom.PARALLEL_TOL]
        raise DegenerateGeometry(f"robot, landmark {f} and landmark(s) {bad.tolist()} are collinear")
    tilde = {int(f): lf}
    for k, p in zip(ids[others], pts):
        tilde[int(k)] = p
    return ScaledLandmarkSet(tilde, int(f))


def reconstruct_missing(x, visible, f: int, f2: int, landmarks, all_ids=None) -> ScaledLandmarkSet:
    """Scaled positions of all landmarks from the two visible ones ``f`` and ``f2``.

    Each hidden landmark is the intersection of the lines through the scaled
    ``l_f`` and ``l_f2`` along the known directions toward it.
    """
    if f == f2:
        raise DegenerateInput("f and f2 must differ")
    L = np.asarray(landmarks, dtype=float).reshape(-1, 2)
    all_ids = range(len(L)) if all_ids is None else all_ids
    pair = [o for o in visible if o.landmark_id in (f, f2)]
    if len({o.landmark_id for o in pair}) != 2:
        raise DegenerateInput("both f and f2 must be observed")
    base = rescale(x, pair, f, L)
    lf, lf2 = base.tilde_l[f], base.tilde_l[f2]
    hidden = np.array([k for k in all_ids if k not in (f, f2)], dtype=int)
    tilde = dict(base.tilde_l)
    if len(hidden):
        dir_f = inter_landmark_bearings(L, f)[hidden]
        dir_f2 = inter_landmark_bearings(L, f2)[hidden]
        pts, sines = geom.intersect_lines_many(
            np.broadcast_to(lf, (len(hidden), 2)), dir_f,
            np.broadcast_to(lf2, (len(hidden), 2)), dir_f2,
        )
        bad = np.abs(sines) <= geom.PARALLEL_TOL
        if np.any(bad):
            raise DegenerateGeometry(
                f"landmark(s) {hidden[bad].tolist()} collinear with landmarks {f} and {f2}"
            )
        for k, p in zip(hidden, pts):
            tilde[int(k)] = p
    return ScaledLandmarkSet(tilde, int(f))


def bearing_control(ctrl, tilde_set: ScaledLandmarkSet, x) -> np.ndarray:
    """``K @ stack(tilde_l[k] - x)``: the displacement gain applied to scaled landmarks."""
    n_l = ctrl.K.shape[1] // 2
    return ctrl.K @ tilde_set.displacements(x, n_l)


def pair_conditioning(betas_by_id, f: int, f2: int, landmarks, hidden) -> float:
    """Smallest |sine| among the line intersections a reconstruction would need."""
    L = np.asarray(landmarks, dtype=float).reshape(-1, 2)
    inter_f = inter_landmark_bearings(L, f)
    b2 = betas_by_id[f2]
    worst = abs(geom.cross(b2, inter_f[f2]))
    if len(hidden):
        inter_f2 = inter_landmark_bearings(L, f2)
        a, b = inter_f[hidden], inter_f2[hidden]
        worst = min(worst, float(np.min(np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]))))
    return worst


def scaled_landmarks(x, obs, landmarks, ranking):
    """Scaled landmark set with fixed-landmark fallback.

    With every landmark observed, the first landmark in ``ranking`` that gives
    non-degenerate intersections is fixed.  Otherwise the fixed landmark is the
    best-ranked visible one, its partner is the visible landmark giving the best
    conditioned construction, hidden landmarks are reconstructed and the other
    visible ones are rescaled directly.
    """
    L = np.asarray(landmarks, dtype=float).reshape(-1, 2)
    n_l = len(L)
    ids = [o.landmark_id for o in obs]
    seen = set(ids)
    order = [k for k in ranking if k in seen] + sorted(seen - set(ranking))
    if len(seen) == n_l:
        for f in order:
            try:
                return rescale(x, obs, f, L)
            except DegenerateGeometry:
                continue
        raise DegenerateGeometry("every candidate fixed landmark is degenerate")

    betas = {o.landmark_id: o.beta for o in obs}
    for f in order:
        hidden = np.array([k for k in range(n_l) if k not in seen], dtype=int)
        partners = sorted(
            (k for k in seen if k != f),
            key=lambda k: (-pair_conditioning(betas, f, k, L, hidden), k),
        )
        for f2 in partners:
            try:
                out = reconstruct_missing(x, obs, f, f2, L)
            except DegenerateGeometry:
                continue
            rest = [o for o in obs if o.landmark_id not in (f, f2)]
            if rest:
                try:
                    out.tilde_l.update(rescale(x, [o for o in obs if o.landmark_id == f] + rest, f, L).tilde_l)
                except DegenerateGeometry:
                    pass
            return out
    raise DegenerateGeometry("no visible landmark pair gives a non-degenerate reconstruction")
