"""Grasp candidates, necessary conditions and the robust grasp planner.

Frames: a grasp pose ``(x, y, theta)`` puts the gripper centre at (x, y)
with the closing axis at angle ``theta``. In the grasp frame the interior
region between the open jaws is the box ``|u| <= W/2, |v| <= L/2`` with
``W = max_width`` and ``L = jaw_length``; the jaws sit just outside it.

Members of a group are ordered along the closing axis by their centroids;
the first and last define the initial grasp diameter ``h0``.

Two routes compute the necessary conditions. :func:`check_necessary_conditions`
is the readable reference built from the scalar geometry routines (polygon
clipping and point-to-segment distances). :func:`necessary_conds_proba` and
the planner use a batched kernel that evaluates every (candidate,
Monte-Carlo sample) pair in one numpy pass without clipping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import geometry as geo
from .contact import FrictionModel, multi_object_min_diameter
from .errors import ConfigError
from .geometry import ConvexPolygon, OrientedRect, Pose2

N_G_MAX = 4
N_P = 25
N_THETA = 12
N_S = 5
AREA_EPS = 1e-9
DIAMETER_EPS = 1e-9
DEFAULT_CLEARANCE = 1.0


@dataclass(frozen=True)
class GripperSpec:
    max_width: float = 85.0
    jaw_length: float = 44.0
    jaw_thickness: float = 6.0
    max_force: float = 235.0  # nominal, metadata only

    def __post_init__(self):
        if self.max_width <= 0 or self.jaw_length <= 0 or self.jaw_thickness <= 0:
            raise ConfigError("gripper dimensions must be positive")


@dataclass(frozen=True)
class GraspAction:
    pose: Pose2

    @classmethod
    def at(cls, x: float, y: float, theta: float) -> "GraspAction":
        return cls(Pose2(x, y, theta))

    @property
    def x(self) -> float:
        return self.pose.x

    @property
    def y(self) -> float:
        return self.pose.y

    @property
    def theta(self) -> float:
        return self.pose.theta

    def as_array(self) -> np.ndarray:
        return self.pose.as_array()


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian control and state noise for Monte-Carlo robustness.

    ``sigma_u`` is (x mm, y mm, theta rad); ``sigma_x`` is the per-axis
    standard deviation of a rigid translation applied to each object.
    """

    sigma_u: tuple = (2.0, 2.0, math.radians(2.0))
    sigma_x: float = 2.0
    n_mc: int = 30
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sigma_u", tuple(float(s) for s in self.sigma_u))
        if len(self.sigma_u) != 3 or min(self.sigma_u) < 0 or self.sigma_x < 0:
            raise ConfigError("noise standard deviations must be non-negative")
        if self.n_mc < 1:
            raise ConfigError("n_mc must be >= 1")

    def with_seed(self, seed: int) -> "NoiseModel":
        return NoiseModel(self.sigma_u, self.sigma_x, self.n_mc, int(seed))

    def draw(self, rng: np.random.Generator, n_objects: int):
        """Control offsets (n_mc, 3) and object translations (n_mc, n_objects, 2)."""
        du = rng.standard_normal((self.n_mc, 3)) * np.asarray(self.sigma_u)
        dx = rng.standard_normal((self.n_mc, n_objects, 2)) * self.sigma_x
        return du, dx


ZERO_NOISE = NoiseModel((0.0, 0.0, 0.0), 0.0, 1, 0)


@dataclass(frozen=True)
class ObjectGroup:
    members: tuple

    def __post_init__(self):
        m = tuple(int(i) for i in self.members)
        if not m:
            raise ValueError("object group must be non-empty")
        if len(set(m)) != len(m):
            raise ValueError(f"object group has repeated members: {m}")
        object.__setattr__(self, "members", m)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class CandidateEval:
    action: GraspAction
    gamma: float
    n_g_pred: float
    score: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma out of range: {self.gamma}")
        object.__setattr__(self, "score", self.gamma * self.n_g_pred)


def _members(scene, group):
    return [scene[i] for i in group]


def gripper_interior(action: GraspAction, spec: GripperSpec, width: Optional[float] = None) -> OrientedRect:
    """Region between the jaws opened to ``width`` (defaults to fully open)."""
    w = spec.max_width if width is None else width
    if not 0 <= w <= spec.max_width:
        raise ValueError(f"width {w} outside [0, {spec.max_width}]")
    c, s = math.cos(action.theta), math.sin(action.theta)
    return OrientedRect((action.x, action.y), (c, s), max(w, 1e-12) / 2.0, spec.jaw_length / 2.0)


def jaw_footprints(action: GraspAction, spec: GripperSpec, width: Optional[float] = None):
    """Left and right jaw rectangles when the gripper is opened to ``width``."""
    w = spec.max_width if width is None else width
    c, s = math.cos(action.theta), math.sin(action.theta)
    off = w / 2.0 + spec.jaw_thickness / 2.0
    out = []
    for sign in (-1.0, 1.0):
        centre = (action.x + sign * off * c, action.y + sign * off * s)
        out.append(OrientedRect(centre, (c, s), spec.jaw_thickness / 2.0, spec.jaw_length / 2.0))
    return tuple(out)


def jaw_faces(action: GraspAction, spec: GripperSpec, width: Optional[float] = None):
    """Inner jaw faces as segments (left, right), each a (2, 2) array."""
    rect = gripper_interior(action, spec, width)
    c = rect.corners()
    return np.array([c[0], c[3]]), np.array([c[1], c[2]])


# ---------------------------------------------------------------------------
# candidate generation

def _reach(spec: GripperSpec, clearance: float) -> float:
    return math.hypot(spec.max_width / 2.0 + spec.jaw_thickness, spec.jaw_length / 2.0) + clearance


def _nearby_objects(scene, points, reach):
    idx = []
    for i, p in enumerate(scene):
        v = p.vertices
        c = v.mean(axis=0)
        r = float(np.hypot(*(v - c).T).max())
        if float(np.hypot(*(points - c).T).min()) <= reach + r:
            idx.append(i)
    return idx


def candidate_poses(scene, group, spec: GripperSpec, n_p: int = N_P, n_theta: int = N_THETA,
                    clearance: Optional[float] = DEFAULT_CLEARANCE) -> np.ndarray:
    """Collision-free grasp poses for ``group`` as a (C, 3) array.

    Poses are point-major: all orientations at the first cover point, then
    the next point. A pose is rejected if either jaw overlaps any object in
    the scene, or (with a ``clearance``) if the interior region grown by
    ``clearance`` overlaps an object outside the group.
    """
    members = _members(scene, group)
    hull = geo.convex_hull(np.concatenate([p.vertices for p in members]))
    pts = geo.uniform_cover_points(hull, n_p)
    thetas = np.arange(n_theta) * (math.pi / n_theta)
    poses = np.column_stack([np.repeat(pts, n_theta, axis=0), np.tile(thetas, len(pts))])
    near = _nearby_objects(scene, pts, _reach(spec, clearance or 0.0))
    if not near:
        return poses
    P = geo.pad_vertices([scene[i] for i in near])
    F = geo.to_grasp_frame(P[None, :, :, :], poses[:, None, :])
    W2, L2, T = spec.max_width / 2.0, spec.jaw_length / 2.0, spec.jaw_thickness
    hit = np.zeros(len(poses), dtype=bool)
    for lo, hi in ((-W2 - T, -W2), (W2, W2 + T)):
        hit |= np.any(geo.overlaps_box_batch(F, lo, hi, -L2, L2), axis=1)
    if clearance is not None:
        gset = set(group)
        outside = np.array([i not in gset for i in near])
        if outside.any():
            c = clearance
            hit |= np.any(geo.overlaps_box_batch(F[:, outside], -W2 - c, W2 + c, -L2 - c, L2 + c), axis=1)
    return poses[~hit]


def gen_grasp_cands(scene, group, spec: GripperSpec, n_p: int = N_P, n_theta: int = N_THETA,
                    clearance: Optional[float] = DEFAULT_CLEARANCE) -> list:
    return [GraspAction.at(*p) for p in candidate_poses(scene, group, spec, n_p, n_theta, clearance)]


# ---------------------------------------------------------------------------
# necessary conditions, scalar reference route

def condition_report(scene, group, action: GraspAction, spec: GripperSpec,
                     friction: FrictionModel, n_s: int = N_S) -> dict:
    """Intersection areas, initial/minimum diameters and the verdict."""
    members = _members(scene, group)
    rect = gripper_interior(action, spec)
    clips = [geo.clip_polygon_to_rect(p, rect) for p in members]
    areas = [0.0 if c is None else c.area for c in clips]
    hstar = multi_object_min_diameter(members, friction, n_s)
    report = {"areas": areas, "h_star_f": hstar, "h0": None,
              "intersection_ok": all(c is not None for c in clips), "diameter_ok": False}
    if report["intersection_ok"]:
        u = np.asarray(rect.axis_u)
        proj = [float(p.centroid @ u) for p in members]
        order = sorted(range(len(clips)), key=lambda k: proj[k])
        left_face, right_face = jaw_faces(action, spec)
        b_l = geo.min_distance(clips[order[0]], left_face)
        b_r = geo.min_distance(clips[order[-1]], right_face)
        h0 = spec.max_width - (b_l + b_r)
        report.update(h0=h0, b_l=b_l, b_r=b_r, diameter_ok=h0 + DIAMETER_EPS >= hstar)
    report["admissible"] = report["intersection_ok"] and report["diameter_ok"]
    return report


def check_necessary_conditions(scene, group, action: GraspAction, spec: GripperSpec,
                               friction: FrictionModel, n_s: int = N_S) -> bool:
    """Positive intersection area for every member, and h0 >= h*_f."""
    return condition_report(scene, group, action, spec, friction, n_s)["admissible"]


def total_intersection_area(scene, group, action: GraspAction, spec: GripperSpec) -> float:
    rect = gripper_interior(action, spec)
    total = 0.0
    for p in _members(scene, group):
        c = geo.clip_polygon_to_rect(p, rect)
        if c is not None:
            total += c.area
    return total


# ---------------------------------------------------------------------------
# batched route

def interior_clips(member_verts: np.ndarray, poses: np.ndarray, spec: GripperSpec,
                   offsets: Optional[np.ndarray] = None) -> np.ndarray:
    """Clip padded members (n, K, 2) to the interior box of each pose.

    ``poses`` has shape (..., 3) and ``offsets`` (..., n, 2); the result is
    (..., n, K+4, 2) in grasp-frame coordinates.
    """
    P = member_verts
    if offsets is not None:
        P = P + offsets[..., None, :]
    F = geo.to_grasp_frame(P, poses[..., None, :])
    W2, L2 = spec.max_width / 2.0, spec.jaw_length / 2.0
    return geo.clip_batch_to_box(F, -W2, W2, -L2, L2)


def conditions_batch(member_verts: np.ndarray, member_centroids: np.ndarray, poses: np.ndarray,
                     spec: GripperSpec, hstar: float, offsets: Optional[np.ndarray] = None):
    """Both necessary conditions for padded members under many poses.

    ``member_verts`` is (n, K, 2) and ``member_centroids`` (n, 2); ``poses``
    has shape (..., 3) and ``offsets`` (..., n, 2) translates each member.
    Positive overlap is decided by a separating-axis test and the clipped
    extents come from the jaw-band crossings, so nothing is clipped.
    Returns (admissible, h0), each of shape (...).
    """
    P, c = member_verts, member_centroids
    if offsets is not None:
        P = P + offsets[..., None, :]
        c = c + offsets
    frames = poses[..., None, :]
    F = geo.to_grasp_frame(P, frames)
    cx = geo.to_grasp_frame(c[..., None, :], frames)[..., 0, 0]
    W2, L2 = spec.max_width / 2.0, spec.jaw_length / 2.0
    eq4 = np.all(geo.overlaps_box_batch(F, -W2, W2, -L2, L2), axis=-1)
    lo, hi = geo.box_x_extent_batch(F, -W2, W2, -L2, L2)
    first = np.argmin(cx, axis=-1)[..., None]
    last = np.argmax(cx, axis=-1)[..., None]
    h0 = np.take_along_axis(hi, last, -1)[..., 0] - np.take_along_axis(lo, first, -1)[..., 0]
    h0 = np.where(eq4, h0, -np.inf)
    return eq4 & (h0 + DIAMETER_EPS >= hstar), h0


def candidate_rng(seed: int, index: int) -> np.random.Generator:
    """Per-candidate stream, independent of evaluation order."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])


def gamma_batch(scene, group, poses: np.ndarray, spec: GripperSpec, friction: FrictionModel,
                noise: NoiseModel, n_s: int = N_S, first_index: int = 0) -> np.ndarray:
    """Monte-Carlo probability of the necessary conditions for each pose."""
    members = _members(scene, group)
    hstar = multi_object_min_diameter(members, friction, n_s)
    V = geo.pad_vertices(members)
    cen = np.array([p.centroid for p in members])
    C = len(poses)
    du = np.empty((C, noise.n_mc, 3))
    dx = np.empty((C, noise.n_mc, len(members), 2))
    for k in range(C):
        du[k], dx[k] = noise.draw(candidate_rng(noise.seed, first_index + k), len(members))
    ok, _ = conditions_batch(V, cen, poses[:, None, :] + du, spec, hstar, dx)
    return ok.mean(axis=1)


def necessary_conds_proba(scene, group, action: GraspAction, spec: GripperSpec,
                          friction: FrictionModel, noise: NoiseModel, n_s: int = N_S,
                          index: int = 0) -> float:
    """Fraction of perturbed (action, state) samples meeting the conditions.

    ``index`` selects the candidate's random stream; the planner uses the
    candidate's position in its list, so this call reproduces the planner's
    estimate for candidate ``index``.
    """
    return float(gamma_batch(scene, group, action.as_array()[None], spec, friction, noise, n_s, index)[0])


def intersection_areas_batch(scene, group, poses: np.ndarray, spec: GripperSpec) -> np.ndarray:
    """Per-member intersection areas (C, n) at the nominal poses."""
    V = geo.pad_vertices(_members(scene, group))
    return geo.area_batch(interior_clips(V, poses, spec))


# ---------------------------------------------------------------------------
# predictors and planner

Predictor = Callable[[Sequence[ConvexPolygon], tuple, np.ndarray], np.ndarray]


class AreaHeuristic:
    """Total intersection area of the group with the interior region."""

    def __init__(self, spec: GripperSpec):
        self.spec = spec

    def __call__(self, scene, group, poses):
        return intersection_areas_batch(scene, group, poses, self.spec).sum(axis=1)


class ConstantPredictor:
    def __init__(self, value: float = 1.0):
        self.value = float(value)

    def __call__(self, scene, group, poses):
        return np.full(len(poses), self.value)


def per_action(fn: Callable) -> Predictor:
    """Adapt ``fn(scene, group, action) -> count`` to the batched protocol."""
    def batched(scene, group, poses):
        return np.array([fn(scene, group, GraspAction.at(*p)) for p in poses], dtype=float)
    return batched


def best_index(scene, group, poses: np.ndarray, scores, spec: GripperSpec) -> int:
    """Index of the top score. Exact ties prefer the larger total
    intersection area, then the lower candidate index."""
    scores = np.asarray(scores, dtype=float)
    tied = np.flatnonzero(scores == scores.max())
    if tied.size == 1:
        return int(tied[0])
    area = intersection_areas_batch(scene, group, poses[tied], spec).sum(axis=1)
    return int(tied[np.argmax(area)])


def evaluate_candidates(scene, group, spec: GripperSpec, friction: FrictionModel, noise: NoiseModel,
                        predictor: Predictor, n_p: int = N_P, n_theta: int = N_THETA, n_s: int = N_S,
                        clearance: Optional[float] = DEFAULT_CLEARANCE,
                        poses: Optional[np.ndarray] = None) -> list:
    """CandidateEval for every collision-free candidate, in candidate order."""
    if poses is None:
        poses = candidate_poses(scene, group, spec, n_p, n_theta, clearance)
    if len(poses) == 0:
        return []
    gamma = gamma_batch(scene, group, poses, spec, friction, noise, n_s)
    pred = np.asarray(predictor(scene, tuple(group), poses), dtype=float)
    return [CandidateEval(GraspAction.at(*p), float(g), float(n)) for p, g, n in zip(poses, gamma, pred)]


def robust_grasp_planner(scene, group, spec: GripperSpec, friction: FrictionModel, noise: NoiseModel,
                         predictor: Predictor, n_p: int = N_P, n_theta: int = N_THETA, n_s: int = N_S,
                         clearance: Optional[float] = DEFAULT_CLEARANCE) -> Optional[CandidateEval]:
    """Candidate maximising gamma * prediction, or None.

    ``predictor(scene, group, poses)`` maps a (C, 3) pose array to C
    predictions (a grasped-object count for MOG-Net, an area for the data
    collection heuristic). Ties are settled by :func:`best_index`. Returns
    None when there are no candidates or the best score is zero.
    """
    poses = candidate_poses(scene, group, spec, n_p, n_theta, clearance)
    evals = evaluate_candidates(scene, group, spec, friction, noise, predictor, n_p, n_theta, n_s,
                                clearance, poses=poses)
    if not evals:
        return None
    scores = np.array([e.score for e in evals])
    best = best_index(scene, group, poses, scores, spec)
    if scores[best] <= 0.0:
        return None
    return evals[best]
