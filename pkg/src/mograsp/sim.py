"""Deterministic quasi-static grasp outcome simulator and scene generator.

The simulator is the only source of ground truth in this package: it labels
training data and scores the decluttering benchmark. It does not integrate
any dynamics. Given an executed parallel-jaw grasp it decides, by a fixed
sequence of geometric rules, which objects end up held.

Outcome rules, in order:

1. The planned pose is perturbed by control noise.
2. Objects overlapping a jaw footprint (gripper fully open) are pushed out
   of the way and marked ``jaw_collision``.
3. Objects that do not reach into the interior region are ``never_contacted``.
4. The rest are ordered by the closing-axis coordinate of their centroids.
   Objects with less than ``tau_contain`` of their area between the jaws
   slip out. The anchor is the remaining object nearest the gripper centre,
   and the squeeze chain grows outwards from it: an object joins when its
   extent along the jaws overlaps that of the previous chain object on its
   side. Objects beside the chain are not squeezed and drop out.
5. Each chain object may settle on any pair of sampled boundary contacts
   between the jaws lying within ``compliance`` of its two extremes along
   the closing axis, provided the pair is in equilibrium under the friction
   model. The settled width is the pair's extent along the closing axis,
   floored at the object's minimum stable diameter, and it must fit the
   object's share of the initial chain width (the interval between the
   midpoints of the gaps on either side). Several objects are held together
   only if their contact lines are colinear: each must lie within half the
   colinearity tolerance of the closing axis, so any two are within the
   full tolerance. Retained objects are the run of such objects around the
   anchor. If the anchor cannot join a run but can be held on its own, it
   alone is retained. Every other object reaching the interior is squeezed
   out and displaced.
6. The final width is the sum of settled widths of retained objects.

These rules make three properties hold by construction: the retained set is
a contiguous run of the chain, it only grows with friction, and when it is
the whole chain the necessary conditions hold for it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry as geo
from .contact import FrictionModel, _in_cone, check_chain_colinearity, contact_arrays, min_stable_diameter
from .errors import ConfigError, DegenerateInput, PlacementFailure, SchemaError
from .geometry import ConvexPolygon
from .planning import GraspAction, GripperSpec, NoiseModel

SCENE_SCHEMA = "mograsp-scene/1"

RETAINED = "retained"
NEVER_CONTACTED = "never_contacted"
SQUEEZED_OUT = "squeezed_out"
JAW_COLLISION = "jaw_collision"

# per-object fit slack; kept well below the diameter tolerance of the
# necessary-condition check so that full retention implies the conditions
FIT_EPS = 1e-10


@dataclass(frozen=True)
class SimParams:
    tau_contain: float = 0.35
    colinear_tol: float = 0.1
    n_s_support: int = 25
    n_s_min: int = 5
    compliance: float = 2.0
    displacement: float = 1.2  # times jaw_length

    def __post_init__(self):
        if not 0.0 <= self.tau_contain <= 1.0:
            raise ConfigError("tau_contain must lie in [0, 1]")
        if not 0.0 < self.colinear_tol < math.pi / 2:
            raise ConfigError("colinear_tol must lie in (0, pi/2)")
        if self.n_s_support < 1 or self.n_s_min < 1:
            raise ConfigError("contact sample counts must be >= 1")
        if self.compliance < 0 or self.displacement < 0:
            raise ConfigError("compliance and displacement must be non-negative")


DEFAULT_SIM = SimParams()


@dataclass
class SimOutcome:
    retained: frozenset
    final_width: float
    per_object_reason: dict
    chain: tuple = ()
    executed: Optional[GraspAction] = None
    support: dict = field(default_factory=dict)
    displaced: dict = field(default_factory=dict)

    @property
    def n_g(self) -> int:
        return len(self.retained)


@dataclass(frozen=True)
class SupportPair:
    """Two contacts of one chain object, in world coordinates.

    ``width`` is their separation along the closing axis and ``angle`` the
    direction of the left-to-right line in the grasp frame.
    """

    left: np.ndarray
    right: np.ndarray
    width: float
    angle: float

    @property
    def line(self) -> np.ndarray:
        return self.right - self.left


class SupportOptions:
    """Candidate support pairs of one object for one grasp pose.

    Left candidates are sampled contacts between the jaws within
    ``compliance`` of the object's smallest closing-axis coordinate, right
    candidates likewise at the largest. The candidate set does not depend
    on friction; which pairs are in equilibrium does.
    """

    def __init__(self, poly: ConvexPolygon, pose: np.ndarray, spec: GripperSpec,
                 params: SimParams = DEFAULT_SIM):
        pos, lo, hi, _ = contact_arrays(poly, params.n_s_support)
        q = geo.to_grasp_frame(pos, pose)
        W2, L2 = spec.max_width / 2.0, spec.jaw_length / 2.0
        inside = np.flatnonzero((np.abs(q[:, 0]) <= W2 + 1e-9) & (np.abs(q[:, 1]) <= L2 + 1e-9))
        self.empty = inside.size < 2
        if self.empty:
            return
        x = q[inside, 0]
        L = inside[x <= x.min() + params.compliance]
        R = inside[x >= x.max() - params.compliance]
        d = q[R][None, :, :] - q[L][:, None, :]
        self.pos_l, self.pos_r = pos[L], pos[R]
        self.width = d[..., 0]
        self.angle = np.arctan2(d[..., 1], d[..., 0])
        self.valid = np.hypot(d[..., 0], d[..., 1]) > 1e-6
        self.span_l = (lo[L] - pose[2], hi[L] - pose[2])
        self.span_r = (lo[R] - pose[2], hi[R] - pose[2])

    def equilibrium(self, friction: FrictionModel) -> np.ndarray:
        a = friction.alpha
        return (self.valid
                & _in_cone(self.angle, self.span_l[0][:, None], self.span_l[1][:, None], a)
                & _in_cone(self.angle + math.pi, self.span_r[0][None, :], self.span_r[1][None, :], a))

    def best(self, friction: FrictionModel, axis_tol: Optional[float] = None) -> Optional[SupportPair]:
        """Narrowest equilibrium pair, optionally restricted to lines near the closing axis."""
        if self.empty:
            return None
        ok = self.equilibrium(friction)
        if axis_tol is not None:
            ok &= np.abs(self.angle) <= axis_tol
        if not ok.any():
            return None
        w = np.where(ok, self.width, np.inf)
        i, j = np.unravel_index(np.argmin(w), w.shape)
        return SupportPair(self.pos_l[i].copy(), self.pos_r[j].copy(), float(w[i, j]), float(self.angle[i, j]))


def support_pair(poly: ConvexPolygon, pose, spec: GripperSpec, friction: FrictionModel,
                 axis_tol: Optional[float] = None, params: SimParams = DEFAULT_SIM) -> Optional[SupportPair]:
    pose = pose.as_array() if hasattr(pose, "as_array") else np.asarray(pose, dtype=float)
    return SupportOptions(poly, pose, spec, params).best(friction, axis_tol)


def _nearby(scene, pose, spec):
    reach = math.hypot(spec.max_width / 2.0 + spec.jaw_thickness, spec.jaw_length / 2.0)
    out = []
    for i, p in enumerate(scene):
        v = p.vertices
        c = v.mean(axis=0)
        r = float(np.hypot(*(v - c).T).max())
        if math.hypot(c[0] - pose[0], c[1] - pose[1]) <= reach + r:
            out.append(i)
    return out


def _disc(poly):
    v = poly.vertices
    c = v.mean(axis=0)
    return c, float(np.hypot(*(v - c).T).max())


def _displace(scene, movers, removed, pose, amount) -> dict:
    """New positions for objects pushed aside along the jaws.

    Each object is pushed ``amount`` away from the closing axis on its own
    side; if that spot overlaps another object it tries the other side,
    then twice and three times as far. An object with no free spot stays
    where it is. Movers are placed in index order, each seeing the final
    positions of the ones before it, so the result never overlaps.
    """
    v = np.array([-math.sin(pose[2]), math.cos(pose[2])])
    current = {i: p for i, p in enumerate(scene) if i not in removed}
    moved = {}
    for i in sorted(movers):
        poly = current[i]
        side = 1.0 if float((poly.centroid - pose[:2]) @ v) >= 0 else -1.0
        for k in (1, -1, 2, -2, 3, -3):
            cand = poly.translated(*(side * k * amount * v))
            c, r = _disc(cand)
            clear = True
            for j, other in current.items():
                if j == i:
                    continue
                oc, orad = _disc(other)
                if math.hypot(*(c - oc)) <= r + orad and geo.min_distance(cand, other) <= 0.0:
                    clear = False
                    break
            if clear:
                current[i] = moved[i] = cand
                break
    return moved


def _load_path(held, cx, ylo, yhi) -> list:
    """Members the squeeze passes through, in closing-axis order.

    The path starts at the held member closest to the gripper centre and
    walks outwards; a member joins when its jaw-direction extent overlaps
    that of the last member taken on its side. Members it skips sit beside
    the path rather than in series with it and are not squeezed.
    """
    if not held:
        return []
    mid = int(np.argmin(np.abs([cx[k] for k in held])))
    path = [held[mid]]
    for side in (held[mid + 1:], held[:mid][::-1]):
        last = held[mid]
        for k in side:
            if ylo[k] <= yhi[last] and ylo[last] <= yhi[k]:
                path.append(k)
                last = k
    return sorted(path, key=lambda k: (cx[k], k))


def simulate_grasp(scene, action: GraspAction, spec: GripperSpec, friction: FrictionModel,
                   exec_noise: Optional[NoiseModel] = None,
                   params: SimParams = DEFAULT_SIM) -> SimOutcome:
    """Outcome of executing ``action`` on ``scene``.

    Control noise is drawn from ``exec_noise`` seeded by its own ``seed``,
    so the result is a pure function of the arguments.
    """
    pose = action.as_array()
    if exec_noise is not None and exec_noise.n_mc > 0:
        rng = np.random.default_rng([int(exec_noise.seed) & 0xFFFFFFFFFFFFFFFF])
        pose = pose + rng.standard_normal(3) * np.asarray(exec_noise.sigma_u)
    executed = GraspAction.at(*pose)
    pose = executed.as_array()

    reasons = {i: NEVER_CONTACTED for i in range(len(scene))}
    near = _nearby(scene, pose, spec)
    if not near:
        return SimOutcome(frozenset(), 0.0, reasons, (), executed)

    P = geo.pad_vertices([scene[i] for i in near])
    F = geo.to_grasp_frame(P, pose)
    W2, L2, T = spec.max_width / 2.0, spec.jaw_length / 2.0, spec.jaw_thickness
    jaw_hit = np.zeros(len(near), dtype=bool)
    for lo, hi in ((-W2 - T, -W2), (W2, W2 + T)):
        jaw_hit |= geo.overlaps_box_batch(F, lo, hi, -L2, L2)
    touching = geo.overlaps_box_batch(F, -W2, W2, -L2, L2)
    A = geo.area_batch(geo.clip_batch_to_box(F, -W2, W2, -L2, L2))
    xmin, xmax = geo.box_x_extent_batch(F, -W2, W2, -L2, L2)
    cx = geo.to_grasp_frame(np.array([scene[i].centroid for i in near]), pose)[:, 0]

    members = []
    for k, i in enumerate(near):
        if jaw_hit[k]:
            reasons[i] = JAW_COLLISION
        elif touching[k]:
            members.append(k)
    push = params.displacement * spec.jaw_length
    if not members:
        movers = [i for i, r in reasons.items() if r == JAW_COLLISION]
        return SimOutcome(frozenset(), 0.0, reasons, (), executed, {},
                          _displace(scene, movers, (), pose, push))

    members.sort(key=lambda k: (cx[k], near[k]))
    ylo, yhi = geo.box_x_extent_batch(F[..., ::-1], -L2, L2, -W2, W2)
    held = [k for k in members if A[k] / scene[near[k]].area >= params.tau_contain]
    path = _load_path(held, cx, ylo, yhi)
    axis_tol = params.colinear_tol / 2.0
    if not path:
        pairs, settled, passing, anchor = [], [], [], 0
    else:
        a = np.array([xmin[k] for k in path])
        b = np.array([xmax[k] for k in path])
        bounds = np.concatenate([[a[0]], (b[:-1] + a[1:]) / 2.0, [b[-1]]])
        allowance = np.diff(bounds)
        options = [SupportOptions(scene[near[k]], pose, spec, params) for k in path]

        def assess(n, tol):
            poly = scene[near[path[n]]]
            sp = options[n].best(friction, tol)
            if sp is None:
                return None, math.inf
            width = max(sp.width, min_stable_diameter(poly, friction, params.n_s_min))
            return (sp, width) if width <= allowance[n] + FIT_EPS else (None, math.inf)

        anchor = int(np.argmin(np.abs([cx[k] for k in path])))
        results = [assess(n, axis_tol) for n in range(len(path))]
        passing = [sp is not None for sp, _ in results]
        if not passing[anchor]:
            passing = [False] * len(path)
            results = [(None, math.inf)] * len(path)
            single = assess(anchor, None)
            if single[0] is not None:
                passing[anchor] = True
                results[anchor] = single
        pairs = [sp for sp, _ in results]
        settled = [w for _, w in results]

    lo_n = hi_n = anchor
    if passing and passing[anchor]:
        while lo_n > 0 and passing[lo_n - 1]:
            lo_n -= 1
        while hi_n < len(path) - 1 and passing[hi_n + 1]:
            hi_n += 1
        kept = range(lo_n, hi_n + 1)
    else:
        kept = range(0)

    retained = frozenset(near[path[n]] for n in kept)
    if retained:
        assert check_chain_colinearity([pairs[n].line for n in kept], params.colinear_tol)
    for k in members:
        reasons[near[k]] = RETAINED if near[k] in retained else SQUEEZED_OUT
    chain = tuple(near[k] for k in path)
    final_width = float(sum(settled[n] for n in kept))
    support = {near[path[n]]: pairs[n] for n in kept}
    movers = [i for i, r in reasons.items() if r in (JAW_COLLISION, SQUEEZED_OUT)]
    return SimOutcome(retained, final_width, reasons, chain, executed, support,
                      _displace(scene, movers, retained, pose, push))


def apply_outcome(scene, outcome: SimOutcome) -> tuple:
    """Scene after the attempt: retained objects removed, displaced ones moved.

    Returns ``(new_scene, kept_indices)`` where ``kept_indices[j]`` is the
    index in the old scene of object ``j`` in the new one.
    """
    kept = [i for i in range(len(scene)) if i not in outcome.retained]
    return [outcome.displaced.get(i, scene[i]) for i in kept], kept


# ---------------------------------------------------------------------------
# scenes

@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    count: int = 75
    region: tuple = (800.0, 600.0)
    clustering: float = 0.5
    n_vertices: tuple = (3, 8)
    radius: tuple = (11.0, 20.0)
    aspect: tuple = (0.6, 1.0)
    min_gap: float = 1.0
    max_tries: int = 10_000

    def __post_init__(self):
        if self.count < 0:
            raise ConfigError("count must be non-negative")
        if not 0.0 <= self.clustering <= 1.0:
            raise ConfigError("clustering must lie in [0, 1]")
        lo, hi = self.n_vertices
        if not 3 <= lo <= hi <= geo.MAX_VERTICES:
            raise ConfigError("vertex counts must lie in [3, 8]")
        if not 0 < self.radius[0] <= self.radius[1]:
            raise ConfigError("radius range must be positive and ordered")
        if not 0 < self.aspect[0] <= self.aspect[1] <= 1.0:
            raise ConfigError("aspect range must lie in (0, 1]")
        if min(self.region) <= 2 * self.radius[1]:
            raise ConfigError("placement region too small for the object size")

    def with_seed(self, seed: int) -> "SceneSpec":
        d = dict(self.__dict__)
        d["seed"] = int(seed)
        return SceneSpec(**d)


def random_polygon(rng: np.random.Generator, spec: SceneSpec) -> ConvexPolygon:
    """Convex polygon centred at the origin with jittered vertices on an ellipse."""
    while True:
        n = int(rng.integers(spec.n_vertices[0], spec.n_vertices[1] + 1))
        r = rng.uniform(*spec.radius)
        ratio = rng.uniform(*spec.aspect)
        step = 2 * math.pi / n
        ang = np.arange(n) * step + rng.uniform(-0.3, 0.3, n) * step
        pts = np.column_stack([r * np.cos(ang), r * ratio * np.sin(ang)])
        rot = rng.uniform(0.0, 2 * math.pi)
        c, s = math.cos(rot), math.sin(rot)
        pts = pts @ np.array([[c, s], [-s, c]])
        try:
            hull = geo.convex_hull(pts)
            poly = ConvexPolygon(hull.vertices)
        except DegenerateInput:
            continue
        return poly.translated(*(-poly.centroid))


def generate_scene(spec: SceneSpec) -> list:
    """Place ``spec.count`` non-overlapping random polygons in the region.

    With probability ``clustering`` each new object is dropped next to a
    randomly chosen object already placed; otherwise anywhere in the region.
    """
    rng = np.random.default_rng(spec.seed)
    wx, wy = spec.region
    placed, centres, radii = [], [], []
    for _ in range(spec.count):
        shape = random_polygon(rng, spec)
        r = float(np.hypot(*shape.vertices.T).max())
        for _attempt in range(spec.max_tries):
            if placed and rng.random() < spec.clustering:
                j = int(rng.integers(len(placed)))
                ang = rng.uniform(0.0, 2 * math.pi)
                dist = radii[j] + r + rng.uniform(spec.min_gap, 15.0)
                c = centres[j] + dist * np.array([math.cos(ang), math.sin(ang)])
            else:
                c = rng.uniform([r, r], [wx - r, wy - r])
            if not (r <= c[0] <= wx - r and r <= c[1] <= wy - r):
                continue
            cand = shape.translated(*c)
            if all(math.hypot(*(c - cj)) > r + rj + spec.min_gap
                   or geo.min_distance(cand, p) > spec.min_gap
                   for p, cj, rj in zip(placed, centres, radii)):
                placed.append(cand)
                centres.append(np.asarray(c, dtype=float))
                radii.append(r)
                break
        else:
            raise PlacementFailure(f"could not place object {len(placed)} after {spec.max_tries} tries")
    return placed


def scene_to_json(scene, seed: Optional[int] = None, extra: Optional[dict] = None) -> str:
    doc = {"schema": SCENE_SCHEMA, "seed": seed,
           "objects": [{"vertices": p.to_list()} for p in scene]}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1) + "\n"


def scene_from_json(text: str):
    """Parse a scene document; returns ``(polygons, seed)``."""
    doc = json.loads(text)
    if not isinstance(doc, dict) or doc.get("schema") != SCENE_SCHEMA:
        raise SchemaError(f"expected schema {SCENE_SCHEMA!r}, got {doc.get('schema') if isinstance(doc, dict) else None!r}")
    return [ConvexPolygon(o["vertices"]) for o in doc["objects"]], doc.get("seed")
