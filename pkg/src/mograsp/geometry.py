"""Planar geometry on convex polygons.

All lengths are millimetres and all angles radians. Polygons are stored as
``(n, 2)`` float arrays with counter-clockwise vertex order.

Two flavours of every hot operation live here: small scalar routines that
read like the textbook algorithm, and ``*_batch`` kernels that work on
stacks of padded polygons so Monte-Carlo loops stay inside numpy. A padded
polygon repeats its last vertex until it reaches the stack width; repeated
vertices form zero-length edges, which leave areas, centroids and extents
unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import DegenerateInput

MAX_VERTICES = 8
COINCIDENT_EPS = 1e-9
ORIENT_EPS = 1e-6
MIN_AREA = 1.0


class Point2(NamedTuple):
    x: float
    y: float


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    if -math.pi <= theta < math.pi:
        return float(theta)
    t = math.fmod(theta + math.pi, 2.0 * math.pi)
    if t < 0.0:
        t += 2.0 * math.pi
    t -= math.pi
    # fmod can land exactly on +pi after the shift
    return -math.pi if t >= math.pi else t


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        vals = (self.x, self.y, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise DegenerateInput(f"non-finite pose {vals}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


class ConvexPolygon:
    """Strictly convex polygon with counter-clockwise vertices.

    Object models are validated on construction: 3 to 8 vertices, finite
    coordinates, every consecutive edge pair turning left by more than
    ``ORIENT_EPS`` and area above 1 mm^2. Clockwise input is reversed rather
    than rejected. Derived regions (clip results, hulls of groups) are built
    with ``validate=False`` since they may legitimately have more vertices or
    sub-millimetre area.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices, *, validate: bool = True):
        v = np.array(vertices, dtype=float).reshape(-1, 2)
        if v.shape[0] < 3:
            raise DegenerateInput(f"polygon needs at least 3 vertices, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise DegenerateInput("polygon has non-finite coordinates")
        if _signed_area(v) < 0:
            v = v[::-1].copy()
        if validate:
            if v.shape[0] > MAX_VERTICES:
                raise DegenerateInput(
                    f"polygon has {v.shape[0]} vertices, at most {MAX_VERTICES} allowed")
            e = np.roll(v, -1, axis=0) - v
            turn = _cross2(e, np.roll(e, -1, axis=0))
            if np.any(turn <= ORIENT_EPS):
                raise DegenerateInput("polygon is not strictly convex")
            if _signed_area(v) <= MIN_AREA:
                raise DegenerateInput("polygon area must exceed 1 mm^2")
        v.setflags(write=False)
        self.vertices = v

    def __len__(self):
        return self.vertices.shape[0]

    def __repr__(self):
        pts = ", ".join(f"({x:.3f}, {y:.3f})" for x, y in self.vertices)
        return f"ConvexPolygon([{pts}])"

    def __eq__(self, other):
        if not isinstance(other, ConvexPolygon):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.vertices.tobytes())

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def centroid(self) -> np.ndarray:
        return polygon_centroid(self)

    def edges(self) -> np.ndarray:
        """Edge segments as an ``(n, 2, 2)`` array, edge i runs v[i] -> v[i+1]."""
        return np.stack([self.vertices, np.roll(self.vertices, -1, axis=0)], axis=1)

    def translated(self, dx: float, dy: float) -> "ConvexPolygon":
        return ConvexPolygon(self.vertices + np.array([dx, dy]), validate=False)

    def rotated(self, theta: float, about=(0.0, 0.0)) -> "ConvexPolygon":
        c, s = math.cos(theta), math.sin(theta)
        R = np.array([[c, -s], [s, c]])
        p = np.asarray(about, dtype=float)
        return ConvexPolygon((self.vertices - p) @ R.T + p, validate=False)

    def contains(self, point, eps: float = COINCIDENT_EPS) -> bool:
        """True if ``point`` is inside or within ``eps`` of the boundary."""
        return bool(points_in_polygon(self, np.asarray(point, dtype=float)[None], -eps)[0])

    def diameter(self) -> float:
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    def min_width(self) -> float:
        """Smallest distance between two parallel supporting lines.

        For a convex polygon the minimum is attained with one line flush
        against an edge, so checking every edge direction is exact.
        """
        v = self.vertices
        best = math.inf
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            e = b - a
            n = np.array([-e[1], e[0]]) / math.hypot(*e)
            best = min(best, float(((v - a) @ n).max()))
        return best

    def to_list(self) -> list:
        return [[float(x), float(y)] for x, y in self.vertices]


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle with extent ``2*half_width`` along ``axis_u``.

    ``axis_u`` is the gripper closing axis; ``half_length`` runs along the jaw
    faces (the perpendicular direction).
    """

    center: tuple
    axis_u: tuple
    half_width: float
    half_length: float

    def __post_init__(self):
        if not (self.half_width > 0 and self.half_length > 0):
            raise DegenerateInput("rectangle extents must be positive")
        u = np.asarray(self.axis_u, dtype=float)
        n = float(np.hypot(*u))
        if n == 0.0:
            raise DegenerateInput("rectangle axis must be non-zero")
        object.__setattr__(self, "axis_u", (float(u[0] / n), float(u[1] / n)))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def axis_v(self) -> tuple:
        ux, uy = self.axis_u
        return (-uy, ux)

    def corners(self) -> np.ndarray:
        """Corners in counter-clockwise order starting at (-u, -v)."""
        c = np.asarray(self.center)
        u = np.asarray(self.axis_u) * self.half_width
        v = np.asarray(self.axis_v) * self.half_length
        return np.array([c - u - v, c + u - v, c + u + v, c - u + v])

    def to_polygon(self) -> ConvexPolygon:
        return ConvexPolygon(self.corners(), validate=False)

    def to_local(self, points) -> np.ndarray:
        """Express world points in the rectangle frame (u, v)."""
        p = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.stack([p @ np.asarray(self.axis_u), p @ np.asarray(self.axis_v)], axis=-1)


Segment = np.ndarray
Shape = Union[ConvexPolygon, Segment, Sequence]


def polygon_area(poly: ConvexPolygon) -> float:
    return poly.area


def polygon_centroid(poly: ConvexPolygon) -> np.ndarray:
    v = poly.vertices
    w = np.roll(v, -1, axis=0)
    cr = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
    a = cr.sum() / 2.0
    if abs(a) < 1e-12:
        return v.mean(axis=0)
    return ((v + w) * cr[:, None]).sum(axis=0) / (6.0 * a)


def convex_hull(points) -> ConvexPolygon:
    """Andrew's monotone chain hull, collinear boundary points dropped."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if pts.shape[0] < 3:
        raise DegenerateInput("convex hull needs at least 3 distinct points")
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                a, b = out[-2], out[-1]
                if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) > ORIENT_EPS:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if hull.shape[0] < 3 or _signed_area(hull) <= ORIENT_EPS:
        raise DegenerateInput("all points are collinear")
    return ConvexPolygon(hull, validate=False)


def _clip_halfplane(pts, a, b):
    """Keep the part of ``pts`` to the left of the directed line a->b."""
    out = []
    n = len(pts)
    if n == 0:
        return out
    d = b - a
    # points within COINCIDENT_EPS of the line count as on it, so a
    # polygon already inside the half-plane passes through unchanged
    tol = COINCIDENT_EPS * math.hypot(d[0], d[1])
    side = [d[0] * (p[1] - a[1]) - d[1] * (p[0] - a[0]) for p in pts]
    side = [0.0 if abs(v) <= tol else v for v in side]
    for i in range(n):
        p, q = pts[i - 1], pts[i]
        sp, sq = side[i - 1], side[i]
        if sq >= 0:
            if sp < 0:
                t = sp / (sp - sq)
                out.append(p + t * (q - p))
            out.append(q)
        elif sp >= 0:
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return out


def _dedupe(pts):
    out = []
    for p in pts:
        if not out or np.hypot(*(p - out[-1])) > COINCIDENT_EPS:
            out.append(p)
    while len(out) > 1 and np.hypot(*(out[0] - out[-1])) <= COINCIDENT_EPS:
        out.pop()
    # drop vertices lying on the segment joining their neighbours
    k = 0
    while len(out) > 3 and k < len(out):
        a, b, c = out[k - 1], out[k], out[(k + 1) % len(out)]
        ac = c - a
        if abs(_cross2(b - a, ac)) <= COINCIDENT_EPS * np.hypot(*ac):
            out.pop(k)
        else:
            k += 1
    return out


def clip_polygon_to_rect(poly: ConvexPolygon, rect: OrientedRect):
    """Intersection of a convex polygon with an oriented rectangle.

    Sutherland-Hodgman against the four rectangle edges. Returns ``None``
    when the intersection has zero area.
    """
    pts = [p for p in poly.vertices]
    c = rect.corners()
    for i in range(4):
        pts = _clip_halfplane(pts, c[i], c[(i + 1) % 4])
        if not pts:
            return None
    pts = _dedupe(pts)
    if len(pts) < 3:
        return None
    arr = np.array(pts)
    if _signed_area(arr) <= COINCIDENT_EPS:
        return None
    return ConvexPolygon(arr, validate=False)


def points_in_polygon(poly: ConvexPolygon, pts: np.ndarray, margin: float = 0.0) -> np.ndarray:
    """Mask of points whose distance inside every edge line exceeds ``margin``.

    ``margin=0`` gives strict interior; a negative margin admits the boundary.
    """
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    length = np.hypot(e[:, 0], e[:, 1])
    rel = pts[:, None, :] - v[None, :, :]
    dist = (e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]) / length[None, :]
    return np.all(dist > margin, axis=1)


def point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(x, dtype=float) for x in (p, a, b))
    d = b - a
    L2 = float(d @ d)
    if L2 == 0.0:
        return float(np.hypot(*(p - a)))
    t = min(1.0, max(0.0, float((p - a) @ d) / L2))
    return float(np.hypot(*(p - (a + t * d))))


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_intersect(p1, p2, q1, q2) -> bool:
    # proper crossings only; touching configurations come out as distance 0
    o1, o2 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    o3, o4 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    return o1 * o2 < 0 and o3 * o4 < 0


def _as_shape(x):
    if isinstance(x, ConvexPolygon):
        v = x.vertices
        return v, list(zip(v, np.roll(v, -1, axis=0))), x
    s = np.asarray(x, dtype=float).reshape(2, 2)
    return s, [(s[0], s[1])], None


def min_distance(a: Shape, b: Shape) -> float:
    """Euclidean separation of two convex polygons and/or segments.

    Returns 0 when the shapes touch or overlap. Segments are given as a
    ``(2, 2)`` array of endpoints.
    """
    pa, ea, polya = _as_shape(a)
    pb, eb, polyb = _as_shape(b)
    if polya is not None and np.any(points_in_polygon(polya, pb, 0.0)):
        return 0.0
    if polyb is not None and np.any(points_in_polygon(polyb, pa, 0.0)):
        return 0.0
    for s in ea:
        for t in eb:
            if _segments_intersect(s[0], s[1], t[0], t[1]):
                return 0.0
    d1 = min(point_segment_distance(p, s, t) for p in pa for s, t in eb)
    d2 = min(point_segment_distance(p, s, t) for p in pb for s, t in ea)
    return min(d1, d2)


def _grid_points(lo, hi, pitch):
    """Square grid centred in the box [lo, hi], ``floor(extent/pitch)`` per axis."""
    axes = []
    for k in range(2):
        ext = hi[k] - lo[k]
        n = max(1, int(math.floor(ext / pitch + 1e-9)))
        mid = 0.5 * (lo[k] + hi[k])
        axes.append(mid + (np.arange(n) - (n - 1) / 2.0) * pitch)
    gx, gy = np.meshgrid(axes[0], axes[1], indexing="xy")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def uniform_cover_points(hull: ConvexPolygon, n: int) -> np.ndarray:
    """About ``n`` grid points strictly inside ``hull``.

    The grid is axis aligned, centred on the hull's bounding box, and its
    pitch is bisected to the largest value that still yields at least ``n``
    interior points. If no pitch reaches ``n`` (very thin hulls) the densest
    grid tried is returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if hull.area < MIN_AREA:
        raise DegenerateInput("hull area below 1 mm^2")
    lo, hi = hull.vertices.min(axis=0), hull.vertices.max(axis=0)

    def inside(p):
        g = _grid_points(lo, hi, p)
        return g[points_in_polygon(hull, g, COINCIDENT_EPS)]

    hi_p = float(max(hi - lo))
    # the floor keeps the densest grid at most 400 x 400 for needle-like hulls
    lo_p = max(math.sqrt(hull.area / n) / 8.0, hi_p / 400.0)
    if len(inside(lo_p)) < n:
        best = inside(lo_p)
        if len(best) == 0:
            best = hull.centroid[None, :]
        return best
    # 32 halvings pin the pitch to ~1e-10 of the hull extent
    for _ in range(32):
        mid = 0.5 * (lo_p + hi_p)
        if len(inside(mid)) >= n:
            lo_p = mid
        else:
            hi_p = mid
    return inside(lo_p)


# ---------------------------------------------------------------------------
# batched kernels on padded polygon stacks

def pad_vertices(polys: Sequence[ConvexPolygon], width: int = MAX_VERTICES) -> np.ndarray:
    """Stack polygons into ``(len(polys), width, 2)`` by repeating last vertices."""
    out = np.empty((len(polys), width, 2))
    for i, p in enumerate(polys):
        v = p.vertices
        if len(v) > width:
            raise ValueError(f"polygon with {len(v)} vertices exceeds pad width {width}")
        out[i, :len(v)] = v
        out[i, len(v):] = v[-1]
    return out


def _clip_batch_halfplane(P, f):
    """One Sutherland-Hodgman pass; keeps points with ``f >= 0``.

    ``P`` has shape (..., K, 2), ``f`` (..., K). Returns (..., K+1, 2) padded
    output and a boolean "non-empty" mask.
    """
    K = P.shape[-2]
    Pp = np.roll(P, 1, axis=-2)
    fp = np.roll(f, 1, axis=-1)
    cin = f >= 0
    pin = fp >= 0
    cross = cin != pin
    denom = np.where(cross, fp - f, 1.0)
    t = np.where(cross, fp / denom, 0.0)
    I = Pp + t[..., None] * (P - Pp)
    cand = np.stack([I, P], axis=-2).reshape(P.shape[:-2] + (2 * K, 2))
    valid = np.stack([cross, cin], axis=-1).reshape(f.shape[:-1] + (2 * K,))
    order = np.argsort(~valid, axis=-1, kind="stable")[..., :K + 1]
    out = np.take_along_axis(cand, order[..., None], axis=-2)
    count = valid.sum(axis=-1)
    nonempty = count > 0
    last = np.clip(count - 1, 0, K)
    lastpt = np.take_along_axis(out, last[..., None, None], axis=-2)
    slot = np.arange(K + 1)
    out = np.where((slot >= count[..., None])[..., None], lastpt, out)
    return out, nonempty


def clip_batch_to_box(P: np.ndarray, xmin, xmax, ymin, ymax) -> np.ndarray:
    """Clip padded polygons (..., K, 2) to axis-aligned boxes.

    Bounds broadcast against the leading dimensions. Empty results collapse
    to a single repeated point, so their area is zero.
    """
    xmin, xmax, ymin, ymax = (np.asarray(b, dtype=float)[..., None] for b in (xmin, xmax, ymin, ymax))
    out = P
    for sel, bound, sign in ((0, xmin, 1.0), (0, xmax, -1.0), (1, ymin, 1.0), (1, ymax, -1.0)):
        f = sign * (out[..., sel] - bound)
        out, _ = _clip_batch_halfplane(out, f)
    return out


def area_batch(P: np.ndarray) -> np.ndarray:
    x, y = P[..., 0], P[..., 1]
    xn, yn = np.roll(x, -1, axis=-1), np.roll(y, -1, axis=-1)
    return 0.5 * (x * yn - xn * y).sum(axis=-1)


def centroid_batch(P: np.ndarray) -> np.ndarray:
    Q = np.roll(P, -1, axis=-2)
    cr = P[..., 0] * Q[..., 1] - Q[..., 0] * P[..., 1]
    a = cr.sum(axis=-1)
    c = ((P + Q) * cr[..., None]).sum(axis=-2)
    safe = np.abs(a) > 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        cen = c / (3.0 * np.where(safe, a, 1.0))[..., None]
    return np.where(safe[..., None], cen, P.mean(axis=-2))


def to_grasp_frame(P: np.ndarray, poses: np.ndarray) -> np.ndarray:
    """Express points (..., K, 2) in the frames given by ``poses`` (..., 3).

    The frame's x axis is the closing axis at angle ``theta``.
    """
    c = np.cos(poses[..., 2])[..., None]
    s = np.sin(poses[..., 2])[..., None]
    dx = P[..., 0] - poses[..., 0][..., None]
    dy = P[..., 1] - poses[..., 1][..., None]
    return np.stack([c * dx + s * dy, -s * dx + c * dy], axis=-1)


def overlaps_box_batch(P: np.ndarray, xmin, xmax, ymin, ymax, eps: float = COINCIDENT_EPS) -> np.ndarray:
    """True where padded CCW polygons (..., K, 2) overlap the box with positive area.

    Separating-axis test: the box axes, then each polygon edge normal.
    Shapes that only touch (penetration up to ``eps``) do not overlap.
    """
    xmin, xmax, ymin, ymax = (np.asarray(b, dtype=float) for b in (xmin, xmax, ymin, ymax))
    x, y = P[..., 0], P[..., 1]
    sep = ((x.max(axis=-1) <= xmin + eps) | (x.min(axis=-1) >= xmax - eps)
           | (y.max(axis=-1) <= ymin + eps) | (y.min(axis=-1) >= ymax - eps))
    Q = np.roll(P, -1, axis=-2)
    nx = Q[..., 1] - y
    ny = x - Q[..., 0]
    length = np.hypot(nx, ny)
    cx, cy = ((xmin + xmax) / 2.0)[..., None], ((ymin + ymax) / 2.0)[..., None]
    hx, hy = ((xmax - xmin) / 2.0)[..., None], ((ymax - ymin) / 2.0)[..., None]
    box_lo = cx * nx + cy * ny - (hx * np.abs(nx) + hy * np.abs(ny))
    edge_sep = (box_lo >= x * nx + y * ny - eps * length) & (length > 0)
    return ~(sep | edge_sep.any(axis=-1))


def box_x_extent_batch(P: np.ndarray, xmin, xmax, ymin, ymax):
    """Closing-axis extent of each padded convex polygon clipped to the box.

    Returns ``(lo, hi)``; where the clip is empty ``lo > hi``.
    """
    x, y = P[..., 0], P[..., 1]
    ymin = np.asarray(ymin, dtype=float)[..., None]
    ymax = np.asarray(ymax, dtype=float)[..., None]
    cand = [np.where((y >= ymin) & (y <= ymax), x, np.nan)]
    xq, yq = np.roll(x, -1, axis=-1), np.roll(y, -1, axis=-1)
    dy = yq - y
    safe = np.where(dy != 0, dy, 1.0)
    for Y in (ymin, ymax):
        t = (Y - y) / safe
        hit = (dy != 0) & (t >= 0) & (t <= 1)
        cand.append(np.where(hit, x + t * (xq - x), np.nan))
    C = np.concatenate(cand, axis=-1)
    missing = np.isnan(C)
    lo = np.maximum(np.min(np.where(missing, np.inf, C), axis=-1), xmin)
    hi = np.minimum(np.max(np.where(missing, -np.inf, C), axis=-1), xmax)
    return lo, hi
