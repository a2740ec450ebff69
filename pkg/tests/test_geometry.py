import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mograsp import geometry as geo
from mograsp.errors import DegenerateInput
from mograsp.geometry import ConvexPolygon, OrientedRect, Pose2


def square(side, cx=0.0, cy=0.0):
    h = side / 2.0
    return ConvexPolygon([(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)])


def random_convex(rng, n=7, r=30.0):
    ang = np.sort(rng.uniform(0, 2 * np.pi, 40))
    pts = np.column_stack([r * np.cos(ang), r * rng.uniform(0.5, 1.0) * np.sin(ang)])
    hull = geo.convex_hull(pts)
    while len(hull.vertices) > n:
        hull = geo.convex_hull(np.delete(hull.vertices, rng.integers(len(hull.vertices)), axis=0))
    return hull


def mc_area(poly, rect=None, n=1_000_000, seed=0):
    """Rejection estimate of area(poly) or area(poly & rect)."""
    rng = np.random.default_rng(seed)
    lo, hi = poly.vertices.min(0), poly.vertices.max(0)
    pts = rng.uniform(lo, hi, (n, 2))
    inside = geo.points_in_polygon(poly, pts)
    if rect is not None:
        inside &= geo.points_in_polygon(rect.to_polygon(), pts)
    return inside.mean() * np.prod(hi - lo)


polygons = st.integers(0, 2**31 - 1).map(lambda s: random_convex(np.random.default_rng(s)))


# -- types ------------------------------------------------------------------

def test_pose_theta_normalized():
    assert Pose2(0, 0, math.pi).theta == pytest.approx(-math.pi)
    assert Pose2(0, 0, 3 * math.pi / 2).theta == pytest.approx(-math.pi / 2)
    assert -math.pi <= Pose2(0, 0, -math.pi).theta < math.pi


def test_polygon_rejects_bad_input():
    with pytest.raises(DegenerateInput):
        ConvexPolygon([(0, 0), (1, 0)])
    with pytest.raises(DegenerateInput):
        ConvexPolygon([(0, 0), (10, 0), (20, 0), (10, 10)])  # collinear triple
    with pytest.raises(DegenerateInput):
        ConvexPolygon([(0, 0), (10, 0), (0, 10), (10, 10)])  # self-crossing
    with pytest.raises(DegenerateInput):
        ConvexPolygon([(0, 0), (0.5, 0), (0, 0.5)])  # area below 1 mm^2
    with pytest.raises(DegenerateInput):
        ConvexPolygon([(math.cos(a), math.sin(a)) for a in np.linspace(0, 6, 9)])


def test_clockwise_input_is_reversed():
    p = ConvexPolygon([(0, 0), (0, 10), (10, 10), (10, 0)])
    assert p.area == pytest.approx(100.0)
    assert geo._signed_area(p.vertices) > 0


# -- hull -------------------------------------------------------------------

def test_hull_drops_interior_point():
    h = geo.convex_hull([(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)])
    assert len(h.vertices) == 4
    assert h.area == pytest.approx(1.0)
    assert geo._signed_area(h.vertices) > 0


def test_hull_of_triangle_is_itself():
    pts = [(0, 0), (30, 0), (0, 40)]
    h = geo.convex_hull(pts)
    assert sorted(map(tuple, h.vertices.tolist())) == sorted(map(tuple, np.asarray(pts, float).tolist()))


def test_hull_collinear_raises():
    with pytest.raises(DegenerateInput):
        geo.convex_hull([(0, 0), (1, 1), (2, 2), (3, 3)])


def test_hull_of_disc_points_contains_all():
    rng = np.random.default_rng(3)
    r = 50 * np.sqrt(rng.uniform(size=100))
    a = rng.uniform(0, 2 * np.pi, 100)
    pts = np.column_stack([r * np.cos(a), r * np.sin(a)])
    h = geo.convex_hull(pts)
    assert h.area <= math.pi * 50**2
    # brute force: every point on the inner side of every hull edge
    v = h.vertices
    e = np.roll(v, -1, axis=0) - v
    for p in pts:
        cross = e[:, 0] * (p[1] - v[:, 1]) - e[:, 1] * (p[0] - v[:, 0])
        assert np.all(cross / np.hypot(e[:, 0], e[:, 1]) >= -1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=30))
def test_hull_containment_property(pts):
    try:
        h = geo.convex_hull(pts)
    except DegenerateInput:
        return
    v = h.vertices
    e = np.roll(v, -1, axis=0) - v
    for p in pts:
        cross = e[:, 0] * (p[1] - v[:, 1]) - e[:, 1] * (p[0] - v[:, 0])
        assert np.all(cross / np.hypot(e[:, 0], e[:, 1]) >= -1e-9)


# -- area -------------------------------------------------------------------

def test_area_simple_shapes():
    assert geo.polygon_area(square(10)) == pytest.approx(100.0)
    assert geo.polygon_area(ConvexPolygon([(0, 0), (30, 0), (0, 40)])) == pytest.approx(600.0)


def test_area_matches_monte_carlo_for_heptagon():
    poly = random_convex(np.random.default_rng(7), n=7)
    assert len(poly.vertices) == 7
    assert mc_area(poly) == pytest.approx(poly.area, rel=5e-3)


def test_centroid_of_square():
    assert np.allclose(square(20, 5, -3).centroid, [5, -3])


# -- clipping ---------------------------------------------------------------

RECT = OrientedRect((0.0, 0.0), (1.0, 0.0), 42.5, 22.0)


def test_clip_full_containment():
    c = geo.clip_polygon_to_rect(square(40), RECT)
    assert c.area == pytest.approx(1600.0)


def test_clip_half_straddle_matches_monte_carlo():
    poly = square(20, cx=42.5)
    c = geo.clip_polygon_to_rect(poly, RECT)
    assert c.area == pytest.approx(200.0)
    assert mc_area(poly, RECT) == pytest.approx(c.area, rel=5e-3)


def test_clip_disjoint_is_none():
    assert geo.clip_polygon_to_rect(square(10, cx=200), RECT) is None


def test_clip_rotated_rect():
    rect = OrientedRect((0.0, 0.0), (math.cos(0.4), math.sin(0.4)), 10.0, 5.0)
    c = geo.clip_polygon_to_rect(square(100), rect)
    assert c.area == pytest.approx(200.0)


@settings(max_examples=50, deadline=None)
@given(polygons, st.floats(-40, 40), st.floats(-40, 40), st.floats(0, math.pi),
       st.floats(2, 50), st.floats(2, 30))
def test_clip_monotone_and_idempotent(poly, x, y, th, hw, hl):
    rect = OrientedRect((x, y), (math.cos(th), math.sin(th)), hw, hl)
    c = geo.clip_polygon_to_rect(poly, rect)
    if c is None:
        return
    assert c.area <= min(poly.area, 4 * hw * hl) + 1e-9
    again = geo.clip_polygon_to_rect(c, rect)
    assert again is not None
    # same vertex set within 1e-9
    d = np.hypot(*(again.vertices[:, None, :] - c.vertices[None, :, :]).T)
    assert d.min(axis=0).max() < 1e-9 and d.min(axis=1).max() < 1e-9


@settings(max_examples=50, deadline=None)
@given(polygons, st.floats(-40, 40), st.floats(-40, 40), st.floats(0, math.pi))
def test_batched_clip_and_extent_agree_with_scalar(poly, x, y, th):
    """The numpy kernels against the reference Sutherland-Hodgman clip."""
    pose = np.array([x, y, th])
    rect = OrientedRect((x, y), (math.cos(th), math.sin(th)), 42.5, 22.0)
    c = geo.clip_polygon_to_rect(poly, rect)
    F = geo.to_grasp_frame(geo.pad_vertices([poly])[None], pose[None, None, :])
    area = geo.area_batch(geo.clip_batch_to_box(F, -42.5, 42.5, -22.0, 22.0))[0, 0]
    hit = geo.overlaps_box_batch(F, -42.5, 42.5, -22.0, 22.0)[0, 0]
    lo, hi = geo.box_x_extent_batch(F, -42.5, 42.5, -22.0, 22.0)
    if c is None:
        assert area == pytest.approx(0.0, abs=1e-9)
        return
    assert area == pytest.approx(c.area, abs=1e-7)
    if c.area > 1e-6:
        assert hit
        local = rect.to_local(c.vertices)
        assert lo[0, 0] == pytest.approx(local[:, 0].min(), abs=1e-7)
        assert hi[0, 0] == pytest.approx(local[:, 0].max(), abs=1e-7)


# -- distances --------------------------------------------------------------

def test_min_distance_examples():
    # unit squares sit at the 1 mm^2 floor for object models, so build them unvalidated
    a = ConvexPolygon(square(2).vertices / 2, validate=False)
    b = a.translated(6.0, 0.0)
    assert geo.min_distance(a, b) == pytest.approx(5.0)
    assert geo.min_distance(square(10), square(10, cx=3)) == 0.0
    seg = np.array([[3.0, -5.0], [3.0, 5.0]])
    assert geo.min_distance(square(2), seg) == pytest.approx(2.0)


def _brute_distance(a, b):
    def segs(v):
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))] if len(v) > 2 else [(v[0], v[1])]
    best = math.inf
    for p in a:
        for s in segs(b):
            best = min(best, geo.point_segment_distance(p, *s))
    for p in b:
        for s in segs(a):
            best = min(best, geo.point_segment_distance(p, *s))
    return best


def test_min_distance_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(100):
        a = random_convex(rng, r=10)
        b = random_convex(rng, r=10).translated(*rng.uniform(25, 60, 2))
        seg = rng.uniform(-40, 40, (2, 2))
        if np.hypot(*(seg[1] - seg[0])) < 1:
            continue
        assert geo.min_distance(a, b) == pytest.approx(_brute_distance(a.vertices, b.vertices), abs=1e-9)
        if geo.min_distance(a, seg) > 0:
            assert geo.min_distance(a, seg) == pytest.approx(_brute_distance(a.vertices, seg), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(polygons, polygons, st.floats(-80, 80), st.floats(-80, 80))
def test_min_distance_symmetric(a, b, dx, dy):
    b = b.translated(dx, dy)
    assert geo.min_distance(a, b) == geo.min_distance(b, a)


# -- cover points -----------------------------------------------------------

def test_cover_square_is_5x5():
    pts = geo.uniform_cover_points(square(100, 50, 50), 25)
    assert len(pts) == 25
    assert np.allclose(np.unique(np.round(pts[:, 0], 6)), [10, 30, 50, 70, 90])
    assert np.allclose(np.unique(np.round(pts[:, 1], 6)), [10, 30, 50, 70, 90])


def test_cover_sliver_points_inside():
    sliver = ConvexPolygon([(0, 0), (200, 0), (200, 1.5)])
    pts = geo.uniform_cover_points(sliver, 25)
    assert len(pts) >= 1
    assert geo.points_in_polygon(sliver, pts).all()


def test_cover_small_hull_rejected():
    hull = ConvexPolygon([(0, 0), (2, 0), (0, 2)]).vertices * 0.5
    with pytest.raises(DegenerateInput):
        geo.uniform_cover_points(geo.convex_hull(hull), 5)


def test_cover_random_hulls():
    rng = np.random.default_rng(5)
    for _ in range(30):
        hull = random_convex(rng, r=rng.uniform(20, 80))
        pts = geo.uniform_cover_points(hull, 25)
        assert 25 <= len(pts) <= 36
        assert geo.points_in_polygon(hull, pts).all()
        # grid spacing: nearest neighbour distances all equal the pitch
        d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).T)
        np.fill_diagonal(d, np.inf)
        nn = d.min(axis=0)
        assert nn.max() - nn.min() < 1e-9 * max(1.0, nn.max())


def test_cover_is_deterministic():
    hull = random_convex(np.random.default_rng(9))
    assert np.array_equal(geo.uniform_cover_points(hull, 25), geo.uniform_cover_points(hull, 25))


def test_rect_corners_and_local_frame():
    th = math.pi / 6
    rect = OrientedRect((10.0, 5.0), (math.cos(th), math.sin(th)), 42.5, 22.0)
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    local = np.array([[-42.5, -22.0], [42.5, -22.0], [42.5, 22.0], [-42.5, 22.0]])
    expect = local @ R.T + [10.0, 5.0]
    got = rect.corners()
    assert all(np.hypot(*(got - e).T).min() < 1e-9 for e in expect)
    assert np.allclose(rect.to_local(expect), local)
