import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mograsp import geometry as geo
from mograsp import planning as pl
from mograsp import sim
from mograsp.contact import FrictionModel
from mograsp.errors import PlacementFailure, SchemaError
from mograsp.geometry import ConvexPolygon
from mograsp.planning import ZERO_NOISE, GraspAction, GripperSpec, NoiseModel
from mograsp.sim import SceneSpec, apply_outcome, generate_scene, simulate_grasp

SPEC = GripperSpec()


def square(side, cx=0.0, cy=0.0):
    h = side / 2
    return ConvexPolygon([(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)])


def test_single_square_retained():
    out = simulate_grasp([square(50)], GraspAction.at(0, 0, 0), SPEC, FrictionModel(0.01), ZERO_NOISE)
    assert out.retained == {0} and out.n_g == 1
    assert out.final_width == pytest.approx(50.0)
    assert out.per_object_reason == {0: sim.RETAINED}


def test_triangle_edges_slip():
    # apex and base both lie outside the jaws, so only the two legs
    # (30 deg off the jaw faces) can be touched
    s = 90.0
    h = s * math.sqrt(3) / 2
    tri = ConvexPolygon([(-s / 2, -h / 2), (s / 2, -h / 2), (0, h / 2)])
    for mu in (0.01, 0.5):
        out = simulate_grasp([tri], GraspAction.at(0, 0, 0), SPEC, FrictionModel(mu), ZERO_NOISE)
        assert out.n_g == 0
        assert out.per_object_reason[0] == sim.SQUEEZED_OUT


def test_tapered_object_needs_friction():
    # legs 20 deg off the jaw faces: outside a 0.57 deg cone, inside a 26.57 deg one
    t = math.tan(math.radians(20))
    trap = ConvexPolygon([(-10 - 60 * t, -30), (10 + 60 * t, -30), (10, 30), (-10, 30)])
    a = GraspAction.at(0, 0, 0)
    assert simulate_grasp([trap], a, SPEC, FrictionModel(0.01), ZERO_NOISE).n_g == 0
    out = simulate_grasp([trap], a, SPEC, FrictionModel(0.5), ZERO_NOISE)
    assert out.retained == {0}
    sp = out.support[0]
    assert abs(math.atan2(sp.line[1], sp.line[0])) <= 0.05


def test_jaw_collision_and_never_contacted():
    scene = [square(30), square(6, 45.5, 0), square(20, 0, 200)]
    out = simulate_grasp(scene, GraspAction.at(0, 0, 0), SPEC, FrictionModel(0.5), ZERO_NOISE)
    assert out.per_object_reason == {0: sim.RETAINED, 1: sim.JAW_COLLISION, 2: sim.NEVER_CONTACTED}
    assert 1 in out.displaced
    moved = out.displaced[1]
    assert geo.min_distance(moved, square(30)) > 0


def test_two_squares_held_together():
    scene = [square(40, -20.5), square(40, 20.5)]
    out = simulate_grasp(scene, GraspAction.at(0, 0, 0), SPEC, FrictionModel(0.5), ZERO_NOISE)
    assert out.retained == {0, 1}
    assert out.final_width == pytest.approx(80.0)
    assert out.chain == (0, 1)


def test_oversized_pair_not_both_held():
    scene = [square(50, -25.5), square(50, 25.5)]
    out = simulate_grasp(scene, GraspAction.at(0, 0, 0), SPEC, FrictionModel(0.5), ZERO_NOISE)
    assert out.n_g < 2


def test_exec_noise_is_seeded():
    scene = [square(40, -20.5), square(40, 20.5)]
    a = GraspAction.at(0, 0, 0)
    n1 = NoiseModel(seed=7)
    o1 = simulate_grasp(scene, a, SPEC, FrictionModel(0.5), n1)
    o2 = simulate_grasp(scene, a, SPEC, FrictionModel(0.5), n1)
    assert o1.retained == o2.retained and o1.final_width == o2.final_width
    assert np.array_equal(o1.executed.as_array(), o2.executed.as_array())
    o3 = simulate_grasp(scene, a, SPEC, FrictionModel(0.5), NoiseModel(seed=8))
    assert not np.array_equal(o1.executed.as_array(), o3.executed.as_array())


# -- properties over random scenes and poses -------------------------------

def _case(seed, k):
    scene = generate_scene(SceneSpec(seed=seed, count=8, region=(160.0, 160.0), clustering=0.9))
    rng = np.random.default_rng([seed, k])
    i = int(rng.integers(len(scene)))
    c = scene[i].centroid + rng.normal(0, 15, 2)
    return scene, GraspAction.at(c[0], c[1], rng.uniform(0, math.pi))


cases = st.tuples(st.integers(0, 300), st.integers(0, 1000))


@settings(max_examples=60, deadline=None)
@given(cases)
def test_outcome_invariants(case):
    scene, a = _case(*case)
    out = simulate_grasp(scene, a, SPEC, FrictionModel(0.5), ZERO_NOISE)
    assert out.n_g == len(out.retained)
    assert out.final_width <= SPEC.max_width + 1e-9
    assert set(out.per_object_reason) == set(range(len(scene)))
    for i in out.retained:
        assert out.per_object_reason[i] == sim.RETAINED
    # the retained set is a contiguous run of the squeeze chain
    if out.retained:
        pos = sorted(out.chain.index(i) for i in out.retained)
        assert pos == list(range(pos[0], pos[-1] + 1))
    # displaced objects never overlap anything left behind
    new, kept = apply_outcome(scene, out)
    assert len(new) + out.n_g == len(scene)
    moved = [j for j, i in enumerate(kept) if i in out.displaced]
    for j in moved:
        for k in range(len(new)):
            if k != j:
                assert geo.min_distance(new[j], new[k]) > 0


@settings(max_examples=60, deadline=None)
@given(cases, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_retained_set_monotone_in_friction(case, m1, m2):
    scene, a = _case(*case)
    lo, hi = sorted((m1, m2))
    r_lo = simulate_grasp(scene, a, SPEC, FrictionModel(lo), ZERO_NOISE).retained
    r_hi = simulate_grasp(scene, a, SPEC, FrictionModel(hi), ZERO_NOISE).retained
    assert r_lo <= r_hi


def test_full_retention_implies_conditions_small_grid():
    fm = FrictionModel(0.5)
    found = 0
    for seed in range(6):
        scene = generate_scene(SceneSpec(seed=seed, count=2, region=(100.0, 100.0), clustering=1.0,
                                         radius=(11.0, 16.0)))
        group = tuple(range(len(scene)))
        hull = geo.convex_hull(np.concatenate([p.vertices for p in scene]))
        for p in geo.uniform_cover_points(hull, 16):
            for th in np.arange(8) * math.pi / 8:
                a = GraspAction.at(p[0], p[1], th)
                out = simulate_grasp(scene, a, SPEC, fm, ZERO_NOISE)
                if out.retained >= set(group):
                    found += 1
                    assert pl.check_necessary_conditions(scene, group, a, SPEC, fm)
    assert found > 0


# -- scenes -----------------------------------------------------------------

def test_generate_75_disjoint_and_reproducible():
    a = generate_scene(SceneSpec(seed=3))
    b = generate_scene(SceneSpec(seed=3))
    assert len(a) == 75
    assert all(np.array_equal(p.vertices, q.vertices) for p, q in zip(a, b))
    for i, p in enumerate(a):
        assert 3 <= len(p.vertices) <= 8
        for q in a[i + 1:]:
            assert geo.min_distance(p, q) > 0


def _mean_nn(scene):
    c = np.array([p.centroid for p in scene])
    d = np.hypot(*(c[:, None, :] - c[None, :, :]).T)
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1).mean()


def test_clustering_reduces_spacing():
    tight = np.mean([_mean_nn(generate_scene(SceneSpec(seed=s, clustering=0.9))) for s in range(20)])
    loose = np.mean([_mean_nn(generate_scene(SceneSpec(seed=s, clustering=0.0))) for s in range(20)])
    assert tight < loose


def test_single_object_scene():
    spec = SceneSpec(seed=1, count=1)
    (p,) = generate_scene(spec)
    assert np.all(p.vertices >= 0) and np.all(p.vertices <= spec.region)


def test_placement_failure():
    with pytest.raises(PlacementFailure):
        generate_scene(SceneSpec(count=40, region=(50.0, 50.0), radius=(11.0, 12.0), max_tries=50))


def test_scene_json_round_trip():
    scene = generate_scene(SceneSpec(seed=5, count=6))
    text = sim.scene_to_json(scene, seed=5)
    assert json.loads(text)["schema"] == sim.SCENE_SCHEMA
    back, seed = sim.scene_from_json(text)
    assert seed == 5
    assert all(np.array_equal(p.vertices, q.vertices) for p, q in zip(scene, back))
    assert sim.scene_to_json(back, seed=5) == text
    with pytest.raises(SchemaError):
        sim.scene_from_json(json.dumps({"schema": "other", "objects": []}))
