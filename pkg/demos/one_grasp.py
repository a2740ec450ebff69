"""Plan one grasp in a small cluttered scene and look at what happens.

The planner scores each candidate by the Monte-Carlo probability of the
necessary conditions times the area of the group between the jaws; the
simulator then says which objects were held and why the others were not.
"""
from collections import Counter

from mograsp import declutter as dc
from mograsp import planning as pl
from mograsp.contact import FrictionModel
from mograsp.sim import SceneSpec, apply_outcome, generate_scene, simulate_grasp

spec = pl.GripperSpec()
friction = FrictionModel(0.5)
noise = pl.NoiseModel(seed=3)

scene = generate_scene(SceneSpec(seed=3, count=12, region=(250.0, 250.0), clustering=0.8))
groups = dc.rank_obj_groups(dc.create_obj_groups(scene, spec))
print(len(scene), "objects,", len(groups), "candidate groups, sizes", Counter(len(g) for g in groups))

for group in groups:
    best = pl.robust_grasp_planner(scene, group, spec, friction, noise, pl.AreaHeuristic(spec))
    if best is not None:
        break
print("group", group, "grasp", [round(float(v), 2) for v in best.action.as_array()], "gamma", round(best.gamma, 3))

out = simulate_grasp(scene, best.action, spec, friction, noise.with_seed(99))
print("held", sorted(out.retained), "final width %.1f mm" % out.final_width)
for i, why in sorted(out.per_object_reason.items()):
    if why != "never_contacted":
        print("  object", i, why)

remaining, _ = apply_outcome(scene, out)
print(len(remaining), "objects left")
