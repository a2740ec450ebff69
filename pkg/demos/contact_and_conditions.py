"""How friction changes which grasps are worth trying.

Walks through the contact model on two simple shapes, then asks the
necessary-condition checker and its Monte-Carlo version about a two-object
grasp. Run with ``python demos/contact_and_conditions.py``.
"""
import math

from mograsp.contact import FrictionModel, min_stable_diameter, multi_object_min_diameter
from mograsp.geometry import ConvexPolygon
from mograsp.planning import GraspAction, GripperSpec, NoiseModel, condition_report, necessary_conds_proba


def square(side, cx=0.0, cy=0.0):
    h = side / 2
    return ConvexPolygon([(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)])


slippery, grippy = FrictionModel(0.01), FrictionModel(0.5)

# A square can only be squeezed across its faces, whatever the friction.
sq = square(50)
print("50 mm square:", min_stable_diameter(sq, slippery, 5), min_stable_diameter(sq, grippy, 5))

# An equilateral triangle is held vertex-to-edge, at its altitude.
tri = ConvexPolygon([(0, 0), (60, 0), (30, 30 * math.sqrt(3))])
print("60 mm triangle: %.2f mm (altitude %.2f)" % (min_stable_diameter(tri, slippery, 5), 30 * math.sqrt(3)))

# A trapezoid whose legs lean 20 deg gets pinched below its width once the
# friction cone is wider than the lean.
t = math.tan(math.radians(20))
trap = ConvexPolygon([(-10 - 60 * t, -30), (10 + 60 * t, -30), (10, 30), (-10, 30)])
print("trapezoid: min width %.1f, mu=0.01 %.1f, mu=0.5 %.1f"
      % (trap.min_width(), min_stable_diameter(trap, slippery, 5), min_stable_diameter(trap, grippy, 5)))

# For a chain of objects the minima simply add up.
pair = [square(40, -21), square(40, 21)]
print("two 40 mm squares need at least", multi_object_min_diameter(pair, grippy, 5), "mm")

spec = GripperSpec()
for x in (0.0, 12.0):
    a = GraspAction.at(x, 0.0, 0.0)
    rep = condition_report(pair, [0, 1], a, spec, grippy)
    gamma = necessary_conds_proba(pair, [0, 1], a, spec, grippy, NoiseModel(n_mc=2000, seed=1))
    print(f"grasp at x={x:>4}: h0={rep['h0']:.1f} h*={rep['h_star_f']:.1f} admissible={rep['admissible']}"
          f" gamma={gamma:.3f}")
