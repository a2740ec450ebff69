"""Planar multi-object grasp planning on a deterministic quasi-static simulator.

The modules, roughly in dependency order:

geometry    convex polygons, clipping, distances, batched kernels
contact     friction cones, equilibrium pairs, minimum stable diameters
planning    candidate generation, necessary conditions, gamma, the planner
sim         grasp outcome simulator and scene generator
mognet      feature encoding and the count classifier ensemble
declutter   object groups, the decluttering loop and benchmark metrics
collect     self-supervised dataset collection
config, cli run configuration and the command-line tool
"""
__version__ = "0.1.0"

from .contact import FrictionModel, min_stable_diameter, multi_object_min_diameter
from .geometry import ConvexPolygon, OrientedRect, Pose2
from .planning import (GraspAction, GripperSpec, NoiseModel, check_necessary_conditions,
                       necessary_conds_proba, robust_grasp_planner)
from .sim import SceneSpec, generate_scene, simulate_grasp

__all__ = [
    "ConvexPolygon", "OrientedRect", "Pose2", "FrictionModel", "min_stable_diameter",
    "multi_object_min_diameter", "GraspAction", "GripperSpec", "NoiseModel",
    "check_necessary_conditions", "necessary_conds_proba", "robust_grasp_planner",
    "SceneSpec", "generate_scene", "simulate_grasp",
]
