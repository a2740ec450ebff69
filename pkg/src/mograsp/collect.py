"""Self-supervised dataset collection for the grasped-object-count classifier.

Collection runs the decluttering loop on generated scenes, but each attempt
targets a random multi-object group. In ``necessary_conditions`` mode the
executed grasp maximises gamma times the total intersection area over the
candidates; in ``random`` mode it is a uniformly random candidate with no
condition checks. The simulator's outcome labels the planned grasp.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import planning as pl
from .contact import MU_FRICTIONAL, FrictionModel
from .declutter import BenchConfig, _mix_seed, create_obj_groups
from .errors import ConfigError
from .mognet import Sample, encode_features
from .planning import GraspAction
from .sim import SceneSpec, apply_outcome, generate_scene, simulate_grasp

MODES = ("necessary_conditions", "random")


@dataclass(frozen=True)
class CollectConfig:
    n_samples: int = 1545
    mode: str = "necessary_conditions"
    min_group: int = 2
    mu: float = MU_FRICTIONAL
    bench: BenchConfig = BenchConfig()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_samples < 0:
            raise ConfigError("n_samples must be non-negative")
        if not 1 <= self.min_group <= pl.N_G_MAX:
            raise ConfigError(f"min_group must lie in 1..{pl.N_G_MAX}")


def _pick_action(scene, group, cfg: CollectConfig, rng: np.random.Generator, noise) -> Optional[GraspAction]:
    b = cfg.bench
    poses = pl.candidate_poses(scene, group, b.gripper, b.n_p, b.n_theta, b.clearance)
    if len(poses) == 0:
        return None
    if cfg.mode == "random":
        return GraspAction.at(*poses[int(rng.integers(len(poses)))])
    gamma = pl.gamma_batch(scene, group, poses, b.gripper, FrictionModel(cfg.mu), noise, b.n_s)
    score = gamma * pl.AreaHeuristic(b.gripper)(scene, group, poses)
    k = int(np.argmax(score))
    return GraspAction.at(*poses[k]) if score[k] > 0 else None


def collect_dataset(scene_spec: SceneSpec, cfg: CollectConfig = CollectConfig(), seed: int = 0) -> list:
    """Collect ``cfg.n_samples`` labelled grasps.

    Scenes are generated from ``scene_spec`` with seeds derived from
    ``seed``; a scene is replaced once no multi-object group admits a grasp
    or its attempt budget is spent. Each sample records the scene seed and
    the attempt number within that scene.
    """
    b = cfg.bench
    world = FrictionModel(b.world_mu)
    rng = np.random.default_rng([int(seed), 0xC011EC7])
    samples = []
    scene_no = 0
    while len(samples) < cfg.n_samples:
        scene_seed = _mix_seed(seed, scene_no)
        scene_no += 1
        scene = generate_scene(scene_spec.with_seed(scene_seed))
        noise = b.noise.with_seed(scene_seed)
        budget = int(np.ceil(b.budget_factor * len(scene)))
        step = 0
        while step < budget and len(samples) < cfg.n_samples:
            groups = [g for g in create_obj_groups(scene, b.gripper) if len(g) >= cfg.min_group]
            action = None
            while groups and action is None:
                group = groups.pop(int(rng.integers(len(groups))))
                action = _pick_action(scene, group, cfg, rng, noise)
            if action is None:
                break
            exec_noise = replace(b.noise, seed=_mix_seed(scene_seed, step, 1))
            out = simulate_grasp(scene, action, b.gripper, world, exec_noise, b.sim)
            label = len(out.retained & set(group))
            samples.append(Sample(encode_features(scene, group, action).tolist(), label,
                                  scene_seed, step, len(group)))
            scene, _ = apply_outcome(scene, out)
            step += 1
    return samples
