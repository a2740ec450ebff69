"""Collect a little data, train a small count predictor and clear a scene.

Everything here is scaled down (small scenes, 150 samples, a narrow
network) so it finishes in a minute or two; the CLI runs the full-size
versions.
"""
from dataclasses import replace

import numpy as np

from mograsp import declutter as dc
from mograsp.collect import CollectConfig, collect_dataset
from mograsp.mognet import TrainConfig, dataset_arrays, label_entropy, label_histogram, train_ensemble
from mograsp.sim import SceneSpec, generate_scene

scenes = SceneSpec(count=25, region=(300.0, 300.0), clustering=0.8)

data = {}
for mode in ("necessary_conditions", "random"):
    data[mode] = collect_dataset(scenes, CollectConfig(n_samples=150, mode=mode), seed=0)
    print(f"{mode:>21}: labels {label_histogram(data[mode])}, entropy {label_entropy(data[mode]):.2f}")

X, y = dataset_arrays(data["necessary_conditions"])
model = train_ensemble(X, y, TrainConfig(hidden=(64, 32), max_epochs=40))

cfg = replace(dc.BenchConfig(), scene=scenes)
scene = generate_scene(scenes.with_seed(7))
for method in ("mognet", "frictional_sog", "heuristic_at"):
    log = dc.run_declutter(scene, method, cfg, {"mognet": model}, seed=7)
    m = dc.compute_metrics(log, cfg.motion_time)
    sizes = np.bincount([a.n_g for a in log.attempts], minlength=3)
    print(f"{method:>15}: {m.pick_attempts} attempts, {m.grasped_objs:.2f} objects/attempt, "
          f"{m.cleared:.0f}% cleared, picks by size {sizes.tolist()}")
