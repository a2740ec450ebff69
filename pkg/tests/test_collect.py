import numpy as np
import pytest

from mograsp import mognet as mn
from mograsp.collect import CollectConfig, collect_dataset
from mograsp.declutter import BenchConfig
from mograsp.errors import ConfigError
from mograsp.sim import SceneSpec

SCENES = SceneSpec(count=20, region=(300.0, 300.0), clustering=0.8)


@pytest.mark.parametrize("mode", ["necessary_conditions", "random"])
def test_labels_bounded_and_reproducible(mode):
    cfg = CollectConfig(n_samples=40, mode=mode)
    a = collect_dataset(SCENES, cfg, seed=4)
    b = collect_dataset(SCENES, cfg, seed=4)
    assert len(a) == 40
    assert mn.dumps_dataset(a) == mn.dumps_dataset(b)
    for s in a:
        assert 2 <= s.group_size <= 4
        assert 0 <= s.label <= s.group_size
        assert len(s.features) == 65


def test_seed_changes_data():
    cfg = CollectConfig(n_samples=10, mode="random")
    assert mn.dumps_dataset(collect_dataset(SCENES, cfg, 1)) != mn.dumps_dataset(collect_dataset(SCENES, cfg, 2))


def test_provenance_steps_increase_within_scene():
    samples = collect_dataset(SCENES, CollectConfig(n_samples=30), seed=0)
    by_scene = {}
    for s in samples:
        by_scene.setdefault(s.seed, []).append(s.step)
    for steps in by_scene.values():
        assert steps == list(range(len(steps)))


def test_config_validation():
    with pytest.raises(ConfigError):
        CollectConfig(mode="greedy")
    with pytest.raises(ConfigError):
        CollectConfig(min_group=5)
    with pytest.raises(ConfigError):
        CollectConfig(n_samples=-1)
    assert CollectConfig().n_samples == 1545
    assert CollectConfig(bench=BenchConfig()).min_group == 2
    assert np.isclose(CollectConfig().mu, 0.5)
