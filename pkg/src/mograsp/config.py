"""Run configuration read from one INI file.

Every key is optional. A missing key keeps the package default, so an empty
file (or none at all) gives the published parameter values. Unknown
sections and keys are rejected rather than ignored, since a misspelt key
silently falling back to a default is the worst kind of config bug.

Example::

    [sampling]
    n_mc = 30

    [friction]
    world_mu = 0.5
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace
from typing import Optional

from .collect import CollectConfig
from .declutter import BenchConfig
from .errors import ConfigError
from .mognet import TrainConfig
from .planning import GripperSpec, NoiseModel


@dataclass(frozen=True)
class Config:
    bench: BenchConfig = BenchConfig()
    train: TrainConfig = TrainConfig()
    n_samples: int = 1545
    min_group: int = 2
    seed: int = 0
    jobs: int = 1

    def collect(self, mode: str, mu: Optional[float] = None) -> CollectConfig:
        mu = self.bench.frictional_mu if mu is None else mu
        return CollectConfig(self.n_samples, mode, self.min_group, mu, self.bench)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


# section -> key -> parser
_SCHEMA = {
    "gripper": {"max_width": float, "jaw_length": float, "jaw_thickness": float},
    "friction": {"world_mu": float, "frictional_mu": float, "frictionless_mu": float},
    "sampling": {"n_p": int, "n_theta": int, "n_s": int, "n_mc": int, "clearance": float},
    "noise": {"sigma_x": float, "sigma_y": float, "sigma_theta_deg": float, "sigma_object": float},
    "network": {"hidden": _ints, "lr": float, "batch_size": int, "l2": float, "max_epochs": int,
                "patience": int, "val_fraction": float},
    "sim": {"tau_contain": float, "colinear_tol": float, "n_s_support": int, "compliance": float,
            "displacement": float},
    "bench": {"budget_factor": float, "motion_time": float, "timing": str},
    "scene": {"count": int, "region": _floats, "clustering": float, "n_vertices": _ints,
              "radius": _floats, "aspect": _floats, "min_gap": float},
    "collect": {"n_samples": int, "min_group": int},
    "run": {"seed": int, "jobs": int},
}


def _read(parser: configparser.ConfigParser) -> dict:
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            conv = _SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"unknown config key {section}.{key}")
            try:
                values[(section, key)] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
    return values


def _build(v: dict) -> Config:
    d = Config()
    b = d.bench

    def get(section, key, default):
        return v.get((section, key), default)

    gripper = GripperSpec(get("gripper", "max_width", b.gripper.max_width),
                          get("gripper", "jaw_length", b.gripper.jaw_length),
                          get("gripper", "jaw_thickness", b.gripper.jaw_thickness))
    su = b.noise.sigma_u
    noise = NoiseModel((get("noise", "sigma_x", su[0]), get("noise", "sigma_y", su[1]),
                        math.radians(get("noise", "sigma_theta_deg", math.degrees(su[2])))),
                       get("noise", "sigma_object", b.noise.sigma_x),
                       get("sampling", "n_mc", b.noise.n_mc))
    sim = replace(b.sim, **{k: v[("sim", k)] for k in _SCHEMA["sim"] if ("sim", k) in v})
    # the simulator's diameter floor must use the planner's sample count,
    # otherwise full retention no longer implies the necessary conditions
    sim = replace(sim, n_s_min=get("sampling", "n_s", b.n_s))
    scene = replace(b.scene, **{k: v[("scene", k)] for k in _SCHEMA["scene"] if ("scene", k) in v})
    bench = BenchConfig(
        gripper=gripper,
        world_mu=get("friction", "world_mu", b.world_mu),
        noise=noise, sim=sim,
        n_p=get("sampling", "n_p", b.n_p),
        n_theta=get("sampling", "n_theta", b.n_theta),
        n_s=get("sampling", "n_s", b.n_s),
        clearance=get("sampling", "clearance", b.clearance),
        budget_factor=get("bench", "budget_factor", b.budget_factor),
        motion_time=get("bench", "motion_time", b.motion_time),
        timing=get("bench", "timing", b.timing),
        scene=scene,
        frictional_mu=get("friction", "frictional_mu", b.frictional_mu),
        frictionless_mu=get("friction", "frictionless_mu", b.frictionless_mu),
    )
    if min(bench.n_p, bench.n_theta, bench.n_s) < 1:
        raise ConfigError("n_p, n_theta and n_s must be >= 1")
    if bench.clearance < 0:
        raise ConfigError("clearance must be non-negative")
    train = replace(d.train, **{k: v[("network", k)] for k in _SCHEMA["network"] if ("network", k) in v})
    cfg = Config(bench, train,
                 n_samples=get("collect", "n_samples", d.n_samples),
                 min_group=get("collect", "min_group", d.min_group),
                 seed=get("run", "seed", d.seed),
                 jobs=get("run", "jobs", d.jobs))
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    cfg.collect("necessary_conditions")  # validates n_samples and min_group
    return cfg


def parse_config(text: str) -> Config:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return _build(_read(parser))


def load_config(path: Optional[str] = None) -> Config:
    """Config from ``path``, or the defaults when ``path`` is None."""
    if path is None:
        return Config()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text)


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(x) for x in value)
    return repr(value) if isinstance(value, float) else str(value)


def config_to_ini(cfg: Config) -> str:
    """The effective configuration, in the format :func:`parse_config` reads."""
    b = cfg.bench
    rows = {
        "gripper": {"max_width": b.gripper.max_width, "jaw_length": b.gripper.jaw_length,
                    "jaw_thickness": b.gripper.jaw_thickness},
        "friction": {"world_mu": b.world_mu, "frictional_mu": b.frictional_mu,
                     "frictionless_mu": b.frictionless_mu},
        "sampling": {"n_p": b.n_p, "n_theta": b.n_theta, "n_s": b.n_s, "n_mc": b.noise.n_mc,
                     "clearance": b.clearance},
        "noise": {"sigma_x": b.noise.sigma_u[0], "sigma_y": b.noise.sigma_u[1],
                  "sigma_theta_deg": math.degrees(b.noise.sigma_u[2]), "sigma_object": b.noise.sigma_x},
        "network": {k: getattr(cfg.train, k) for k in _SCHEMA["network"]},
        "sim": {k: getattr(b.sim, k) for k in _SCHEMA["sim"]},
        "bench": {"budget_factor": b.budget_factor, "motion_time": b.motion_time, "timing": b.timing},
        "scene": {k: getattr(b.scene, k) for k in _SCHEMA["scene"]},
        "collect": {"n_samples": cfg.n_samples, "min_group": cfg.min_group},
        "run": {"seed": cfg.seed, "jobs": cfg.jobs},
    }
    out = []
    for section, items in rows.items():
        out.append(f"[{section}]")
        out += [f"{k} = {_fmt(v)}" for k, v in items.items()]
        out.append("")
    return "\n".join(out)
