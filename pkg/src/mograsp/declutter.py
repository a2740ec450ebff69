"""Decluttering loop, baseline planners, metrics and the benchmark harness.

Each episode repeatedly forms object groups, ranks them largest first,
asks the method's planner for a grasp on each group in turn, executes the
first grasp found in the simulator and removes whatever it held. It stops
when the table is empty, when no group admits a grasp, or when the attempt
budget runs out.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import planning as pl
from .contact import MU_FRICTIONAL, MU_FRICTIONLESS, FrictionModel
from .errors import ConfigError
from .geometry import ConvexPolygon
from .mognet import MogNetEnsemble, MogNetPredictor
from .planning import GraspAction, GripperSpec, NoiseModel
from .sim import DEFAULT_SIM, SceneSpec, SimParams, SupportOptions, apply_outcome, generate_scene, simulate_grasp


# ---------------------------------------------------------------------------
# groups

def create_obj_groups(scene, spec: GripperSpec, cap: int = pl.N_G_MAX) -> list:
    """Neighbourhood groups plus every singleton, without duplicates.

    Each object's group holds the objects whose centroids are within half
    the gripper width of its centroid, keeping the ``cap`` nearest.
    Members are sorted by index; groups come out in first-seen order.
    """
    if len(scene) == 0:
        return []
    c = np.array([p.centroid for p in scene])
    d = np.hypot(c[:, None, 0] - c[None, :, 0], c[:, None, 1] - c[None, :, 1])
    radius = spec.max_width / 2.0
    seen, groups = set(), []
    for i in range(len(scene)):
        near = [j for j in np.lexsort((np.arange(len(scene)), d[i])) if d[i, j] <= radius][:cap]
        for g in (tuple(sorted(int(j) for j in near)), (i,)):
            if g not in seen:
                seen.add(g)
                groups.append(g)
    return groups


def rank_obj_groups(groups) -> list:
    """Largest groups first; ties by smaller minimum member index."""
    if not groups:
        raise ValueError("no groups to rank")
    return sorted(groups, key=lambda g: (-len(g), min(g), tuple(g)))


# ---------------------------------------------------------------------------
# methods

class AntipodalPredictor:
    """Single-object grasp quality: 1 if the object can be held on its own.

    The object must have enough area between the jaws and an equilibrium
    contact pair at its extremes along the closing axis that fits the
    initial opening; this mirrors the simulator's single-object rule at the
    nominal pose.
    """

    def __init__(self, spec: GripperSpec, friction: FrictionModel, params: SimParams = DEFAULT_SIM):
        self.spec, self.friction, self.params = spec, friction, params

    def __call__(self, scene, group, poses):
        if len(group) != 1:
            raise ValueError("antipodal predictor scores single objects only")
        poly = scene[group[0]]
        areas = pl.intersection_areas_batch(scene, group, poses, self.spec)[:, 0]
        out = np.zeros(len(poses))
        for k, pose in enumerate(poses):
            if areas[k] / poly.area < self.params.tau_contain:
                continue
            sp = SupportOptions(poly, pose, self.spec, self.params).best(self.friction)
            out[k] = float(sp is not None)
        return out


@dataclass(frozen=True)
class MethodSpec:
    name: str
    planner_mu: float
    predictor: str  # "mognet" | "rand_net" | "antipodal" | "area"
    singletons_only: bool = False


METHODS = {
    "mognet": MethodSpec("mognet", MU_FRICTIONAL, "mognet"),
    "rand_net": MethodSpec("rand_net", MU_FRICTIONAL, "rand_net"),
    "frictional_sog": MethodSpec("frictional_sog", MU_FRICTIONAL, "antipodal", singletons_only=True),
    "frictionless_mognet": MethodSpec("frictionless_mognet", MU_FRICTIONLESS, "mognet"),
    "heuristic_at": MethodSpec("heuristic_at", MU_FRICTIONAL, "area"),
}


@dataclass(frozen=True)
class BenchConfig:
    gripper: GripperSpec = GripperSpec()
    world_mu: float = MU_FRICTIONAL
    noise: NoiseModel = NoiseModel()
    sim: SimParams = DEFAULT_SIM
    n_p: int = pl.N_P
    n_theta: int = pl.N_THETA
    n_s: int = pl.N_S
    clearance: float = pl.DEFAULT_CLEARANCE
    budget_factor: float = 3.0
    motion_time: float = 8.0
    timing: str = "modeled"  # or "wall"
    scene: SceneSpec = SceneSpec()
    frictional_mu: float = MU_FRICTIONAL
    frictionless_mu: float = MU_FRICTIONLESS

    def __post_init__(self):
        for mu in (self.world_mu, self.frictional_mu, self.frictionless_mu):
            FrictionModel(mu)
        if self.timing not in ("modeled", "wall"):
            raise ConfigError("timing must be 'modeled' or 'wall'")
        if self.budget_factor <= 0 or self.motion_time < 0:
            raise ConfigError("budget_factor must be positive and motion_time non-negative")


# deterministic stand-in for planner wall time: fixed overhead per group
# plus a cost per Monte-Carlo condition evaluation
MODEL_GROUP_COST = 2e-3
MODEL_SAMPLE_COST = 4e-6


def resolve_method(method, config: BenchConfig) -> MethodSpec:
    """MethodSpec for a name, with the planner friction taken from ``config``."""
    if isinstance(method, MethodSpec):
        return method
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {sorted(METHODS)}")
    m = METHODS[method]
    mu = config.frictionless_mu if m.planner_mu == MU_FRICTIONLESS else config.frictional_mu
    return replace(m, planner_mu=mu)


def make_predictor(method: MethodSpec, config: BenchConfig, models: dict):
    if method.predictor in ("mognet", "rand_net"):
        if method.predictor not in models:
            raise ConfigError(f"method {method.name} needs a trained {method.predictor} model")
        return MogNetPredictor(models[method.predictor])
    if method.predictor == "antipodal":
        return AntipodalPredictor(config.gripper, FrictionModel(method.planner_mu), config.sim)
    if method.predictor == "area":
        return pl.AreaHeuristic(config.gripper)
    raise ConfigError(f"unknown predictor {method.predictor!r}")


def plan_group(scene, group, method: MethodSpec, config: BenchConfig, predictor, noise: NoiseModel):
    """Best grasp for ``group`` under ``method`` and the candidate count.

    Equivalent to :func:`robust_grasp_planner`, except the predictor is only
    queried where gamma is positive (a zero gamma zeroes the score anyway).
    """
    spec = config.gripper
    poses = pl.candidate_poses(scene, group, spec, config.n_p, config.n_theta, config.clearance)
    if len(poses) == 0:
        return None, 0
    friction = FrictionModel(method.planner_mu)
    gamma = pl.gamma_batch(scene, group, poses, spec, friction, noise, config.n_s)
    live = np.flatnonzero(gamma > 0)
    if live.size == 0:
        return None, len(poses)
    pred = np.asarray(predictor(scene, tuple(group), poses[live]), dtype=float)
    score = gamma[live] * pred
    k = pl.best_index(scene, group, poses[live], score, spec)
    if score[k] <= 0:
        return None, len(poses)
    j = live[k]
    return pl.CandidateEval(GraspAction.at(*poses[j]), float(gamma[j]), float(pred[k])), len(poses)


# ---------------------------------------------------------------------------
# episode

@dataclass
class AttemptRecord:
    step: int
    group: list
    action: list
    gamma: float
    n_g_pred: float
    n_g: int
    retained: list
    squeezed_out: list
    jaw_collision: list
    planning_time: float
    groups_tried: int


@dataclass
class EpisodeLog:
    method: str
    seed: int
    n_initial: int
    attempts: list = field(default_factory=list)
    blocked: bool = False
    remaining: int = 0

    @property
    def removed(self) -> int:
        return self.n_initial - self.remaining

    def to_jsonl(self) -> str:
        head = {"type": "episode", "method": self.method, "seed": self.seed, "n_initial": self.n_initial,
                "blocked": self.blocked, "remaining": self.remaining}
        lines = [json.dumps(head, separators=(",", ":"))]
        lines += [json.dumps({"type": "attempt", **asdict(a)}, separators=(",", ":")) for a in self.attempts]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeLog":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        head = rows[0]
        if head.get("type") != "episode":
            raise ValueError("episode log must start with an episode header")
        log = cls(head["method"], head["seed"], head["n_initial"], [], head["blocked"], head["remaining"])
        for r in rows[1:]:
            r = dict(r)
            r.pop("type")
            log.attempts.append(AttemptRecord(**r))
        return log


class _PlanCache:
    """Planner results per group, dropped when anything nearby changes.

    A plan depends only on the group members and on objects within the
    gripper's reach of the group, so it can be reused until one of those
    objects is removed or moved.
    """

    def __init__(self, reach: float):
        self.reach = reach
        self.entries = {}

    def get(self, key):
        return self.entries.get(key)

    def put(self, key, value, polys):
        v = np.concatenate([p.vertices for p in polys])
        c = v.mean(axis=0)
        self.entries[key] = (value, c, float(np.hypot(*(v - c).T).max()))

    def invalidate(self, changed):
        for poly in changed:
            v = poly.vertices
            pc = v.mean(axis=0)
            pr = float(np.hypot(*(v - pc).T).max())
            stale = [k for k, (_, c, r) in self.entries.items()
                     if math.hypot(*(pc - c)) <= r + pr + self.reach + 1e-6]
            for k in stale:
                del self.entries[k]


def _mix_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


def run_declutter(scene, method, config: BenchConfig = BenchConfig(), models: Optional[dict] = None,
                  seed: int = 0, on_step=None) -> EpisodeLog:
    """Clear ``scene`` with ``method``; returns the attempt log.

    Object ids in the log are indices into the initial scene. If given,
    ``on_step(record, scene_before, outcome)`` is called after every attempt.
    """
    m = resolve_method(method, config)
    predictor = make_predictor(m, config, models or {})
    spec = config.gripper
    world = FrictionModel(config.world_mu)
    noise = config.noise.with_seed(seed)
    ids = list(range(len(scene)))
    current = list(scene)
    log = EpisodeLog(m.name, int(seed), len(scene), remaining=len(scene))
    budget = int(math.ceil(config.budget_factor * len(scene)))
    cache = _PlanCache(pl._reach(spec, config.clearance))
    step = 0
    while current and step < budget:
        t0 = time.perf_counter()
        groups = rank_obj_groups(create_obj_groups(current, spec))
        if m.singletons_only:
            groups = [g for g in groups if len(g) == 1]
        chosen, modeled, tried = None, 0.0, 0
        for g in groups:
            key = frozenset(ids[i] for i in g)
            hit = cache.get(key)
            if hit is None:
                result = plan_group(current, g, m, config, predictor, noise)
                cache.put(key, result, [current[i] for i in g])
            else:
                result = hit[0]
            best, n_cands = result
            tried += 1
            modeled += MODEL_GROUP_COST + MODEL_SAMPLE_COST * n_cands * noise.n_mc
            if best is not None:
                chosen = (g, best)
                break
        wall = time.perf_counter() - t0
        if chosen is None:
            log.blocked = True
            break
        g, best = chosen
        exec_noise = replace(noise, seed=_mix_seed(seed, step, 1))
        out = simulate_grasp(current, best.action, spec, world, exec_noise, config.sim)
        log.attempts.append(AttemptRecord(
            step, [ids[i] for i in g], [float(v) for v in best.action.as_array()], best.gamma,
            best.n_g_pred, out.n_g, sorted(ids[i] for i in out.retained),
            sorted(ids[i] for i, r in out.per_object_reason.items() if r == "squeezed_out"),
            sorted(ids[i] for i, r in out.per_object_reason.items() if r == "jaw_collision"),
            modeled if config.timing == "modeled" else wall, tried))
        if on_step is not None:
            on_step(log.attempts[-1], current, out)
        changed = [current[i] for i in out.retained]
        for i, poly in out.displaced.items():
            changed += [current[i], poly]
        cache.invalidate(changed)
        current, kept = apply_outcome(current, out)
        ids = [ids[i] for i in kept]
        step += 1
    log.remaining = len(current)
    return log


# ---------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class Metrics:
    success_rate: float
    grasped_objs: float
    pick_attempts: int
    cleared: float
    planning_time: float
    pph: float


def compute_metrics(log: EpisodeLog, motion_time: float = 8.0) -> Metrics:
    """Summary of one episode; ``motion_time`` seconds are charged per attempt."""
    n = len(log.attempts)
    cleared = 100.0 * log.removed / log.n_initial if log.n_initial else 100.0
    if n == 0:
        return Metrics(0.0, 0.0, 0, cleared, 0.0, 0.0)
    ng = np.array([a.n_g for a in log.attempts])
    plan = np.array([a.planning_time for a in log.attempts])
    total = float(plan.sum() + motion_time * n)
    pph = 3600.0 * log.removed / total if total > 0 else math.inf
    return Metrics(100.0 * float(np.mean(ng >= 1)), float(ng.mean()), n, cleared, float(plan.mean()), pph)


# ---------------------------------------------------------------------------
# benchmark

METRIC_FIELDS = ("success_rate", "grasped_objs", "pick_attempts", "cleared", "planning_time", "pph")


def _bench_one(args):
    method, seed, config, models = args
    scene = generate_scene(config.scene.with_seed(seed))
    log = run_declutter(scene, method, config, models, seed)
    return method, seed, compute_metrics(log, config.motion_time), log


def run_bench(seeds: Sequence[int], methods: Sequence[str], config: BenchConfig = BenchConfig(),
              models: Optional[dict] = None, jobs: int = 1) -> list:
    """(method, seed, Metrics, EpisodeLog) for every combination, in input order."""
    for m in methods:
        resolve_method(m, config)
    tasks = [(m, int(s), config, models or {}) for m in methods for s in seeds]
    if jobs <= 1:
        return [_bench_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_bench_one, tasks))


def _fmt(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else f"{v:.6f}"


def bench_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("method", "seed") + METRIC_FIELDS)
    for method, seed, met, _ in rows:
        w.writerow([method, seed] + [_fmt(getattr(met, f)) for f in METRIC_FIELDS])
    return buf.getvalue()
