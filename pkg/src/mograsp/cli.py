"""Command-line entry point.

    mograsp gen-scenes    --seed 0 --count 10 --out scenes/
    mograsp collect-data  --mode necessary_conditions --out data.jsonl
    mograsp train         --data data.jsonl --out model.json
    mograsp check-grasp   --scene scene.json --pose 0 0 0
    mograsp declutter     --scene scene.json --model model.json --method mognet --out log.jsonl
    mograsp bench         --seeds 0-9 --methods mognet,frictional_sog --model model.json --out bench.csv

Every output file is written atomically and gets a ``.config.ini`` sidecar
holding the effective configuration. Failures print one JSON line on stderr,
``{"error": <kind>, "message": <text>}``, and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import __version__
from .collect import MODES, collect_dataset
from .config import Config, config_to_ini, load_config
from .contact import FrictionModel
from .declutter import METHODS, bench_csv, compute_metrics, resolve_method, run_bench, run_declutter
from .errors import ConfigError, MograspError, SchemaError
from .mognet import (MogNetEnsemble, N_CLASSES, dataset_arrays, dumps_dataset, label_entropy,
                     label_histogram, loads_dataset, train_ensemble)
from .planning import GraspAction, condition_report, necessary_conds_proba
from .sim import generate_scene, scene_from_json, scene_to_json

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SCHEMA = 4
EXIT_FAILURE = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(path: str, text: str, cfg: Config) -> None:
    write_atomic(path, text)
    write_atomic(path + ".config.ini", config_to_ini(cfg))


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_model(path):
    return MogNetEnsemble.from_json(_read(path))


def _seeds(spec: str) -> list:
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            out += list(range(int(lo), int(hi) + 1)) if sep else [int(lo)]
        except ValueError as exc:
            raise ConfigError(f"bad seed list {spec!r}") from exc
    if not out:
        raise ConfigError("empty seed list")
    return out


def _mu(args, default: float) -> float:
    mu = default if args.mu is None else args.mu
    FrictionModel(mu)
    return mu


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_scenes(args, cfg: Config) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    spec = cfg.bench.scene
    if args.objects is not None:
        spec = replace(spec, count=args.objects)
    os.makedirs(args.out, exist_ok=True)
    for s in range(seed, seed + args.count):
        scene = generate_scene(spec.with_seed(s))
        write_atomic(os.path.join(args.out, f"scene_{s:05d}.json"), scene_to_json(scene, s))
    write_atomic(os.path.join(args.out, "config.ini"), config_to_ini(cfg))
    print(f"wrote {args.count} scenes to {args.out}")
    return 0


def cmd_collect(args, cfg: Config) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    ccfg = cfg.collect(args.mode, _mu(args, cfg.bench.frictional_mu))
    if args.samples is not None:
        ccfg = replace(ccfg, n_samples=args.samples)
    samples = collect_dataset(cfg.bench.scene, ccfg, seed)
    _emit(args.out, dumps_dataset(samples), cfg)
    hist = label_histogram(samples)
    print(json.dumps({"mode": args.mode, "samples": len(samples), "histogram": hist.tolist(),
                      "entropy": round(label_entropy(samples), 6)}))
    return 0


def cmd_train(args, cfg: Config) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    samples = []
    for path in args.data:
        samples += loads_dataset(_read(path))
    if not samples:
        raise ConfigError("training data is empty")
    rng = np.random.default_rng([seed, 7])
    order = rng.permutation(len(samples))
    n_test = int(round(args.test_fraction * len(samples)))
    test = [samples[i] for i in order[:n_test]]
    train = [samples[i] for i in order[n_test:]]
    X, y = dataset_arrays(train)
    ens = train_ensemble(X, y, replace(cfg.train, seed=seed))
    _emit(args.out, ens.to_json(), cfg)
    report = {"train": len(train), "test": len(test)}
    if test:
        Xt, yt = dataset_arrays(test)
        counts, _ = ens.predict(Xt, np.array([s.group_size for s in test]))
        report["accuracy"] = round(float(np.mean(counts == yt)), 6)
        report["per_class"] = {str(c): (round(float(np.mean(counts[yt == c] == c)), 6) if np.any(yt == c) else None)
                               for c in range(N_CLASSES)}
    print(json.dumps(report))
    return 0


def cmd_check_grasp(args, cfg: Config) -> int:
    scene, _ = scene_from_json(_read(args.scene))
    group = list(range(len(scene))) if args.group is None else [int(i) for i in args.group.split(",")]
    if any(not 0 <= i < len(scene) for i in group):
        raise ConfigError(f"group indices must lie in 0..{len(scene) - 1}")
    action = GraspAction.at(*args.pose)
    friction = FrictionModel(_mu(args, cfg.bench.frictional_mu))
    rep = condition_report(scene, group, action, cfg.bench.gripper, friction, cfg.bench.n_s)
    noise = cfg.bench.noise.with_seed(cfg.seed if args.seed is None else args.seed)
    rep["gamma"] = necessary_conds_proba(scene, group, action, cfg.bench.gripper, friction, noise, cfg.bench.n_s)
    rep["group"] = group
    rep["verdict"] = "admissible" if rep["admissible"] else "inadmissible"
    print(json.dumps(rep))
    return 0


def cmd_declutter(args, cfg: Config) -> int:
    if args.scene is not None:
        scene, scene_seed = scene_from_json(_read(args.scene))
    else:
        scene_seed = cfg.seed if args.seed is None else args.seed
        scene = generate_scene(cfg.bench.scene.with_seed(scene_seed))
    seed = args.seed if args.seed is not None else (scene_seed if scene_seed is not None else cfg.seed)
    method = resolve_method(args.method, cfg.bench)
    if args.mu is not None:
        method = replace(method, planner_mu=_mu(args, method.planner_mu))
    models = {}
    if args.model:
        models["mognet"] = _load_model(args.model)
    if args.rand_model:
        models["rand_net"] = _load_model(args.rand_model)
    log = run_declutter(scene, method, cfg.bench, models, seed)
    if args.out:
        _emit(args.out, log.to_jsonl(), cfg)
    met = compute_metrics(log, cfg.bench.motion_time)
    print(json.dumps({"method": method.name, "seed": seed, **met.__dict__, "blocked": log.blocked}))
    return 0


def cmd_bench(args, cfg: Config) -> int:
    if args.seeds is not None:
        seeds = _seeds(args.seeds)
    else:
        first = cfg.seed if args.seed is None else args.seed
        seeds = list(range(first, first + args.n_seeds))
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    models = {}
    if args.model:
        models["mognet"] = _load_model(args.model)
    if args.rand_model:
        models["rand_net"] = _load_model(args.rand_model)
    jobs = cfg.jobs if args.jobs is None else args.jobs
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    rows = run_bench(seeds, methods, cfg.bench, models, jobs)
    text = bench_csv(rows)
    if args.out:
        _emit(args.out, text, cfg)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mograsp", description="Planar multi-object grasp planning toolkit.")
    p.add_argument("--version", action="version", version=f"mograsp {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--seed", type=int, help="overrides [run] seed")
        return sp

    sp = common(sub.add_parser("gen-scenes", help="generate scene JSON files"))
    sp.add_argument("--count", type=int, default=1, help="number of scenes (consecutive seeds)")
    sp.add_argument("--objects", type=int, help="objects per scene")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_gen_scenes)

    sp = common(sub.add_parser("collect-data", help="collect a labelled JSONL dataset"))
    sp.add_argument("--mode", choices=MODES, default="necessary_conditions")
    sp.add_argument("--mu", type=float, help="planner friction coefficient")
    sp.add_argument("--samples", type=int, help="overrides [collect] n_samples")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_collect)

    sp = common(sub.add_parser("train", help="train the count classifier ensemble"))
    sp.add_argument("--data", required=True, nargs="+", help="one or more JSONL datasets")
    sp.add_argument("--test-fraction", type=float, default=0.2)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("check-grasp", help="necessary-condition report for one grasp"))
    sp.add_argument("--scene", required=True)
    sp.add_argument("--pose", required=True, nargs=3, type=float, metavar=("X", "Y", "THETA"))
    sp.add_argument("--group", help="comma-separated object indices (default: all)")
    sp.add_argument("--mu", type=float)
    sp.set_defaults(func=cmd_check_grasp)

    sp = common(sub.add_parser("declutter", help="clear one scene and write the episode log"))
    sp.add_argument("--scene", help="scene JSON (default: generate from --seed)")
    sp.add_argument("--method", choices=sorted(METHODS), default="mognet")
    sp.add_argument("--model", help="MOG-Net model JSON")
    sp.add_argument("--rand-model", help="model trained on random-mode data (rand_net)")
    sp.add_argument("--mu", type=float, help="planner friction coefficient")
    sp.add_argument("--out", help="episode log JSONL")
    sp.set_defaults(func=cmd_declutter)

    sp = common(sub.add_parser("bench", help="metrics CSV over seeds and methods"))
    sp.add_argument("--seeds", help="e.g. 0-9 or 0,3,5 (default: --n-seeds from --seed)")
    sp.add_argument("--n-seeds", type=int, default=10)
    sp.add_argument("--methods", "--method", default="mognet,frictional_sog,frictionless_mognet")
    sp.add_argument("--model")
    sp.add_argument("--rand-model")
    sp.add_argument("--jobs", type=int)
    sp.add_argument("--out", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_bench)
    return p


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("missing subcommand; see --help")
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        return _fail("ConfigError", str(exc), EXIT_USAGE)
    except SchemaError as exc:
        return _fail("SchemaError", str(exc), EXIT_SCHEMA)
    except (KeyError, json.JSONDecodeError) as exc:
        return _fail("SchemaError", f"malformed input: {exc}", EXIT_SCHEMA)
    except OSError as exc:
        return _fail(type(exc).__name__, f"{exc.strerror}: {exc.filename}", EXIT_IO)
    except MograspError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_FAILURE)


if __name__ == "__main__":
    sys.exit(main())
