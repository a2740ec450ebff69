import json
import os
import subprocess
import sys

import pytest

from mograsp.cli import main
from mograsp.sim import scene_from_json, scene_to_json
from mograsp.geometry import ConvexPolygon

FAST = """
[scene]
count = 10
region = 250, 250
clustering = 0.8
[collect]
n_samples = 40
[network]
hidden = 16
max_epochs = 5
[sampling]
n_mc = 10
"""


def square(side, cx=0.0, cy=0.0):
    h = side / 2
    return ConvexPolygon([(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)])


@pytest.fixture
def ini(tmp_path):
    p = tmp_path / "fast.ini"
    p.write_text(FAST)
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_scenes(tmp_path, ini, capsys):
    code, out, _ = run(["gen-scenes", "--config", ini, "--seed", "3", "--count", "2", "--out", str(tmp_path / "s")],
                       capsys)
    assert code == 0
    names = sorted(os.listdir(tmp_path / "s"))
    assert names == ["config.ini", "scene_00003.json", "scene_00004.json"]
    scene, seed = scene_from_json((tmp_path / "s" / "scene_00004.json").read_text())
    assert seed == 4 and len(scene) == 10


def test_check_grasp_report(tmp_path, capsys):
    path = tmp_path / "two.json"
    path.write_text(scene_to_json([square(50, -25), square(50, 25)], seed=0))
    code, out, _ = run(["check-grasp", "--scene", str(path), "--pose", "0", "0", "0", "--mu", "0.01"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["h_star_f"] == pytest.approx(100.0) and rep["verdict"] == "inadmissible" and rep["gamma"] == 0.0


def test_pipeline(tmp_path, ini, capsys):
    d = str(tmp_path)
    for mode, name in (("necessary_conditions", "f.jsonl"), ("random", "r.jsonl")):
        code, out, _ = run(["collect-data", "--config", ini, "--mode", mode, "--out", f"{d}/{name}"], capsys)
        assert code == 0 and json.loads(out)["samples"] == 40
        assert os.path.exists(f"{d}/{name}.config.ini")
    code, out, _ = run(["train", "--config", ini, "--data", f"{d}/f.jsonl", f"{d}/r.jsonl", "--out", f"{d}/m.json"],
                       capsys)
    rep = json.loads(out)
    assert code == 0 and rep["train"] + rep["test"] == 80 and 0 <= rep["accuracy"] <= 1
    code, out, _ = run(["declutter", "--config", ini, "--seed", "2", "--model", f"{d}/m.json",
                        "--out", f"{d}/log.jsonl"], capsys)
    assert code == 0 and json.loads(out)["method"] == "mognet"
    assert open(f"{d}/log.jsonl").readline().startswith('{"type":"episode"')
    args = ["bench", "--config", ini, "--seeds", "0-1", "--methods", "mognet,frictional_sog",
            "--model", f"{d}/m.json"]
    assert run(args + ["--out", f"{d}/a.csv"], capsys)[0] == 0
    assert run(args + ["--out", f"{d}/b.csv", "--jobs", "2"], capsys)[0] == 0
    a, b = open(f"{d}/a.csv").read(), open(f"{d}/b.csv").read()
    assert a == b and a.count("\n") == 5


@pytest.mark.parametrize("argv,code,kind", [
    (["bench", "--methods", "nope"], 2, "ConfigError"),
    (["bench", "--seeds", "x-y"], 2, "ConfigError"),
    (["check-grasp", "--scene", "/nonexistent/s.json", "--pose", "0", "0", "0"], 3, "FileNotFoundError"),
    (["gen-scenes"], 2, "ConfigError"),
    ([], 2, "ConfigError"),
    (["train", "--config", "/nonexistent.ini", "--data", "x", "--out", "y"], 2, "ConfigError"),
])
def test_errors(argv, code, kind, capsys):
    got, _, err = run(argv, capsys)
    assert got == code
    assert json.loads(err.strip())["error"] == kind


def test_schema_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": "other"}')
    assert run(["check-grasp", "--scene", str(bad), "--pose", "0", "0", "0"], capsys)[0] == 4
    bad.write_text("{not json")
    assert run(["check-grasp", "--scene", str(bad), "--pose", "0", "0", "0"], capsys)[0] == 4
    model = tmp_path / "m.json"
    model.write_text('{"schema": "other"}')
    code, _, err = run(["declutter", "--seed", "1", "--model", str(model)], capsys)
    assert code == 4 and json.loads(err)["error"] == "SchemaError"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "mograsp", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("mograsp ")
