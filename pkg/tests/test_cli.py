from __future__ import annotations

import json

import pytest

from minworld.cli import main
from minworld.world import Aabb, Pose, WorldModel, WorldObject


@pytest.fixture(scope="module")
def trees(assets):
    return {
        "drive": str(assets / "trees" / "drive_to_the_door.txt"),
        "open": str(assets / "trees" / "open_the_door.txt"),
        "turn": str(assets / "trees" / "turn_the_handle_of_the_door.txt"),
    }


@pytest.fixture(scope="module")
def world_file(tmp_path_factory):
    door = WorldObject(1, "door", Pose(5.0, 0.0, 1.0),
                       Aabb((5.0, -0.45, 0.0), (5.05, 0.45, 2.0)))
    handle = WorldObject(2, "door_handle", Pose(5.0, -0.35, 0.95),
                         Aabb((5.0, -0.4, 0.9), (5.04, -0.3, 1.0)), parent=1)
    path = tmp_path_factory.mktemp("worlds") / "world.json"
    WorldModel([door, handle]).save(path)
    return str(path)


def _json_out(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


# -- train -------------------------------------------------------------------

def test_train_perception_model(tmp_path, assets, capsys):
    out = tmp_path / "perception.json"
    code = main(["train", "--corpus", str(assets / "perception_corpus.json"),
                 "--out", str(out), "--iterations", "200", "--json"])
    assert code == 0
    summary = _json_out(capsys)
    assert summary["kind"] == "perception"
    assert summary["recovery"] == 1.0
    assert out.is_file()


def test_train_rejects_bad_corpus(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text('{"kind": "perception"}')
    code = main(["train", "--corpus", str(bad), "--out", str(tmp_path / "m.json")])
    assert code == 1
    assert "error [io]" in capsys.readouterr().err


# -- ground ------------------------------------------------------------------

def test_ground_open_instruction(trees, model_dir, capsys):
    code = main(["ground", "--tree", trees["open"],
                 "--model", str(model_dir / "perception.json"), "--json"])
    assert code == 0
    out = _json_out(capsys)
    assert out["instruction"] == "open the door"
    assert out["detectors"] == ["door", "door_handle"]
    assert out["links"] == [["door", "handle"]]


def test_ground_drive_instruction(trees, model_dir, capsys):
    code = main(["ground", "--tree", trees["drive"],
                 "--model", str(model_dir / "perception.json"), "--json"])
    assert code == 0
    out = _json_out(capsys)
    assert out["detectors"] == ["door"]
    assert out["links"] == []


def test_ground_behavior_needs_world(trees, model_dir, capsys):
    code = main(["ground", "--tree", trees["open"],
                 "--model", str(model_dir / "behavior.json")])
    assert code == 1
    capsys.readouterr()


def test_ground_behavior_with_world(trees, model_dir, world_file, capsys):
    code = main(["ground", "--tree", trees["open"],
                 "--model", str(model_dir / "behavior.json"),
                 "--world", world_file, "--json"])
    assert code == 0
    out = _json_out(capsys)
    assert out["action"] == "open"
    assert out["target_label"] == "door"


def test_ground_zero_model_exits_grounding(tmp_path, trees, assets, capsys):
    flat = tmp_path / "flat.json"
    assert main(["train", "--corpus", str(assets / "perception_corpus.json"),
                 "--out", str(flat), "--iterations", "0"]) == 0
    capsys.readouterr()
    code = main(["ground", "--tree", trees["open"], "--model", str(flat)])
    assert code == 2
    assert "error [grounding]" in capsys.readouterr().err


def test_ground_missing_tree(model_dir, capsys):
    code = main(["ground", "--tree", "/nonexistent/tree.txt",
                 "--model", str(model_dir / "perception.json")])
    assert code == 1
    capsys.readouterr()


# -- perceive ----------------------------------------------------------------

def test_perceive_adaptive(tmp_path, capsys):
    out_dir = tmp_path / "sense"
    code = main(["perceive", "--detectors", "door,door_handle",
                 "--links", "door:handle", "--json", "--out-dir", str(out_dir)])
    assert code == 0
    out = _json_out(capsys)
    assert out["metrics"]["avg_period"] == pytest.approx(0.158)
    labels = {o["label"] for o in out["world"]["objects"]}
    assert labels == {"door", "door_handle"}
    assert (out_dir / "world.json").is_file()
    assert (out_dir / "metrics.json").is_file()


def test_perceive_exhaustive(capsys):
    code = main(["perceive", "--exhaustive", "--json"])
    assert code == 0
    out = _json_out(capsys)
    assert out["metrics"]["avg_period"] == pytest.approx(2.060)
    assert out["metrics"]["mode"] == "exhaustive"


def test_perceive_without_detectors_fails(capsys):
    code = main(["perceive"])
    assert code == 3
    assert "error [perception]" in capsys.readouterr().err


def test_perceive_unknown_detector(capsys):
    code = main(["perceive", "--detectors", "window"])
    assert code == 3
    capsys.readouterr()


def test_perceive_bad_link_spec(capsys):
    code = main(["perceive", "--detectors", "door", "--links", "door"])
    assert code == 1
    capsys.readouterr()


# -- run ---------------------------------------------------------------------

def _run_args(trees, model_dir, tmp_path, tree="open", *extra):
    return ["run", "--tree", trees[tree],
            "--perception-model", str(model_dir / "perception.json"),
            "--behavior-model", str(model_dir / "behavior.json"),
            "--out-dir", str(tmp_path / "out"), "--json", *extra]


def test_run_open_completes(trees, model_dir, tmp_path, capsys):
    code = main(_run_args(trees, model_dir, tmp_path))
    assert code == 0
    out = _json_out(capsys)
    assert out["result"] == "COMPLETE"
    assert out["behavior"]["action"] == "open"
    assert out["detectors"] == ["door", "door_handle"]
    assert out["avg_period"] == pytest.approx(0.158)
    out_dir = tmp_path / "out"
    for name in ("world.json", "metrics.json", "trace.json", "trace.log"):
        assert (out_dir / name).is_file()
    trace = json.loads((out_dir / "trace.json").read_text())
    assert [s for s, _ in trace["trace"]] == [
        "RECEIVED", "NAVIGATING", "DETECTING", "LOCALIZING",
        "TURNING", "PUSHING", "COMPLETE",
    ]


def test_run_drive_completes(trees, model_dir, tmp_path, capsys):
    code = main(_run_args(trees, model_dir, tmp_path, "drive"))
    assert code == 0
    out = _json_out(capsys)
    assert out["result"] == "COMPLETE"
    assert out["behavior"]["action"] == "navigate"
    assert out["detectors"] == ["door"]
    assert out["avg_period"] == pytest.approx(0.092)


def test_run_exhaustive_sees_clutter(trees, model_dir, tmp_path, capsys):
    code = main(_run_args(trees, model_dir, tmp_path, "drive", "--exhaustive"))
    assert code == 0
    out = _json_out(capsys)
    assert out["avg_period"] == pytest.approx(2.060)
    assert out["result"] == "COMPLETE"
    world = json.loads((tmp_path / "out" / "world.json").read_text())
    labels = {o["label"] for o in world["objects"]}
    assert labels - {"door", "door_handle"}


def test_run_dropped_constituent_fails_execution(trees, model_dir, tmp_path,
                                                 capsys):
    code = main(_run_args(trees, model_dir, tmp_path, "open",
                          "--drop-detector", "door_handle"))
    assert code == 4
    out = _json_out(capsys)
    assert out["result"] == "FAILURE"
    trace = json.loads((tmp_path / "out" / "trace.json").read_text())
    assert [s for s, _ in trace["trace"]][-2:] == ["DETECTING", "FAILURE"]


def test_run_dropping_everything_fails_perception(trees, model_dir, tmp_path,
                                                  capsys):
    code = main(_run_args(trees, model_dir, tmp_path, "open",
                          "--drop-detector", "door",
                          "--drop-detector", "door_handle"))
    assert code == 3
    capsys.readouterr()


def test_run_word_outside_lexicon(tmp_path, model_dir, capsys):
    tree = tmp_path / "tree.txt"
    tree.write_text("(VP (VB burn) (NP (DT the) (NN door)))\n")
    code = main(["run", "--tree", str(tree),
                 "--perception-model", str(model_dir / "perception.json"),
                 "--behavior-model", str(model_dir / "behavior.json")])
    assert code == 1
    assert "lexicon" in capsys.readouterr().err


def test_run_without_models(trees, capsys):
    code = main(["run", "--tree", trees["open"]])
    assert code == 1
    assert "error [io]" in capsys.readouterr().err


def test_run_config_overlay(trees, model_dir, tmp_path, capsys):
    cfg = {
        "perception_model": str(model_dir / "perception.json"),
        "behavior_model": str(model_dir / "behavior.json"),
        "out_dir": str(tmp_path / "cfg_out"),
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    code = main(["run", "--tree", trees["open"], "--config", str(cfg_path),
                 "--json"])
    assert code == 0
    out = _json_out(capsys)
    assert out["result"] == "COMPLETE"
    assert (tmp_path / "cfg_out" / "trace.json").is_file()


def test_run_config_relative_paths_and_flag_priority(trees, model_dir, tmp_path,
                                                     capsys):
    # config paths resolve against the config file directory
    (tmp_path / "models").mkdir()
    for name in ("perception.json", "behavior.json"):
        (tmp_path / "models" / name).write_bytes(
            (model_dir / name).read_bytes())
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({
        "perception_model": "models/perception.json",
        "behavior_model": "models/behavior.json",
        "out_dir": "from_config",
    }))
    code = main(["run", "--tree", trees["open"], "--config", str(cfg_path),
                 "--out-dir", str(tmp_path / "flag_out"), "--json"])
    assert code == 0
    capsys.readouterr()
    # the explicit flag beat the config value
    assert (tmp_path / "flag_out" / "trace.json").is_file()
    assert not (cfg_path.parent / "from_config").exists()


# -- bench -------------------------------------------------------------------

def test_bench_default_rows(model_dir, tmp_path, capsys):
    out_file = tmp_path / "bench.json"
    code = main(["bench",
                 "--perception-model", str(model_dir / "perception.json"),
                 "--out", str(out_file), "--json"])
    assert code == 0
    payload = _json_out(capsys)
    rows = payload["rows"]
    assert [(r["instruction"], r["mode"]) for r in rows] == [
        ("drive to the door", "exhaustive"),
        ("drive to the door", "adaptive"),
        ("open the door", "adaptive"),
    ]
    periods = [r["avg_period"] for r in rows]
    assert periods[0] == pytest.approx(2.060)
    assert periods[1] == pytest.approx(0.092)
    assert periods[2] == pytest.approx(0.158)
    assert json.loads(out_file.read_text()) == payload


def test_bench_output_is_byte_identical(model_dir, capsys):
    argv = ["bench", "--perception-model", str(model_dir / "perception.json"),
            "--json"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert first == second
    assert first  # non-empty


def test_bench_custom_case(trees, model_dir, capsys):
    code = main(["bench", "--perception-model", str(model_dir / "perception.json"),
                 "--case", f"{trees['turn']}=adaptive", "--json"])
    assert code == 0
    rows = _json_out(capsys)["rows"]
    assert len(rows) == 1
    assert rows[0]["instruction"] == "turn the handle of the door"
    assert rows[0]["active_detectors"] == ["door", "door_handle"]


def test_bench_bad_case_mode(trees, model_dir, capsys):
    code = main(["bench", "--perception-model", str(model_dir / "perception.json"),
                 "--case", f"{trees['drive']}=sometimes"])
    assert code == 1
    capsys.readouterr()


def test_bench_table_output(model_dir, capsys):
    code = main(["bench", "--perception-model", str(model_dir / "perception.json")])
    assert code == 0
    out = capsys.readouterr().out
    assert "instruction" in out
    assert "2.060" in out
    assert "0.158" in out
