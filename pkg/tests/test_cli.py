import json
import os

import numpy as np
import pytest

from affcut.cli import main

SMALL_SPEC = {
    "shape": [128, 128],
    "instance_range": [2, 4],
    "occluder_probability": 1.0,
    "seed": 0,
}


def write_spec(tmp_path, **overrides):
    spec = dict(SMALL_SPEC)
    spec.update(overrides)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    return path


def test_end_to_end_synth_partition_eval(tmp_path):
    spec = write_spec(tmp_path)
    gt_dir = tmp_path / "gt"
    assert main(["synth", "--spec", str(spec), "-o", str(gt_dir)]) == 0
    assert (gt_dir / "manifest.json").is_file()
    assert (gt_dir / "gt.json").is_file()

    pred_dir = tmp_path / "pred"
    assert main(["partition", str(gt_dir), "-o", str(pred_dir)]) == 0
    assert (pred_dir / "segments.json").is_file()
    assert (pred_dir / "labels.pgm").is_file()

    report = tmp_path / "report.json"
    assert main(["eval", "--pred", str(pred_dir), "--gt", str(gt_dir),
                 "-o", str(report)]) == 0
    payload = json.loads(report.read_text())
    assert payload["mean_ap"] == 1.0
    assert payload["n_scenes"] == 1


def test_partition_is_byte_deterministic(tmp_path):
    spec = write_spec(tmp_path, seed=3)
    gt_dir = tmp_path / "gt"
    main(["synth", "--spec", str(spec), "-o", str(gt_dir)])
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    main(["partition", str(gt_dir), "--seed", "5", "-o", str(out_a)])
    main(["partition", str(gt_dir), "--seed", "5", "-o", str(out_b)])
    assert (out_a / "segments.json").read_bytes() == (out_b / "segments.json").read_bytes()
    assert (out_a / "labels.pgm").read_bytes() == (out_b / "labels.pgm").read_bytes()


def test_no_pa_gaec_flag_changes_occluded_output(tmp_path):
    spec = write_spec(tmp_path, seed=1, instance_range=[1, 1])
    gt_dir = tmp_path / "gt"
    main(["synth", "--spec", str(spec), "-o", str(gt_dir)])
    merged = tmp_path / "merged"
    split = tmp_path / "split"
    main(["partition", str(gt_dir), "-o", str(merged)])
    main(["partition", str(gt_dir), "--no-pa-gaec", "-o", str(split)])
    n_merged = len(json.loads((merged / "segments.json").read_text())["instances"])
    n_split = len(json.loads((split / "segments.json").read_text())["instances"])
    assert n_merged == 1
    assert n_split > n_merged


def test_gas_flag_runs(tmp_path):
    spec = write_spec(tmp_path, seed=2)
    gt_dir = tmp_path / "gt"
    main(["synth", "--spec", str(spec), "-o", str(gt_dir)])
    out = tmp_path / "out"
    assert main(["partition", str(gt_dir), "--gas", "-o", str(out)]) == 0
    assert json.loads((out / "segments.json").read_text())["config"]["gas"] is True


def test_synth_multi_scene_and_eval_pooling(tmp_path, monkeypatch):
    spec = write_spec(tmp_path)
    gt_root = tmp_path / "scenes"
    assert main(["synth", "--spec", str(spec), "--count", "2", "-o", str(gt_root)]) == 0
    pred_root = tmp_path / "preds"
    for name in ("scene_000", "scene_001"):
        main(["partition", str(gt_root / name), "-o", str(pred_root / name)])
    monkeypatch.setenv("AFFCUT_THREADS", "2")
    report = tmp_path / "report.json"
    assert main(["eval", "--pred", str(pred_root), "--gt", str(gt_root),
                 "-o", str(report)]) == 0
    payload = json.loads(report.read_text())
    assert payload["n_scenes"] == 2 and payload["mean_ap"] == 1.0


def test_bench_emits_csv(tmp_path):
    out = tmp_path / "timings.csv"
    report = tmp_path / "bench.json"
    code = main(["bench", "--sizes", "16x16,32x32", "--repeats", "2",
                 "-o", str(out), "--report", str(report)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "pixels,seconds_median,seconds_p95"
    assert len(lines) == 3
    assert int(lines[1].split(",")[0]) == 256
    payload = json.loads(report.read_text())
    assert "slope" in payload and len(payload["rows"]) == 2


def test_oracle_subcommand(tmp_path, capsys):
    edges = tmp_path / "graph.txt"
    edges.write_text("0 1 -1.0\n1 2 0.6\n0 2 0.6\n")
    assert main(["oracle", str(edges)]) == 0
    out = capsys.readouterr().out
    assert "optimal cost" in out
    assert "block" in out

    big = tmp_path / "big.txt"
    big.write_text("\n".join(f"{i} {i+1} 1.0" for i in range(13)))
    assert main(["oracle", str(big)]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_flag_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["partition", "somewhere", "--frobnicate", "-o", "out"])
    assert exc.value.code == 2


def test_missing_container_reports_error(tmp_path, capsys):
    assert main(["partition", str(tmp_path / "nope"), "-o", str(tmp_path / "out")]) == 1
    assert "error" in capsys.readouterr().err


def test_api_phi(tmp_path, monkeypatch, capsys):
    import io
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(
        {"x_a": [0.0, 0.0], "x_b": [1.0, 0.0]})))
    assert main(["api", "phi"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["value"] == pytest.approx(0.5)


def test_api_grouping_and_semantic(tmp_path, monkeypatch, capsys):
    import io
    labels = [[1, 1], [0, 2]]
    scene = {"labels": labels, "class_of_id": [0, 1, 1], "classes": 2}
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(
        {**scene, "embedding": [[[0.0, 0.0], [0.0, 1.0]]]})))
    assert main(["api", "grouping_losses"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n_instances"] == 2
    assert payload["push"] == pytest.approx(-np.log(0.5))

    onehot = np.zeros((2, 2, 2))
    cls = np.array([[1, 1], [0, 1]])
    for y in range(2):
        for x in range(2):
            onehot[cls[y, x], y, x] = 1.0
    aff = np.zeros((4, 2, 2))
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(
        {**scene, "semantic": onehot.tolist(), "affinity": aff.tolist()})))
    assert main(["api", "semantic_affinity_losses"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) >= {"semantic", "boundary", "solid"}
