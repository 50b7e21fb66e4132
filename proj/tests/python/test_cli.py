# Copyright 2026 The SiA Authors
# SPDX-License-Identifier: Apache-2.0

import json
import subprocess

import sia


def run(cli, *args):
    return subprocess.run([cli, *map(str, args)], capture_output=True, text=True)


def test_usage_errors(cli, tmp_path):
    assert run(cli).returncode == 2
    assert run(cli, "train").returncode == 2
    assert run(cli, "split", "--manifest", tmp_path / "missing.json", "--ratio", 0.5, "--seed", 1).returncode == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1, "optim": {"learning_rat": 1}}')
    result = run(cli, "train", "--config", bad)
    assert result.returncode == 2
    assert "learning_rat" in result.stderr


def test_pipeline(cli, tmp_path):
    data = tmp_path / "data"
    assert run(cli, "synth", "--seed", 4, "--out", data, "--clips", 6, "--global-fraction", 0.5).returncode == 0
    config = json.loads((data / "train.json").read_text())
    config["optim"]["steps"] = 3
    config["optim"]["batch_size"] = 2
    (data / "train.json").write_text(json.dumps(config))
    result = run(cli, "train", "--config", data / "train.json")
    assert result.returncode == 0, result.stderr
    ckpt = data / "run" / "model.ckpt"
    assert ckpt.exists()
    lines = (data / "run" / "metrics.jsonl").read_text().splitlines()
    assert len(lines) == 3
    assert json.loads(lines[-1])["step"] == 2
    assert sia.load_model(str(ckpt)).config["n_det_tokens"] == 100

    report = tmp_path / "report.json"
    dets = tmp_path / "dets.csv"
    result = run(cli, "eval", "--checkpoint", ckpt, "--manifest", data / "manifest.json",
                 "--bank", data / "bank.json", "--out", report, "--detections", dets, "--stride", 1)
    assert result.returncode == 0, result.stderr
    assert "map" in json.loads(report.read_text())

    nws = tmp_path / "nws.json"
    assert run(cli, "nws", "--manifest", data / "manifest.json", "--out", nws).returncode == 0
    assert json.loads(nws.read_text())["provenance"]["mode"] == "NWS"

    aws_a, aws_b = tmp_path / "aws_a.json", tmp_path / "aws_b.json"
    for out in (aws_a, aws_b):
        result = run(cli, "aws", "--manifest", data / "manifest.json", "--checkpoint", ckpt,
                     "--bank", data / "bank.json", "--out", out, "--stride", 1)
        assert result.returncode == 0, result.stderr
    assert aws_a.read_bytes() == aws_b.read_bytes()

    result = run(cli, "split", "--manifest", data / "manifest.json", "--ratio", 0.75, "--seed", 2,
                 "--out-dir", tmp_path / "split")
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "split" / "manifest.base.json").exists()

    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"version": 1, "frames": 4, "stride": 1, "datasets": [
        {"name": "toy", "manifest": str(data / "manifest.json"), "bank": str(data / "bank.json")}]}))
    out = tmp_path / "bench.json"
    result = run(cli, "benchmark", "--checkpoint", ckpt, "--suite", suite, "--out", out)
    assert result.returncode == 0, result.stderr
    assert "toy" in json.loads(out.read_text())["f_map"]

    result = run(cli, "aws", "--manifest", data / "manifest.json", "--checkpoint", tmp_path / "none.ckpt",
                 "--out", tmp_path / "x.json")
    assert result.returncode != 0


def test_train_binding(tmp_path):
    ds_dir = tmp_path / "d"
    config = {
        "version": 1,
        "data": {"synthetic": {"seed": 1, "clips": 4}, "frames": 4, "stride": 1},
        "optim": {"steps": 2, "batch_size": 2},
        "output_dir": str(ds_dir),
    }
    path = tmp_path / "train.json"
    path.write_text(json.dumps(config))
    sia.train(str(path))
    assert (ds_dir / "model.ckpt").exists()
