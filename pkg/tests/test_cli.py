import json
import os
import subprocess
import sys

import numpy as np
import pytest

from adaptflow.cli import EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main
from adaptflow.gradcheck import CASES, CORRUPT_ENV
from adaptflow.io import read_checkpoint, read_dump, write_dump
from adaptflow.validators import BNMValidator


def write_config(tmp_path, name="c", **kw):
    cfg = {"algorithm": "dann", "seed": 0, "max_epochs": 2, "dataset": {"n_per_class": 15, "batch_size": 16}, **kw}
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    return path


def run(tmp_path, out="run", **kw):
    cfg = write_config(tmp_path, **kw)
    code = main(["run", str(cfg), "--out", str(tmp_path / out)])
    return code, tmp_path / out


class TestRun:
    def test_outputs(self, tmp_path, capsys):
        code, out = run(tmp_path, max_epochs=1)
        assert code == EXIT_OK
        assert {p.name for p in out.iterdir()} == {
            "config.json", "metrics.jsonl", "best_checkpoint.txt", "best_dump.json", "summary.json",
        }
        summary = json.loads((out / "summary.json").read_text())
        assert summary["best_epoch"] == 1
        assert {"best_score", "best_epoch", "oracle_target_accuracy"} <= set(summary)
        assert summary["first_step_forward_counts"] == {"C": 1, "D": 2, "G": 2}
        _, epoch, score = read_checkpoint(out / "best_checkpoint.txt")
        assert (epoch, score) == (1, summary["best_score"])
        assert "run directory" in capsys.readouterr().out

    def test_metrics_records(self, tmp_path):
        _, out = run(tmp_path, max_epochs=3, val_interval=2)
        records = [json.loads(line) for line in (out / "metrics.jsonl").read_text().splitlines()]
        assert [r["epoch"] for r in records] == [1, 2, 3]
        assert [r["score"] is None for r in records] == [True, False, True]
        assert all(list(r) == ["epoch", "losses", "score", "lr"] for r in records)
        assert set(records[0]["losses"]) == {"c_loss", "src_domain_loss", "target_domain_loss", "total_loss"}

    def test_post_hook_columns(self, tmp_path):
        _, out = run(tmp_path, algorithm="classifier", post_hooks=["bsp", "bnm"], max_epochs=1)
        record = json.loads((out / "metrics.jsonl").read_text().splitlines()[0])
        assert {"BSPLoss", "BNMLoss"} <= set(record["losses"])

    def test_deterministic_and_config_copy_reruns(self, tmp_path):
        _, a = run(tmp_path, out="a", algorithm="mcd", hyperparams={"mcd_repeat": 2})
        _, b = run(tmp_path, out="b", algorithm="mcd", hyperparams={"mcd_repeat": 2})
        assert (a / "metrics.jsonl").read_bytes() == (b / "metrics.jsonl").read_bytes()
        assert main(["run", str(a / "config.json"), "--out", str(tmp_path / "c")]) == EXIT_OK
        assert (a / "metrics.jsonl").read_bytes() == (tmp_path / "c" / "metrics.jsonl").read_bytes()

    def test_default_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(tmp_path, name="tiny", max_epochs=1)
        assert main(["run", str(cfg)]) == EXIT_OK
        assert (tmp_path / "runs" / "tiny" / "summary.json").exists()

    def test_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, optimizer={"name": "sgd", "lr": -1})
        assert main(["run", str(cfg), "--out", str(tmp_path / "x")]) == EXIT_INPUT
        assert "optimizer.lr" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.json")]) == EXIT_INPUT

    def test_numeric_abort(self, tmp_path, capsys):
        code, _ = run(tmp_path, algorithm="classifier", optimizer={"name": "sgd", "lr": 1e300})
        assert code == EXIT_NUMERIC
        assert "non-finite" in capsys.readouterr().err


class TestPlan:
    def test_text(self, tmp_path, capsys):
        assert main(["plan", str(write_config(tmp_path))]) == EXIT_OK
        out = capsys.readouterr().out
        assert "D: 2" in out and "target_imgs_features_dlogits" in out

    def test_json(self, tmp_path, capsys):
        cfg = write_config(tmp_path, algorithm="classifier")
        assert main(["plan", str(cfg), "--json"]) == EXIT_OK
        plan = json.loads(capsys.readouterr().out)
        assert plan["forward_counts"] == {"C": 1, "G": 1}
        assert not any(s["key"].startswith("target_") for s in plan["steps"])

    def test_bad_config(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert main(["plan", str(path)]) == EXIT_INPUT


class TestValidate:
    def test_matches_logged_score(self, tmp_path, capsys):
        _, out = run(tmp_path, max_epochs=2)
        capsys.readouterr()
        assert main(["validate", str(out / "best_dump.json"), "--validator", "bnm"]) == EXIT_OK
        score = float(capsys.readouterr().out)
        summary = json.loads((out / "summary.json").read_text())
        assert abs(score - summary["best_score"]) <= 1e-12
        assert score == BNMValidator()(**read_dump(out / "best_dump.json"))

    def test_accuracy(self, tmp_path, capsys):
        path = tmp_path / "d.json"
        write_dump(path, {"target_val": {"logits": np.array([[1.0, 0.0], [0.0, 1.0]]), "labels": np.array([0, 0])}})
        assert main(["validate", str(path), "--validator", "accuracy"]) == EXIT_OK
        assert float(capsys.readouterr().out) == 0.5

    def test_missing_logits(self, tmp_path, capsys):
        path = tmp_path / "d.json"
        write_dump(path, {"target_train": {"features": np.zeros((2, 2))}})
        assert main(["validate", str(path), "--validator", "bnm"]) == EXIT_INPUT
        assert "target_train.logits" in capsys.readouterr().err

    @pytest.mark.parametrize("text", ["{", '{"format": "x"}'])
    def test_malformed(self, tmp_path, text):
        path = tmp_path / "d.json"
        path.write_text(text)
        assert main(["validate", str(path), "--validator", "bnm"]) == EXIT_INPUT

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.json"), "--validator", "bnm"]) == EXIT_INPUT

    def test_unknown_validator(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            main(["validate", "x.json", "--validator", "entropy"])
        assert e.value.code == 2


class TestGradcheck:
    def test_passes_and_lists_every_case(self, capsys):
        assert main(["gradcheck", "--seed", "0"]) == EXIT_OK
        out = capsys.readouterr().out
        for name in CASES:
            assert name in out

    def test_corrupted_gradient_fails(self):
        proc = subprocess.run(
            [sys.executable, "-m", "adaptflow", "gradcheck"],
            env={**os.environ, CORRUPT_ENV: "bnm"},
            capture_output=True, text=True,
        )
        assert proc.returncode == EXIT_CHECK_FAILED
        assert "gradient check failed" in proc.stdout and "bnm" in proc.stdout.splitlines()[-1]
