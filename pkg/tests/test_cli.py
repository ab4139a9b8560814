import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from selfonn.cli import main
from selfonn.data import write_recording_f32le

TINY_MODEL = ["--neurons", "2,2", "--kernels", "9,9", "--strides", "8,8",
              "--dense-width", "4", "--q", "2"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One tiny corpus + checkpoint shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    rc = main(["synth", "--out", str(corpus), "--n-healthy", "3",
               "--n-faulty", "3", "--duration", "2", "--seed", "7"])
    assert rc == 0

    spec = root / "spec.json"
    spec.write_text(json.dumps(
        {"n_healthy": 3, "n_faulty": 3, "duration_s": 2.0}
    ))

    ckpt = root / "model.sonn"
    rc = main(["train", "--synth", str(spec), "--out", str(ckpt),
               *TINY_MODEL, "--epochs", "2", "--batch-size", "8",
               "--patience", "2", "--seed", "1"])
    assert rc == 0
    return {"root": root, "corpus": corpus, "spec": spec, "ckpt": ckpt}


class TestSynth:
    def test_writes_manifest_and_recordings(self, workdir):
        corpus = workdir["corpus"]
        assert (corpus / "manifest.csv").is_file()
        files = sorted(p.name for p in corpus.glob("*.f32le"))
        assert len(files) == 6
        assert files[0].startswith("faulty_") and files[-1].startswith("healthy_")

    def test_unknown_spec_key_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"n_recordings": 4}))
        assert main(["synth", "--out", str(tmp_path / "c"), "--spec", str(bad)]) == 2


class TestTrain:
    def test_report_embeds_resolved_config(self, workdir):
        report = json.loads((workdir["root"] / "model.sonn.report.json").read_text())
        assert report["config"]["seed"] == 1
        assert report["config"]["op_layers"] == [[2, 9, 8], [2, 9, 8]]
        assert report["config"]["q_order"] == 2
        assert report["data"]["source"].startswith("synth:")
        assert report["data"]["train_segments"] == 6
        assert report["train"]["epochs_run"] == 2
        assert report["train"]["checkpoint_path"].endswith("model.sonn")

    def test_config_file_feeds_training_and_flags_win(self, workdir, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"learning_rate": 0.001, "max_epochs": 2,
                                   "patience": 2, "batch_size": 8}))
        out = tmp_path / "m.sonn"
        rc = main(["train", "--synth", str(workdir["spec"]), "--config", str(cfg),
                   "--out", str(out), *TINY_MODEL, "--lr", "0.002", "--seed", "0"])
        assert rc == 0
        report = json.loads((tmp_path / "m.sonn.report.json").read_text())
        assert report["config"]["learning_rate"] == 0.002
        assert report["config"]["max_epochs"] == 2

    def test_unknown_config_key_is_config_error(self, workdir, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"learning_rat": 0.001}))
        rc = main(["train", "--synth", str(workdir["spec"]), "--config", str(cfg),
                   "--out", str(tmp_path / "m.sonn")])
        assert rc == 2

    def test_missing_manifest_is_data_error(self, tmp_path):
        rc = main(["train", "--manifest", str(tmp_path / "nope.csv"),
                   "--out", str(tmp_path / "m.sonn"), *TINY_MODEL])
        assert rc == 3


class TestEvaluate:
    def test_manifest_all_split_with_reports(self, workdir, tmp_path, capsys):
        json_path = tmp_path / "metrics.json"
        csv_path = tmp_path / "metrics.csv"
        rc = main(["evaluate", "--model", str(workdir["ckpt"]),
                   "--manifest", str(workdir["corpus"] / "manifest.csv"),
                   "--json", str(json_path), "--csv", str(csv_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "overall: 12 segments" in out
        assert "machine" in out and "acc%" in out

        payload = json.loads(json_path.read_text())
        assert payload["overall"]["segments"] == 12
        assert payload["config"]["q_order"] == 2
        assert payload["data_source"].endswith("manifest.csv")
        assert len(payload["groups"]) == 1        # all synth rows share sensor 1
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1 and rows[0]["segments"] == "12"

    def test_synth_held_out_split(self, workdir, capsys):
        rc = main(["evaluate", "--model", str(workdir["ckpt"]),
                   "--synth", str(workdir["spec"]), "--split", "test",
                   "--seed", "1"])
        assert rc == 0
        assert "overall: 6 segments" in capsys.readouterr().out

    def test_empty_split_is_data_error(self, workdir):
        # the synthetic corpus has no large defects, so its test side is empty
        rc = main(["evaluate", "--model", str(workdir["ckpt"]),
                   "--manifest", str(workdir["corpus"] / "manifest.csv"),
                   "--split", "test"])
        assert rc == 3

    def test_geometry_mismatch_is_config_error(self, workdir):
        rc = main(["evaluate", "--model", str(workdir["ckpt"]),
                   "--synth", str(workdir["spec"]), "--q", "3"])
        assert rc == 2


class TestInfer:
    def test_labels_every_window(self, workdir, capsys):
        rc = main(["infer", "--model", str(workdir["ckpt"]),
                   "--recording", str(workdir["corpus"] / "faulty_000.f32le")])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2      # 2 s recording, 1 s windows
        for i, line in enumerate(lines):
            index, out0, out1, label = line.split("\t")
            assert int(index) == i
            float(out0), float(out1)
            assert label in ("healthy", "faulty")

    def test_deterministic_output(self, workdir, capsys):
        argv = ["infer", "--model", str(workdir["ckpt"]),
                "--recording", str(workdir["corpus"] / "healthy_001.f32le")]
        assert main(argv) == 0
        first = capsys.readouterr().out
        assert main(argv) == 0
        assert capsys.readouterr().out == first

    def test_short_recording_is_data_error(self, workdir, tmp_path):
        short = tmp_path / "short.f32le"
        write_recording_f32le(np.zeros(100), short)
        rc = main(["infer", "--model", str(workdir["ckpt"]),
                   "--recording", str(short)])
        assert rc == 3


class TestBench:
    def test_fresh_init_bench_with_json(self, tmp_path, capsys):
        json_path = tmp_path / "bench.json"
        rc = main(["bench", *TINY_MODEL, "--n", "3", "--json", str(json_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "real-time factor" in out and "single thread" in out
        payload = json.loads(json_path.read_text())
        assert payload["bench"]["n_timings"] == 3
        assert payload["bench"]["mean_ms"] > 0

    def test_bench_loads_checkpoints(self, workdir, capsys):
        rc = main(["bench", "--model", str(workdir["ckpt"]), "--n", "2"])
        assert rc == 0
        assert "parameters" in capsys.readouterr().out


class TestInspect:
    def test_prints_geometry_and_checksum(self, workdir, capsys):
        rc = main(["inspect", str(workdir["ckpt"])])
        assert rc == 0
        out = capsys.readouterr().out
        assert "q order: 2" in out
        assert "operational layer 0: 2 neurons, kernel 9, stride 8" in out
        assert "crc32: " in out

    def test_corrupted_checkpoint_is_config_error(self, workdir, tmp_path):
        broken = tmp_path / "broken.sonn"
        shutil.copy(workdir["ckpt"], broken)
        raw = bytearray(broken.read_bytes())
        raw[40] ^= 0xFF
        broken.write_bytes(raw)
        assert main(["inspect", str(broken)]) == 2

    def test_missing_checkpoint_is_data_error(self, tmp_path):
        # missing files map to the data exit code no matter their role
        assert main(["inspect", str(tmp_path / "gone.sonn")]) == 3


class TestEntryPoint:
    def test_module_help_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "selfonn.cli", "--help"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0
        for command in ("train", "evaluate", "infer", "synth", "bench", "inspect"):
            assert command in proc.stdout
