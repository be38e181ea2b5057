import json
import subprocess
import sys

import pytest

from topolink.cli import main


@pytest.fixture
def workspace(tmp_path):
    assert main(["synth", "--nodes", "400", "--steps", "5000", "--seed", "3",
                 "--output", str(tmp_path / "edges.csv")]) == 0
    years = {"y1": 3000, "y2": 3500, "y3": 4000, "y4": 5000}
    window = {"name": "w", "feature_years": ["y1", "y2", "y3"], "label_year": "y4"}
    cfg = {
        "edges": "edges.csv", "years": years, "train_window": window,
        "sampling": {"min_degree": 3}, "model": {"forest": {"n_estimators": 20}},
        "drift": {"train_windows": [window], "eval_windows": [window]},
        "seed": 0, "output_dir": "run",
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    return tmp_path


def test_ingest_and_stats(workspace, capsys):
    assert main(["ingest", str(workspace / "edges.csv"), "--output-dir", str(workspace / "ing")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["raw_records"] == 5000
    assert (workspace / "ing" / "edges.lfel").exists()
    # the binary copy is autodetected
    assert main(["ingest", str(workspace / "ing" / "edges.lfel")]) == 0
    assert json.loads(capsys.readouterr().out) == summary
    assert main(["snapshot-stats", str(workspace / "edges.csv"), "--cutoff", "100", "--cutoff", "5000"]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert len(stats) == 2


def test_stage_commands_and_run(workspace, capsys):
    cfg = str(workspace / "cfg.json")
    for stage in ("sample", "extract", "reduce", "train", "evaluate"):
        assert main([stage, "--config", cfg]) == 0
    capsys.readouterr()
    assert main(["run", "--config", cfg]) == 0
    manifest = json.loads(capsys.readouterr().out)
    assert set(manifest["reused_stages"]) == {"ingest", "sample", "extract", "reduce", "train", "evaluate"}
    assert "holdout_auc" in manifest["metrics"]


def test_overrides(workspace):
    out = workspace / "alt"
    assert main(["sample", "--config", str(workspace / "cfg.json"), "--seed", "9", "--threads", "2",
                 "--output-dir", str(out), "--format", "csv"]) == 0
    assert (out / "samples.csv").exists()


def test_drift_and_score(workspace, capsys):
    cfg = str(workspace / "cfg.json")
    assert main(["drift", "--config", cfg]) == 0
    assert "0." in capsys.readouterr().out
    assert (workspace / "run" / "drift.csv").exists()
    assert main(["run", "--config", cfg]) == 0
    out = workspace / "scores.csv"
    assert main(["score", "--model", str(workspace / "run" / "model.lfrf"), "--edges", str(workspace / "edges.csv"),
                 "--cutoffs", "3500,4000,4500", "--min-degree", "6", "--output", str(out)]) == 0
    assert out.read_text().startswith("u,v,score\n")
    assert main(["score", "--config", cfg, "--model", str(workspace / "run" / "model.lfrf"),
                 "--output", str(out)]) == 0


def test_validation_exit_codes(workspace, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1,2\nnot,a,row\n")
    assert main(["ingest", str(bad)]) == 2
    assert main(["ingest", str(tmp_path / "missing.csv")]) == 2
    assert main(["run"]) == 2
    cfg = json.loads((workspace / "cfg.json").read_text())
    cfg["train_window"]["label_year"] = "nope"
    (tmp_path / "c2.json").write_text(json.dumps(cfg))
    assert main(["run", "--config", str(tmp_path / "c2.json")]) == 2
    del cfg["drift"]
    cfg["train_window"]["label_year"] = "y4"
    (tmp_path / "c3.json").write_text(json.dumps(cfg))
    assert main(["drift", "--config", str(tmp_path / "c3.json")]) == 2


def test_runtime_exit_code(workspace, tmp_path):
    junk = tmp_path / "model.lfrf"
    junk.write_bytes(b"not a model")
    assert main(["score", "--model", str(junk), "--edges", str(workspace / "edges.csv"),
                 "--cutoffs", "1,2,3", "--output", str(tmp_path / "s.csv")]) == 3


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "e.csv"
    proc = subprocess.run([sys.executable, "-m", "topolink.cli", "synth", "--nodes", "20", "--steps", "30",
                           "--output", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["raw_records"] == 30
    proc = subprocess.run([sys.executable, "-m", "topolink.cli", "ingest", str(tmp_path / "nope.csv")],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "error" in proc.stderr
