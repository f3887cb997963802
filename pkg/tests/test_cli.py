"""In-process tests of the command-line verbs.

Each test drives :func:`triloop.cli.main` directly with an argv list and
asserts on the exit-status contract (0 success / 1 domain error / 2 usage
error) and on the artifacts the verbs leave behind.  Heavy verbs run on a
small shared dataset with tiny training budgets; the full-scale paths are
exercised by the acceptance suite.
"""

from __future__ import annotations

import json
import os

import numpy as np
import pytest

from triloop import gru, pipeline
from triloop.channels import CSV_HEADER, read_dataset, read_dataset_matrix
from triloop.cli import main


# ---------------------------------------------------------------------------
# shared artifacts (built once; every consumer treats them as read-only)


@pytest.fixture(scope="session")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="session")
def dataset_csv(workdir):
    """A 420-row demand-following dataset (smallest split-friendly size)."""
    path = workdir / "data420.csv"
    assert main(["gen-dataset", "--steps", "420", "--seed", "3",
                 "--out", str(path)]) == 0
    return str(path)


@pytest.fixture(scope="session")
def model_ckpt(workdir, dataset_csv):
    """A deliberately under-trained checkpoint for wiring tests."""
    path = workdir / "tiny.json"
    assert main(["train", "--data", dataset_csv, "--out", str(path),
                 "--hidden", "128", "--layers", "1", "--max-epochs", "2",
                 "--seed", "0"]) == 0
    return str(path)


# ---------------------------------------------------------------------------
# exit-status contract


@pytest.mark.parametrize("argv", [
    [],
    ["no-such-verb"],
    ["train"],                                      # missing --data
    ["train", "--data", "x.csv", "--hidden", "64"],  # width not in the grid
    ["train", "--data", "x.csv", "--layers", "4"],
    ["serve", "--plant", "--twin"],                 # mutually exclusive
    ["evaluate", "--model", "m.json"],               # missing --data
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    capsys.readouterr()


def test_serve_twin_requires_model(capsys):
    assert main(["serve", "--twin", "--run-seconds", "0.1"]) == 2
    assert "--twin requires --model" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["gen-dataset", "--steps", "10", "--out", "short.csv"],  # scenario too short
    ["train", "--data", "/nonexistent/data.csv"],
    ["evaluate", "--model", "/nonexistent/m.json", "--data", "/nonexistent/d.csv"],
    ["simulate", "--scenario", "/nonexistent/scenario.toml"],
])
def test_domain_errors_exit_1(argv, tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1
    assert capsys.readouterr().err.startswith("error: ")


# ---------------------------------------------------------------------------
# simulate / gen-dataset


def test_simulate_idle_row_count(tmp_path, capsys):
    out = tmp_path / "idle.csv"
    assert main(["simulate", "--scenario", "idle", "--out", str(out),
                 "--no-noise"]) == 0
    frames = read_dataset(out)
    assert len(frames) == 61          # 60 s idle scenario inclusive of t=0
    assert frames[0].t == 0.0
    assert "61 frames" in capsys.readouterr().out


def test_gen_dataset_row_count_and_header(dataset_csv):
    with open(dataset_csv, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 421


def test_gen_dataset_seed_reproducible(tmp_path, dataset_csv, capsys):
    again = tmp_path / "again.csv"
    assert main(["gen-dataset", "--steps", "420", "--seed", "3",
                 "--out", str(again)]) == 0
    capsys.readouterr()
    with open(dataset_csv, "rb") as a, open(again, "rb") as b:
        assert a.read() == b.read()


def test_gen_dataset_seed_changes_noise(tmp_path, dataset_csv, capsys):
    other = tmp_path / "other.csv"
    assert main(["gen-dataset", "--steps", "420", "--seed", "4",
                 "--out", str(other)]) == 0
    capsys.readouterr()
    with open(dataset_csv, "rb") as a, open(other, "rb") as b:
        assert a.read() != b.read()


# ---------------------------------------------------------------------------
# train / evaluate


def test_train_writes_checkpoint_and_history(workdir, dataset_csv, capsys):
    out = workdir / "hist.json"
    hist = workdir / "history.csv"
    assert main(["train", "--data", dataset_csv, "--out", str(out),
                 "--history", str(hist), "--hidden", "128", "--layers", "1",
                 "--max-epochs", "2", "--seed", "1"]) == 0
    text = capsys.readouterr().out
    assert "train: 2 epochs" in text
    assert "test temperature:" in text
    model = gru.load_checkpoint(out)
    assert model.d_h == 128 and len(model.layers) == 1
    with open(hist, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("epoch,") and len(lines) == 3


def test_evaluate_matches_train_split(model_ckpt, dataset_csv, tmp_path, capsys):
    doc_path = tmp_path / "metrics.json"
    assert main(["evaluate", "--model", model_ckpt, "--data", dataset_csv,
                 "--json", str(doc_path)]) == 0
    capsys.readouterr()
    doc = json.loads(doc_path.read_text())
    assert set(doc) == {"windows", "mae", "rmse"}
    assert set(doc["rmse"]) == set(pipeline.GroupMetrics.GROUPS)
    # Independent check of the window count: the held-out tail of a 420-row
    # trajectory is 84 rows, which fits 84 - (30 + 10) + 1 = 45 windows.
    assert doc["windows"] == 45
    assert all(np.isfinite(v) for v in doc["rmse"].values())


def test_evaluate_agrees_with_training_metrics(model_ckpt, dataset_csv, capsys):
    assert main(["evaluate", "--model", model_ckpt, "--data", dataset_csv]) == 0
    evaluate_out = capsys.readouterr().out
    model = gru.load_checkpoint(model_ckpt)
    splits = pipeline.prepare_dataset(read_dataset_matrix(dataset_csv))
    metrics = pipeline.evaluate(model, splits.X_test, splits.Y_test)
    for group in pipeline.GroupMetrics.GROUPS:
        assert f"{group}: mae {metrics.mae[group]:.4g}" in evaluate_out


# ---------------------------------------------------------------------------
# sweep (grid shrunk for speed; the full 12-cell grid runs in acceptance)


def _tiny_grid(monkeypatch):
    monkeypatch.setattr(pipeline, "sweep_grid",
                        lambda *a, **k: [(128, 1), (256, 1)])


def test_sweep_serial(monkeypatch, dataset_csv, tmp_path, capsys):
    _tiny_grid(monkeypatch)
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--data", dataset_csv, "--out", str(out),
                 "--max-epochs", "1", "--seed", "0"]) == 0
    text = capsys.readouterr().out
    assert "sweep: 2 cells" in text
    lines = out.read_text().splitlines()
    assert lines[0] == "hidden,layers,train_loss,valid_loss,param_count"
    assert len(lines) == 3


def test_sweep_parallel_matches_serial(monkeypatch, dataset_csv, tmp_path,
                                       capsys):
    _tiny_grid(monkeypatch)
    serial = tmp_path / "serial.csv"
    parallel = tmp_path / "parallel.csv"
    assert main(["sweep", "--data", dataset_csv, "--out", str(serial),
                 "--max-epochs", "1", "--seed", "0"]) == 0
    assert main(["sweep", "--data", dataset_csv, "--out", str(parallel),
                 "--max-epochs", "1", "--seed", "0", "--jobs", "2"]) == 0
    capsys.readouterr()
    assert serial.read_text() == parallel.read_text()


# ---------------------------------------------------------------------------
# twin


def test_twin_report(model_ckpt, dataset_csv, tmp_path, capsys):
    report = tmp_path / "twin.json"
    assert main(["twin", "--model", model_ckpt, "--data", dataset_csv,
                 "--demand", "1.5", "--max-steps", "40",
                 "--report", str(report)]) == 0
    assert "twin: demand 1.5 kW" in capsys.readouterr().out
    doc = json.loads(report.read_text())
    assert doc["demand_kw"] == 1.5
    assert doc["steps"] <= 40
    assert set(doc["final_values"])  # non-empty channel map
    assert doc["speedup"] > 1.0


def test_twin_rejects_short_data(model_ckpt, tmp_path, capsys):
    short = tmp_path / "short.csv"
    assert main(["simulate", "--scenario", "idle", "--out", str(short),
                 "--no-noise"]) == 0          # 61 rows > 30, so shrink it
    lines = short.read_text().splitlines()
    short.write_text("\n".join(lines[:11]) + "\n")
    assert main(["twin", "--model", model_ckpt, "--data", str(short)]) == 1
    assert "at least 30 rows" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# serve (short-lived) and assist


def test_serve_runs_and_logs(tmp_path, capsys):
    log = tmp_path / "frames.csv"
    assert main(["serve", "--port", "14852", "--run-seconds", "2.5",
                 "--log", str(log), "--no-noise"]) == 0
    assert "serve: plant mode" in capsys.readouterr().out
    rows = log.read_text().splitlines()
    assert rows[0] == CSV_HEADER
    assert len(rows) >= 2             # at least one 1 Hz frame logged


def test_assist_fallback_from_sim(tmp_path, capsys):
    doc_path = tmp_path / "assist.json"
    assert main(["assist", "--query", "Can we raise power to 1.89 kW?",
                 "--backend", "fallback", "--json", str(doc_path)]) == 0
    text = capsys.readouterr().out
    assert "Safe to proceed:" in text
    doc = json.loads(doc_path.read_text())
    assert doc["fallback"] is True
    assert doc["advisory"]["flags"]
    codes = {f["code"] for f in doc["advisory"]["flags"]}
    assert "rod-inserted-energized" in codes


def test_assist_from_dataset_tail(dataset_csv, capsys):
    assert main(["assist", "--query", "Summarise the facility state.",
                 "--backend", "fallback", "--data", dataset_csv]) == 0
    out = capsys.readouterr().out
    assert out.startswith("Advisory (rule-based fallback):")
    assert "Safe to proceed:" in out
