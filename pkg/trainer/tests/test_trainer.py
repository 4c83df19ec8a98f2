"""Fixture trainer: spec validation, seeded reproducibility, and the full
round trip into the consumer toolchain (load, forward-evaluate, tighten)."""

import json
import subprocess
import sys

import numpy as np
import pytest

from fixture_trainer import DatasetUnavailableError, TrainSpec, train_and_export


def quick_spec(tmp_path, **kw):
    defaults = dict(
        hidden=(5, 5, 5, 5, 5),
        activation="sigmoid",
        epochs=40,
        seed=0,
        out=str(tmp_path / "model.nn.json"),
        synthetic=True,
        input_dim=6,
        n_classes=3,
        samples=600,
    )
    defaults.update(kw)
    return TrainSpec(**defaults)


def test_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        quick_spec(tmp_path, hidden=())
    with pytest.raises(ValueError):
        quick_spec(tmp_path, hidden=(5, 0))
    with pytest.raises(ValueError):
        quick_spec(tmp_path, activation="maxout")
    with pytest.raises(ValueError):
        quick_spec(tmp_path, l2=-1.0)


def test_requires_synthetic_without_dataset(tmp_path, monkeypatch):
    import fixture_trainer.train as tr

    monkeypatch.setattr(tr, "MNIST_PATHS", ("/definitely/not/here.npz",))
    with pytest.raises(DatasetUnavailableError):
        train_and_export(quick_spec(tmp_path, synthetic=False))


def test_same_seed_identical_export(tmp_path):
    a, _ = train_and_export(quick_spec(tmp_path, out=str(tmp_path / "a.nn.json")))
    b, _ = train_and_export(quick_spec(tmp_path, out=str(tmp_path / "b.nn.json")))
    assert open(a).read() == open(b).read()
    c, _ = train_and_export(
        quick_spec(tmp_path, out=str(tmp_path / "c.nn.json"), seed=1)
    )
    assert open(a).read() != open(c).read()


def test_export_schema_and_sidecar(tmp_path):
    path, meta = train_and_export(quick_spec(tmp_path, activation="selu"))
    doc = json.load(open(path))
    assert doc["input_dim"] == 6
    assert len(doc["layers"]) == 6  # 5 hidden + logits
    assert doc["layers"][-1]["activation"] is None
    assert all(layer["activation"]["tag"] == "selu" for layer in doc["layers"][:-1])
    W0 = np.asarray(doc["layers"][0]["W"])
    assert W0.shape == (5, 6)  # rows map the previous layer onto this one
    side = json.load(open(str(tmp_path / "model.meta.json")))
    assert side["dataset"] == "synthetic"
    assert 0.0 <= side["test_accuracy"] <= 1.0
    assert meta["test_accuracy"] == side["test_accuracy"]


def test_blobs_are_learnable(tmp_path):
    _, meta = train_and_export(quick_spec(tmp_path, epochs=150, activation="elu"))
    assert meta["test_accuracy"] >= 0.8


def test_cli_entry(tmp_path):
    out = tmp_path / "cli.nn.json"
    res = subprocess.run(
        [sys.executable, "-m", "fixture_trainer.train", "--synthetic", "--epochs", "20",
         "--hidden", "5,5", "--input-dim", "4", "--samples", "300", "--seed", "2",
         "--out", str(out)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    assert out.exists()
    assert "test accuracy" in res.stdout


def test_round_trip_into_consumer(tmp_path):
    """Acceptance: the export loads in the consuming toolchain, forward
    evaluates, and completes a tighten_all run end-to-end."""
    stfehull = pytest.importorskip("stfehull")
    from stfehull import forward, interval_propagate, load_json, tighten_all

    path, _ = train_and_export(
        quick_spec(tmp_path, activation="sigmoid", epochs=60, hidden=(5, 5, 5))
    )
    net = load_json(path)
    state = forward(net, np.full(net.input_dim, 0.5))
    assert state.output.shape == (3,)
    bounds = interval_propagate(net)
    assert all(np.all(b[:, 0] <= b[:, 1]) for b in bounds.pre)
    report = tighten_all(net, mode="env")
    assert len(report.rows) == 2 * (5 + 5 + 5)
    deep = [r for r in report.rows if r.layer >= 2]
    assert deep and all(r.tightened is not None for r in deep)
    assert any(r.improvement > 0 for r in deep)
