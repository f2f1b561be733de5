import json

import numpy as np
import pytest

from auxsysid.cli import main
from auxsysid.experiments import paper_models
from auxsysid.systems import SystemModel, load_model, save_model


@pytest.fixture
def rollout_files(tmp_path):
    t, a = tmp_path / "true.csv", tmp_path / "aux.csv"
    assert main(["simulate", "--count", "60", "--system", "true", "--out", str(t), "--seed", "1"]) == 0
    assert main(["simulate", "--count", "60", "--system", "aux", "--out", str(a), "--seed", "1"]) == 0
    return t, a


def test_simulate_from_model(tmp_path):
    model_path = tmp_path / "m.json"
    save_model(paper_models()[0], model_path)
    out = tmp_path / "r.csv"
    assert main(["simulate", "--model", str(model_path), "--count", "4", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 4 * 3


def test_estimate(rollout_files, tmp_path, capsys):
    t, a = rollout_files
    truth = tmp_path / "truth.json"
    save_model(paper_models()[0], truth)
    out = tmp_path / "est.json"
    rc = main(["estimate", "--rollouts", str(t), str(a), "--q", "0.5",
               "--true-model", str(truth), "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "err_theta=" in text
    est = load_model(out)
    assert np.linalg.norm(est.theta() - paper_models()[0].theta(), 2) < 1.0
    assert json.loads(out.read_text())["metadata"]["n_columns"] == 240


def test_estimate_conflicting_weights(rollout_files):
    t, a = rollout_files
    assert main(["estimate", "--rollouts", str(t), str(a), "--q", "1", "--decay", "1"]) == 2


def test_estimate_missing_file(tmp_path):
    assert main(["estimate", "--rollouts", str(tmp_path / "none.csv")]) == 2


def test_estimate_singular(tmp_path):
    model = tmp_path / "m.json"
    save_model(SystemModel.lti(np.eye(2), np.ones((2, 1)), horizon=1), model)
    r = tmp_path / "r.csv"
    assert main(["simulate", "--model", str(model), "--count", "2", "--out", str(r)]) == 0
    assert main(["estimate", "--rollouts", str(r)]) == 3
    assert main(["estimate", "--rollouts", str(r), "--ridge"]) == 0


def test_cv_select(rollout_files, capsys):
    t, a = rollout_files
    assert main(["cv-select", "--rollouts", str(t), str(a), "--candidates", "0,1", "--folds", "3"]) == 0
    assert "chosen_q=" in capsys.readouterr().out


def test_bound(tmp_path, capsys):
    cfg = tmp_path / "b.json"
    cfg.write_text(json.dumps({"n_true": 200, "n_aux": 600, "q": 1.0, "delta": 0.05}))
    assert main(["bound", "--config", str(cfg)]) == 0
    kv = dict(line.split("=", 1) for line in
              capsys.readouterr().out.split("---\n", 1)[1].splitlines())
    assert float(kv["total"]) == pytest.approx(11.214920094811271, rel=1e-12)
    assert kv["thresholds_met"] == "true"


def test_bound_bad_config(tmp_path):
    cfg = tmp_path / "b.json"
    cfg.write_text(json.dumps({"n_true": 200}))
    assert main(["bound", "--config", str(cfg)]) == 2
    cfg.write_text("{not json")
    assert main(["bound", "--config", str(cfg)]) == 2


def test_bad_delta(tmp_path):
    cfg = tmp_path / "b.json"
    cfg.write_text(json.dumps({"n_true": 200, "n_aux": 600}))
    assert main(["bound", "--config", str(cfg), "--delta", "0.5"]) == 2


def test_experiment_deterministic(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sweep": [20, 40], "repetitions": 2}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["experiment", "--scenario", "1", "--config", str(cfg), "--seed", "3",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    main(["experiment", "--scenario", "1", "--config", str(cfg), "--seed", "4", "--out", str(c)])
    assert c.read_bytes() != a.read_bytes()
