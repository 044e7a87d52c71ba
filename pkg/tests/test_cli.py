import json

import numpy as np
import pytest

from featad.cli import main
from featad.errors import DivergenceError


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_synth")
    code = main([
        "synth", "--out", str(root), "--height", "10", "--width", "10",
        "--channels", "12", "--train-count", "8", "--test-normal-count", "4",
        "--test-anomalous-count", "4", "--patch-size", "3", "--seed", "3",
    ])
    assert code == 0
    return root


@pytest.fixture(scope="module")
def run_dir(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_run") / "run"
    code = main([
        "train", "--manifest", str(synth_dir / "train.json"),
        "--out", str(out), "--levels", "2", "--epochs", "4",
        "--batch-size", "4", "--quiet",
    ])
    assert code == 0
    return out


def test_synth_outputs(synth_dir):
    assert (synth_dir / "train.json").exists()
    assert (synth_dir / "test.json").exists()
    assert (synth_dir / "synth_spec.json").exists()
    spec = json.loads((synth_dir / "synth_spec.json").read_text())
    assert spec["seed"] == 3


def test_train_outputs(run_dir):
    assert (run_dir / "checkpoint" / "header.json").exists()
    assert (run_dir / "config.json").exists()
    log = (run_dir / "training_log.csv").read_text().strip().splitlines()
    assert log[0].startswith("epoch,center_loss,normal_loss,anomaly_loss")
    assert len(log) == 1 + 4
    assert (run_dir / "figures" / "loss_curves.png").exists()
    config = json.loads((run_dir / "config.json").read_text())
    assert config["levels"] == [2]
    assert config["epochs"] == 4


def test_eval_command(run_dir, synth_dir, tmp_path):
    out = tmp_path / "eval"
    code = main([
        "eval", "--checkpoint", str(run_dir),
        "--manifest", str(synth_dir / "test.json"),
        "--out", str(out), "--category", "clitest",
    ])
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["category"] == "clitest"
    assert set(metrics) >= {"image_auroc", "image_ap", "pixel_auroc",
                            "pixel_ap", "pixel_pro"}
    assert (out / "config.json").exists()
    assert (out / "figures" / "roc_curve.png").exists()


def test_score_command(run_dir, synth_dir, tmp_path):
    out = tmp_path / "score"
    code = main([
        "score", "--checkpoint", str(run_dir),
        "--manifest", str(synth_dir / "test.json"), "--out", str(out),
    ])
    assert code == 0
    assert (out / "scores.csv").exists()
    assert not (out / "metrics.json").exists()


def test_diagnose_command(run_dir, synth_dir, tmp_path):
    out = tmp_path / "diag"
    code = main([
        "diagnose", "--checkpoint", str(run_dir),
        "--manifest", str(synth_dir / "test.json"),
        "--out", str(out), "--max-vectors", "40",
    ])
    assert code == 0
    lines = (out / "diagnose.csv").read_text().strip().splitlines()
    assert lines[0] == "x,y,role"
    assert (out / "figures" / "projection_scatter.png").exists()


def test_train_epochs_zero_still_writes_checkpoint(synth_dir, tmp_path):
    out = tmp_path / "run0"
    code = main([
        "train", "--manifest", str(synth_dir / "train.json"),
        "--out", str(out), "--levels", "2", "--epochs", "0", "--quiet",
    ])
    assert code == 0
    from featad.checkpoint import load_checkpoint

    model = load_checkpoint(out / "checkpoint")
    assert np.all(np.isfinite(model.center))
    log = (out / "training_log.csv").read_text().strip().splitlines()
    assert len(log) == 1  # header only


def test_ablation_switches(synth_dir, tmp_path):
    for flags in (["--center", "average"], ["--synthesis", "gaussian"]):
        out = tmp_path / ("run_" + flags[1])
        code = main([
            "train", "--manifest", str(synth_dir / "train.json"),
            "--out", str(out), "--levels", "2", "--epochs", "1",
            "--batch-size", "4", "--quiet", *flags,
        ])
        assert code == 0
        config = json.loads((out / "config.json").read_text())
        key = "center_method" if flags[0] == "--center" else "synthesis_method"
        assert config[key] == flags[1]


def test_synth_spec_file_and_overrides(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"height": 8, "width": 8, "channels": 8,
                                     "train_count": 2, "test_normal_count": 1,
                                     "test_anomalous_count": 1, "patch_size": 2}))
    out = tmp_path / "data"
    assert main(["synth", "--out", str(out), "--spec", str(spec_path),
                 "--seed", "9"]) == 0
    written = json.loads((out / "synth_spec.json").read_text())
    assert written["height"] == 8
    assert written["seed"] == 9  # flag overrides the spec file


def test_synth_bad_spec_exits_2(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"not_a_field": 1}))
    assert main(["synth", "--out", str(tmp_path / "x"),
                 "--spec", str(spec_path)]) == 2


def test_unknown_config_key_exits_2(synth_dir, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"epochs": 1, "bogus": True}))
    code = main([
        "train", "--manifest", str(synth_dir / "train.json"),
        "--out", str(tmp_path / "x"), "--config", str(bad), "--quiet",
    ])
    assert code == 2


def test_even_p_exits_2(synth_dir, tmp_path):
    code = main([
        "train", "--manifest", str(synth_dir / "train.json"),
        "--out", str(tmp_path / "x"), "--p", "2", "--quiet",
    ])
    assert code == 2


def test_bad_levels_exits_2(synth_dir, tmp_path):
    code = main([
        "train", "--manifest", str(synth_dir / "train.json"),
        "--out", str(tmp_path / "x"), "--levels", "2,abc", "--quiet",
    ])
    assert code == 2


def test_missing_manifest_exits_3(tmp_path):
    code = main([
        "train", "--manifest", str(tmp_path / "none.json"),
        "--out", str(tmp_path / "x"), "--quiet",
    ])
    assert code == 3


def test_level_absent_from_manifest_exits_3(synth_dir, tmp_path):
    code = main([
        "train", "--manifest", str(synth_dir / "train.json"),
        "--out", str(tmp_path / "x"), "--levels", "2,3", "--epochs", "1",
        "--quiet",
    ])
    assert code == 3


def test_divergence_exits_4(synth_dir, tmp_path, monkeypatch):
    import featad.train

    def boom(*args, **kwargs):
        raise DivergenceError("epoch 0: synthetic blow-up")

    monkeypatch.setattr(featad.train, "train", boom)
    code = main([
        "train", "--manifest", str(synth_dir / "train.json"),
        "--out", str(tmp_path / "x"), "--quiet",
    ])
    assert code == 4
