import numpy as np
import pytest

from featad.checkpoint import load_checkpoint, save_checkpoint
from featad.errors import DataError, FormatError


def test_round_trip_preserves_model(tmp_path, small_model):
    path = tmp_path / "ckpt"
    save_checkpoint(path, small_model)
    loaded = load_checkpoint(path)
    # float32 storage: loaded equals the float32 cast of the trained params
    np.testing.assert_array_equal(
        loaded.projector.layer.weight,
        small_model.projector.layer.weight.astype(np.float32).astype(np.float64),
    )
    np.testing.assert_array_equal(
        loaded.center,
        small_model.center.astype(np.float32).astype(np.float64),
    )
    for got, want in zip(
        loaded.discriminator.layers, small_model.discriminator.layers
    ):
        np.testing.assert_array_equal(
            got.weight, want.weight.astype(np.float32).astype(np.float64)
        )
    assert loaded.config.to_dict() == small_model.config.to_dict()
    assert not loaded.projector.frozen


def test_refuses_overwrite_without_force(tmp_path, small_model):
    path = tmp_path / "ckpt"
    save_checkpoint(path, small_model)
    with pytest.raises(DataError, match="exists"):
        save_checkpoint(path, small_model)
    save_checkpoint(path, small_model, force=True)


def test_force_refuses_non_checkpoint_dir(tmp_path, small_model):
    path = tmp_path / "stuff"
    path.mkdir()
    (path / "precious.txt").write_text("do not delete")
    with pytest.raises(DataError, match="not a.*checkpoint"):
        save_checkpoint(path, small_model, force=True)
    assert (path / "precious.txt").exists()


def test_load_rejects_non_checkpoint(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "nowhere")


def test_load_rejects_bad_header(tmp_path, small_model):
    path = tmp_path / "ckpt"
    save_checkpoint(path, small_model)
    (path / "header.json").write_text('{"format": "other", "version": 1}')
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_save_is_deterministic(tmp_path, small_model):
    a, b = tmp_path / "a", tmp_path / "b"
    save_checkpoint(a, small_model)
    save_checkpoint(b, small_model)
    for name in sorted(p.name for p in a.iterdir()):
        assert (a / name).read_bytes() == (b / name).read_bytes()
