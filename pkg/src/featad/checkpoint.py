"""Model checkpoints: a directory of tensor files plus a JSON header.

Writes are atomic (temp directory renamed into place). Parameters are
stored as float32 tensors; loading therefore reproduces exactly what any
other process loading the same checkpoint computes.
"""

import json
import os
import shutil

import numpy as np

from .config import RunConfig
from .center import Projector
from .discriminator import Discriminator
from .errors import DataError, FormatError
from .nn import LinearLayer
from .tensorfile import read_tensor, write_tensor
from .train import TrainedModel

HEADER_NAME = "header.json"
FORMAT_NAME = "featad-checkpoint"
FORMAT_VERSION = 1


def _model_files(model):
    files = {
        "center": model.center,
        "projector_weight": model.projector.layer.weight,
        "projector_bias": model.projector.layer.bias,
    }
    for i, layer in enumerate(model.discriminator.layers):
        files[f"discriminator_{i}_weight"] = layer.weight
        files[f"discriminator_{i}_bias"] = layer.bias
    return files


def save_checkpoint(path, model, force=False):
    """Serialize projector, discriminator, center, and config under ``path``."""
    path = os.path.abspath(path)
    if os.path.exists(path):
        if not force:
            raise DataError(f"checkpoint target already exists: {path}")
        # force only replaces empty dirs or previous checkpoints
        if os.listdir(path) and not os.path.isfile(os.path.join(path, HEADER_NAME)):
            raise DataError(
                f"refusing to overwrite {path}: existing directory is not a "
                f"checkpoint"
            )
        shutil.rmtree(path)
    tmp = path + ".tmp"
    if os.path.exists(tmp):
        shutil.rmtree(tmp)
    os.makedirs(tmp)
    files = _model_files(model)
    h, w, c = model.center.shape
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "channels": c,
        "grid": [h, w],
        "files": {name: name + ".pbft" for name in files},
    }
    for name, arr in files.items():
        write_tensor(os.path.join(tmp, name + ".pbft"), arr)
    with open(os.path.join(tmp, HEADER_NAME), "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    model.config.save(os.path.join(tmp, "config.json"))
    os.replace(tmp, path)
    return path


def load_checkpoint(path):
    """Load a checkpoint directory back into a TrainedModel."""
    header_path = os.path.join(path, HEADER_NAME)
    try:
        with open(header_path, "r", encoding="utf-8") as fh:
            header = json.load(fh)
    except OSError as exc:
        raise DataError(f"not a checkpoint directory: {path} ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{header_path}: invalid JSON: {exc}") from exc
    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise FormatError(f"{header_path}: unsupported checkpoint header")
    config = RunConfig.load(os.path.join(path, "config.json"))
    tensors = {
        name: read_tensor(os.path.join(path, rel))
        for name, rel in header["files"].items()
    }
    projector = Projector(
        LinearLayer(tensors["projector_weight"], tensors["projector_bias"]),
        frozen=False,
    )
    disc = Discriminator(
        [
            LinearLayer(
                tensors[f"discriminator_{i}_weight"],
                tensors[f"discriminator_{i}_bias"],
            )
            for i in range(3)
        ]
    )
    center = np.asarray(tensors["center"], dtype=np.float64)
    return TrainedModel(projector, disc, center, config, history=[])
