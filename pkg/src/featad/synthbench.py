"""Deterministic synthetic feature datasets with ground-truth masks.

Normal maps are drawn around K mode templates with per-vector Gaussian
noise; ``noise_std`` is the expected noise norm per cell vector, so it is
directly comparable with the anomaly ``offset`` (also a vector norm).
Templates are spatially smooth and low-rank (a few random channel basis
vectors blended by smooth spatial fields), matching the spatial coherence
of real convolutional feature maps; with i.i.d. per-cell templates the
normal set degenerates into thousands of isolated islands that nothing of
this size could enclose. Anomalous test maps displace one contiguous patch
of cells by a fixed-magnitude offset in a random direction (one direction
per image).

Mode assignment is blocked (first N/K images share mode 0, and so on), so
consecutive training batches stay mode-homogeneous the way grouped capture
sessions do; this is what makes multi-mode structure visible to the
batch-iterative center alignment.

The emitted tensor files, manifests, and masks are byte-identical across
runs with the same spec, and use exactly the same layout as exported
real-image features.
"""

import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .manifest import save_manifest
from .scoring import gaussian_blur
from .tensorfile import write_pgm, write_tensor


@dataclass
class SynthSpec:
    height: int = 32
    width: int = 32
    channels: int = 64
    modes: int = 1
    mode_separation: float = 1.0   # per-element std of the mode templates
    noise_std: float = 2.0         # expected per-vector noise norm
    patch_size: int = 8            # anomaly patch side, in cells
    offset: float = 2.5            # anomaly displacement vector norm
    train_count: int = 64
    test_normal_count: int = 32
    test_anomalous_count: int = 32
    image_scale: int = 2           # image pixels per feature cell
    level: int = 2                 # hierarchy level key in the manifest
    template_rank: int = 4         # channel basis vectors per mode
    template_smoothness: float = 4.0  # blur sigma of the spatial fields
    seed: int = 0

    def __post_init__(self):
        if self.modes < 1:
            raise ConfigError(f"modes must be >= 1, got {self.modes}")
        if self.test_anomalous_count > 0 and self.offset <= 0:
            raise ConfigError("offset must be positive for anomalous entries")
        if not 1 <= self.patch_size <= min(self.height, self.width):
            raise ConfigError(
                f"patch_size {self.patch_size} outside 1..{min(self.height, self.width)}"
            )
        if self.train_count < 1:
            raise ConfigError("train_count must be >= 1")
        if self.image_scale < 1:
            raise ConfigError("image_scale must be >= 1")

    @property
    def image_dims(self):
        return (self.height * self.image_scale, self.width * self.image_scale)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown synth spec keys: {sorted(unknown)}")
        return cls(**data)


def _mode_of(index, count, modes):
    # blocked assignment: contiguous runs of one mode
    return min(index * modes // count, modes - 1) if count else 0


def _make_templates(spec, rng):
    """(K, H, W, C) smooth low-rank templates, per-element std ~ separation."""
    k, r = spec.modes, spec.template_rank
    basis = rng.normal(
        0.0, spec.mode_separation, size=(k, r, spec.channels)
    )
    fields = rng.normal(size=(k, r, spec.height, spec.width))
    smoothed = np.empty_like(fields)
    for i in range(k):
        for m in range(r):
            f = gaussian_blur(fields[i, m], spec.template_smoothness)
            f -= f.mean()
            rms = np.sqrt(np.mean(np.square(f)))
            smoothed[i, m] = f / rms if rms > 0 else f
    return np.einsum("kmhw,kmc->khwc", smoothed, basis) / np.sqrt(r)


def _normal_map(templates, mode, spec, rng):
    # noise_std is the per-vector norm scale, so it is directly comparable
    # with the anomaly offset (also a vector norm)
    per_element = spec.noise_std / np.sqrt(spec.channels)
    noise = rng.normal(0.0, per_element, size=templates[mode].shape)
    return templates[mode] + noise


def _anomalous_map(base, spec, rng):
    top = int(rng.integers(0, spec.height - spec.patch_size + 1))
    left = int(rng.integers(0, spec.width - spec.patch_size + 1))
    direction = rng.normal(size=spec.channels)
    direction /= np.linalg.norm(direction)
    grid = base.copy()
    grid[top : top + spec.patch_size, left : left + spec.patch_size] += (
        spec.offset * direction
    )
    cell_mask = np.zeros((spec.height, spec.width), dtype=bool)
    cell_mask[top : top + spec.patch_size, left : left + spec.patch_size] = True
    return grid, cell_mask


def cell_mask_to_pixels(cell_mask, scale):
    return np.kron(cell_mask, np.ones((scale, scale), dtype=bool))


def generate(spec, out_dir):
    """Write train/test tensors, masks, and manifests; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    tensors_dir = os.path.join(out_dir, "tensors")
    masks_dir = os.path.join(out_dir, "masks")
    os.makedirs(tensors_dir, exist_ok=True)
    os.makedirs(masks_dir, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    templates = _make_templates(spec, rng)
    h0, w0 = spec.image_dims
    level_key = str(spec.level)

    def tensor_entry(name, grid, label, mask_rel=None):
        rel = f"tensors/{name}.pbft"
        write_tensor(os.path.join(out_dir, rel), grid.astype(np.float32))
        return {
            "id": name,
            "tensors": {level_key: rel},
            "label": label,
            "mask": mask_rel,
            "image_dims": [h0, w0],
        }

    train_entries = []
    for i in range(spec.train_count):
        mode = _mode_of(i, spec.train_count, spec.modes)
        grid = _normal_map(templates, mode, spec, rng)
        train_entries.append(tensor_entry(f"train_{i:04d}", grid, "normal"))

    test_entries = []
    for i in range(spec.test_normal_count):
        mode = _mode_of(i, spec.test_normal_count, spec.modes)
        grid = _normal_map(templates, mode, spec, rng)
        test_entries.append(tensor_entry(f"test_normal_{i:04d}", grid, "normal"))
    for i in range(spec.test_anomalous_count):
        mode = _mode_of(i, spec.test_anomalous_count, spec.modes)
        base = _normal_map(templates, mode, spec, rng)
        grid, cell_mask = _anomalous_map(base, spec, rng)
        name = f"test_anom_{i:04d}"
        mask_rel = f"masks/{name}.pgm"
        pixel_mask = cell_mask_to_pixels(cell_mask, spec.image_scale)
        write_pgm(
            os.path.join(out_dir, mask_rel),
            np.where(pixel_mask, 255, 0).astype(np.uint8),
        )
        test_entries.append(tensor_entry(name, grid, "anomalous", mask_rel))

    train_path = os.path.join(out_dir, "train.json")
    test_path = os.path.join(out_dir, "test.json")
    save_manifest(train_path, "train", train_entries)
    save_manifest(test_path, "test", test_entries)
    with open(os.path.join(out_dir, "synth_spec.json"), "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return train_path, test_path
