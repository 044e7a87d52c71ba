"""Dataset manifests: JSON listings of per-level tensor files with labels,
optional masks, and image dimensions.

Schema (paths are relative to the manifest's directory):

    {
      "split": "train" | "test",
      "entries": [
        {
          "id": "img_000",
          "tensors": {"2": "tensors/img_000_l2.pbft", "3": "..."},
          "label": "normal" | "anomalous",
          "mask": "masks/img_000.pgm" | null,
          "image_dims": [H0, W0]
        },
        ...
      ]
    }

Train manifests must contain only normal entries. When pixel metrics are
requested, every anomalous test entry must carry a mask.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ManifestError

LABELS = ("normal", "anomalous")


@dataclass
class ManifestEntry:
    id: str
    tensors: dict          # level (int) -> absolute path
    label: str
    image_dims: tuple      # (H0, W0)
    mask: str = None       # absolute path or None


@dataclass
class DatasetManifest:
    split: str
    entries: list = field(default_factory=list)
    path: str = None

    def labels(self):
        return np.array([1 if e.label == "anomalous" else 0 for e in self.entries])

    def levels(self):
        """Levels available in every entry."""
        if not self.entries:
            return []
        common = set(self.entries[0].tensors)
        for e in self.entries[1:]:
            common &= set(e.tensors)
        return sorted(common)


def _entry_from_dict(raw, base, index, split, require_masks):
    for key in ("id", "tensors", "label", "image_dims"):
        if key not in raw:
            raise ManifestError(f"entry {index}: missing field {key!r}")
    label = raw["label"]
    if label not in LABELS:
        raise ManifestError(f"entry {index}: label must be one of {LABELS}")
    if split == "train" and label != "normal":
        raise ManifestError(
            f"entry {index} ({raw['id']}): train manifests must contain only "
            f"normal entries"
        )
    tensors = {}
    for level, rel in raw["tensors"].items():
        path = os.path.join(base, rel)
        if not os.path.isfile(path):
            raise ManifestError(f"entry {index}: tensor file not found: {path}")
        tensors[int(level)] = path
    if not tensors:
        raise ManifestError(f"entry {index}: no tensor files listed")
    dims = raw["image_dims"]
    if len(dims) != 2 or any(int(d) <= 0 for d in dims):
        raise ManifestError(f"entry {index}: bad image_dims {dims}")
    mask = raw.get("mask")
    if mask is not None:
        mask = os.path.join(base, mask)
        if not os.path.isfile(mask):
            raise ManifestError(f"entry {index}: mask file not found: {mask}")
    elif require_masks and label == "anomalous":
        raise ManifestError(
            f"entry {index} ({raw['id']}): anomalous entry lacks a mask while "
            f"pixel metrics are enabled"
        )
    return ManifestEntry(
        id=str(raw["id"]),
        tensors=tensors,
        label=label,
        image_dims=(int(dims[0]), int(dims[1])),
        mask=mask,
    )


def load_manifest(path, require_masks=False):
    """Load and eagerly validate a manifest; all invariants are checked here."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    split = data.get("split")
    if split not in ("train", "test"):
        raise ManifestError(f"{path}: split must be 'train' or 'test'")
    raw_entries = data.get("entries")
    if not isinstance(raw_entries, list):
        raise ManifestError(f"{path}: entries must be a list")
    base = os.path.dirname(os.path.abspath(path))
    entries = [
        _entry_from_dict(raw, base, i, split, require_masks)
        for i, raw in enumerate(raw_entries)
    ]
    return DatasetManifest(split=split, entries=entries, path=os.path.abspath(path))


def save_manifest(path, split, entries):
    """Write a manifest; entry paths must already be relative to ``path``."""
    data = {"split": split, "entries": entries}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def subsample(manifest, ratio, seed):
    """Deterministically keep ceil(ratio * N) entries, preserving order."""
    if not 0.0 < ratio <= 1.0:
        raise ManifestError(f"subsample ratio must be in (0, 1], got {ratio}")
    n = len(manifest.entries)
    keep = min(n, math.ceil(ratio * n))
    if keep == n:
        return manifest
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.permutation(n)[:keep])
    return DatasetManifest(
        split=manifest.split,
        entries=[manifest.entries[i] for i in chosen],
        path=manifest.path,
    )
