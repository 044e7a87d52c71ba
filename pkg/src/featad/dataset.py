"""Loading manifest entries into dispersed feature maps."""

import numpy as np

from .aggregation import FeatureMap, aggregate, build_dispersed
from .errors import DataError
from .tensorfile import read_tensor


def load_dispersed_entry(entry, config):
    """Raw per-level tensors -> aggregated -> dispersed map for one entry."""
    levels = {}
    for j in config.levels:
        if j not in entry.tensors:
            raise DataError(
                f"entry {entry.id}: manifest lacks hierarchy level {j} "
                f"(has {sorted(entry.tensors)})"
            )
        raw = read_tensor(entry.tensors[j])
        if raw.ndim != 3:
            raise DataError(
                f"entry {entry.id}: level {j} tensor must be (H, W, C), "
                f"got {raw.shape}"
            )
        levels[j] = aggregate(FeatureMap(raw, role="raw"), config.p)
    return build_dispersed(levels)


def load_dispersed_stack(manifest, config):
    """All entries as one (N, H, W, C) float64 stack, in manifest order."""
    if not manifest.entries:
        raise DataError(f"manifest {manifest.path} has no entries")
    maps = [load_dispersed_entry(e, config) for e in manifest.entries]
    shape = maps[0].grid.shape
    for e, m in zip(manifest.entries, maps):
        if m.grid.shape != shape:
            raise DataError(
                f"entry {e.id}: dispersed shape {m.grid.shape} differs from {shape}"
            )
    return np.stack([m.grid for m in maps])
