"""Neighborhood aggregation and multilevel assembly of dense feature maps.

A raw per-level map is mean-pooled over a clamped p x p window (edge
replication at the borders, duplicates counted), every level is bilinearly
resized to the grid of the largest level with a corner-aligned sampling
grid, and the levels are channel-concatenated in ascending level order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

ROLES = ("raw", "aggregated", "dispersed", "projected", "synthetic")


@dataclass
class FeatureMap:
    """H x W grid of C-dim vectors plus its pipeline role tag."""

    grid: np.ndarray  # (H, W, C) float64
    role: str = "raw"

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        if self.grid.ndim != 3:
            raise DataError(f"feature map must be (H, W, C), got {self.grid.shape}")
        if self.role not in ROLES:
            raise DataError(f"unknown role {self.role!r}")

    @property
    def height(self):
        return self.grid.shape[0]

    @property
    def width(self):
        return self.grid.shape[1]

    @property
    def channels(self):
        return self.grid.shape[2]

    def require_role(self, role):
        if self.role != role:
            raise DataError(f"expected a {role!r} feature map, got {self.role!r}")


def neighborhood_indices(h, w, p, height, width):
    """The p*p neighborhood of 1-based (h, w), clamped to the map bounds.

    Out-of-range coordinates are clamped, so border windows contain
    duplicated index pairs.
    """
    if p <= 0 or p % 2 == 0:
        raise ConfigError(f"neighborhood size p must be a positive odd int, got {p}")
    if not (1 <= h <= height and 1 <= w <= width):
        raise DataError(f"position ({h}, {w}) outside 1..{height} x 1..{width}")
    r = p // 2
    return [
        (min(max(h + dy, 1), height), min(max(w + dx, 1), width))
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
    ]


def aggregate(raw, p):
    """Mean-pool each vector over its clamped p x p neighborhood.

    Output dims equal input dims; the mean counts duplicated border indices,
    matching ``neighborhood_indices`` exactly.
    """
    raw.require_role("raw")
    if p <= 0 or p % 2 == 0:
        raise ConfigError(f"neighborhood size p must be a positive odd int, got {p}")
    r = p // 2
    grid = raw.grid
    padded = np.pad(grid, ((r, r), (r, r), (0, 0)), mode="edge")
    h, w, _ = grid.shape
    acc = np.zeros_like(grid)
    for dy in range(p):
        for dx in range(p):
            acc += padded[dy : dy + h, dx : dx + w]
    return FeatureMap(acc / (p * p), role="aggregated")


def bilinear_resize(grid, out_h, out_w):
    """Corner-aligned bilinear resize of an (H, W) or (H, W, C) array.

    The four corners of the output sample the input corners exactly; a
    size-1 axis maps to source index 0.
    """
    grid = np.asarray(grid, dtype=np.float64)
    squeeze = grid.ndim == 2
    if squeeze:
        grid = grid[:, :, None]
    in_h, in_w, _ = grid.shape

    def src_coords(n_out, n_in):
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out)
        return np.arange(n_out) * ((n_in - 1) / (n_out - 1))

    ys = src_coords(out_h, in_h)
    xs = src_coords(out_w, in_w)
    y0 = np.clip(np.floor(ys).astype(int), 0, in_h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    top = grid[y0][:, x0] * (1 - wx) + grid[y0][:, x1] * wx
    bot = grid[y1][:, x0] * (1 - wx) + grid[y1][:, x1] * wx
    out = top * (1 - wy) + bot * wy
    return out[:, :, 0] if squeeze else out


def build_dispersed(levels):
    """Resize per-level aggregated maps to the largest grid and concatenate.

    ``levels`` maps the hierarchy level index to its aggregated FeatureMap.
    The target grid is that of the lowest level index (the largest map);
    channels are stacked in ascending level order, so level j's channels
    occupy the contiguous slice [sum(C_k for k < j), sum(C_k for k <= j)).
    """
    if not levels:
        raise ConfigError("at least one hierarchy level is required")
    order = sorted(levels)
    for j in order:
        levels[j].require_role("aggregated")
    target = levels[order[0]]
    h, w = target.height, target.width
    parts = [
        bilinear_resize(levels[j].grid, h, w) if (levels[j].height, levels[j].width) != (h, w)
        else levels[j].grid
        for j in order
    ]
    return FeatureMap(np.concatenate(parts, axis=2), role="dispersed")


def channel_slices(levels):
    """Documented channel layout of ``build_dispersed`` output."""
    out = {}
    start = 0
    for j in sorted(levels):
        c = levels[j].channels
        out[j] = slice(start, start + c)
        start += c
    return out
