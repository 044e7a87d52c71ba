"""Inference-time scoring: image-level max confidence and pixel-level maps.

The image score is the maximum discriminator confidence over the feature
grid, taken before any resizing or smoothing. The pixel map bilinearly
upsamples the confidence grid to image dimensions and then applies a
truncated, renormalized Gaussian blur with edge-replicated borders.
"""

from dataclasses import dataclass

import numpy as np

from .aggregation import bilinear_resize
from .errors import DataError


@dataclass
class ScoreResult:
    image_score: float
    pixel_map: np.ndarray  # (H0, W0) in [0, 1]


def confidence_grid(projected, disc):
    """Discriminator confidence at every (h, w) of a projected map."""
    grid = projected.grid if hasattr(projected, "grid") else np.asarray(projected)
    h, w, c = grid.shape
    p, _ = disc.forward_batch(grid.reshape(-1, c))
    return p.reshape(h, w)


def score_image(projected, disc):
    """Max confidence over all feature vectors."""
    return float(np.max(confidence_grid(projected, disc)))


def gaussian_kernel(sigma):
    """1-d Gaussian truncated at 4*sigma and renormalized to sum 1."""
    if sigma < 0:
        raise DataError(f"sigma must be >= 0, got {sigma}")
    radius = int(4.0 * sigma + 0.5)
    if sigma == 0 or radius == 0:
        return np.ones(1)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(image, sigma):
    """Separable blur with edge-replicated borders; preserves constants."""
    kernel = gaussian_kernel(sigma)
    r = (kernel.size - 1) // 2
    if r == 0:
        return np.asarray(image, dtype=np.float64).copy()
    img = np.asarray(image, dtype=np.float64)
    padded = np.pad(img, ((r, r), (0, 0)), mode="edge")
    rows = np.zeros_like(img)
    for i, kv in enumerate(kernel):
        rows += kv * padded[i : i + img.shape[0], :]
    padded = np.pad(rows, ((0, 0), (r, r)), mode="edge")
    out = np.zeros_like(img)
    for i, kv in enumerate(kernel):
        out += kv * padded[:, i : i + img.shape[1]]
    return out


def score_pixels(projected, disc, out_h, out_w, sigma):
    """Per-pixel anomaly scores at image resolution."""
    conf = confidence_grid(projected, disc)
    if out_h < conf.shape[0] or out_w < conf.shape[1]:
        raise DataError(
            f"image dims ({out_h}, {out_w}) smaller than feature grid "
            f"{conf.shape}"
        )
    resized = bilinear_resize(conf, out_h, out_w)
    return gaussian_blur(resized, sigma)


def score_entry(projected, disc, image_dims, sigma):
    h0, w0 = image_dims
    return ScoreResult(
        image_score=score_image(projected, disc),
        pixel_map=score_pixels(projected, disc, h0, w0, sigma),
    )
