"""Anomaly feature synthesis.

Synthetic anomalies are placed on the ray from the assigned center vector
through the feature vector, at distance alpha * L from the feature, where L
is the current batch's center loss treated as a constant (no gradient flows
through the length). The Gaussian-noise generator is kept only as an
ablation baseline.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateDirectionError

DIRECTION_EPS = 1e-12


@dataclass
class SynthesisParams:
    """Length scale of the synthesis: alpha times a center-loss snapshot."""

    alpha: float
    loss_value: float

    def __post_init__(self):
        if self.alpha < 0:
            raise DataError(f"alpha must be >= 0, got {self.alpha}")
        if self.loss_value < 0:
            raise DataError(f"loss snapshot must be >= 0, got {self.loss_value}")

    @property
    def length(self):
        return self.alpha * self.loss_value


def synthesize(projected_batch, assign, center, params, on_degenerate="error"):
    """z = u + alpha * L * (u - c) / ||u - c|| per vector.

    ``assign`` must come from ``center_loss``/``nearest_center`` on this
    exact (batch, center) pair. Vectors coinciding with their center have no
    defined direction: with a positive synthesis length they raise
    DegenerateDirectionError, or are excluded when ``on_degenerate="skip"``
    (the returned mask marks the vectors that were synthesized).
    """
    batch = np.asarray(projected_batch, dtype=np.float64)
    flat_u = batch.reshape(-1, batch.shape[-1])
    flat_c = np.asarray(center).reshape(-1, batch.shape[-1])
    diff = flat_u - flat_c[assign.indices.reshape(-1)]
    dist = assign.distances.reshape(-1)
    length = params.length
    valid = np.ones(flat_u.shape[0], dtype=bool)
    degenerate = dist < DIRECTION_EPS
    if length > 0 and degenerate.any():
        if on_degenerate == "error":
            raise DegenerateDirectionError(np.flatnonzero(degenerate))
        if on_degenerate != "skip":
            raise DataError(f"unknown degenerate policy {on_degenerate!r}")
        valid &= ~degenerate
    safe = np.where(dist > 0, dist, 1.0)
    z = flat_u + length * diff / safe[:, None]
    z[~valid] = flat_u[~valid]
    return z.reshape(batch.shape), valid.reshape(assign.indices.shape)


def synthesize_backward(grad_z, projected_batch, assign, center, params, valid):
    """Pull a gradient on z back onto u.

    The direction is differentiated as a function of u; the length is a
    constant. Skipped vectors pass nothing through.
    """
    batch = np.asarray(projected_batch, dtype=np.float64)
    flat_u = batch.reshape(-1, batch.shape[-1])
    flat_c = np.asarray(center).reshape(-1, batch.shape[-1])
    g = np.asarray(grad_z, dtype=np.float64).reshape(flat_u.shape)
    diff = flat_u - flat_c[assign.indices.reshape(-1)]
    dist = assign.distances.reshape(-1)
    mask = valid.reshape(-1) & (dist > 0)
    safe = np.where(mask, dist, 1.0)
    length = params.length
    # d/du [u + s*d/r] applied to g: g + s*(g/r - d (d.g)/r^3)
    dot = np.sum(diff * g, axis=1)
    grad_u = g + length * (
        g / safe[:, None] - diff * (dot / safe**3)[:, None]
    )
    grad_u[~mask] = g[~mask] if length == 0 else 0.0
    grad_u[~valid.reshape(-1)] = 0.0
    return grad_u.reshape(batch.shape)


def gaussian_synthesize(projected_batch, noise_std, rng):
    """Ablation baseline: i.i.d. Gaussian noise per channel added to u."""
    batch = np.asarray(projected_batch, dtype=np.float64)
    noise = rng.normal(0.0, noise_std, size=batch.shape)
    valid = np.ones(batch.shape[:-1], dtype=bool)
    return batch + noise, valid
