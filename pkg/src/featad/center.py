"""Center learning: averaged and alignment-initialized center features,
1-NN assignment of feature vectors to center vectors, and the
mean-distance center loss that defines the hypersphere boundary.
"""

from dataclasses import dataclass

import numpy as np

from .aggregation import FeatureMap
from .errors import DataError
from .nn import LinearLayer


class Projector:
    """Square fully-connected layer mapping dispersed features toward the
    center. Frozen during center initialization; the same weights then
    become the trainable starting point."""

    def __init__(self, layer, frozen=True):
        if layer.in_dim != layer.out_dim:
            raise DataError("projector must have equal input and output nodes")
        self.layer = layer
        self.frozen = frozen

    @classmethod
    def init_normal(cls, channels, rng):
        return cls(LinearLayer.init_normal(channels, channels, rng), frozen=True)

    @property
    def channels(self):
        return self.layer.in_dim

    def unfreeze(self):
        self.frozen = False
        return self

    def apply(self, vectors):
        """Affine map over the last axis of any (..., C) array."""
        flat = vectors.reshape(-1, vectors.shape[-1])
        out = self.layer.forward(flat)
        return out.reshape(vectors.shape)

    def backward(self, vectors, upstream, need_input_grad=True):
        if self.frozen:
            raise DataError("frozen projector does not accumulate gradients")
        flat = vectors.reshape(-1, vectors.shape[-1])
        grad = self.layer.backward(
            flat, upstream.reshape(flat.shape), need_input_grad=need_input_grad
        )
        return grad.reshape(vectors.shape) if need_input_grad else None


@dataclass
class NearestAssignment:
    """Per query vector: flat row-major index of its nearest center vector
    and the Euclidean distance. Ties break to the smallest index."""

    indices: np.ndarray    # int, query shape without the channel axis
    distances: np.ndarray  # float64, same shape as indices
    center_shape: tuple    # (H, W) of the center grid

    def grid_indices(self):
        """(h, w) pairs of the assigned center vectors."""
        return np.stack(np.divmod(self.indices, self.center_shape[1]), axis=-1)


def project(features, projector):
    """Map a dispersed feature map through the projector."""
    features.require_role("dispersed")
    return FeatureMap(projector.apply(features.grid), role="projected")


def average_center(train_features):
    """Element-wise mean over images, preserving the spatial layout."""
    maps = list(train_features)
    if not maps:
        raise DataError("average_center needs at least one feature map")
    shape = maps[0].grid.shape
    for m in maps[1:]:
        if m.grid.shape != shape:
            raise DataError(
                f"feature map shape mismatch: {m.grid.shape} vs {shape}"
            )
    acc = np.zeros(shape, dtype=np.float64)
    for m in maps:
        acc += m.grid
    return acc / len(maps)


def nearest_center(query, center):
    """1-NN search of every query vector within the center grid."""
    grid = query.grid if isinstance(query, FeatureMap) else np.asarray(query)
    return nearest_center_vectors(grid.reshape(-1, grid.shape[-1]), center,
                                  grid.shape[:-1])


def nearest_center_vectors(queries, center, out_shape=None):
    """argmin_j ||q - c_j|| per query, ties to the smallest row-major j.

    The argmin is selected via the expansion argmax_j (q.c_j - ||c_j||^2/2)
    in float32 (the distances of the winning pairs are then recomputed
    exactly in float64); at float32 resolution near-ties are genuine ties,
    so the selection stays deterministic and oracle-consistent on real data.
    """
    center = np.asarray(center, dtype=np.float64)
    ch, cw, cc = center.shape
    queries = np.asarray(queries, dtype=np.float64)
    if queries.shape[-1] != cc:
        raise DataError(
            f"channel mismatch: queries {queries.shape[-1]} vs center {cc}"
        )
    flat_centers = center.reshape(-1, cc)
    c32 = flat_centers.astype(np.float32)
    q32 = queries.astype(np.float32)
    scores = q32 @ c32.T
    scores -= 0.5 * np.sum(np.square(c32), axis=1)
    idx = np.argmax(scores, axis=1)
    dist = np.sqrt(np.sum(np.square(queries - flat_centers[idx]), axis=1))
    if out_shape is not None:
        idx = idx.reshape(out_shape)
        dist = dist.reshape(out_shape)
    return NearestAssignment(indices=idx, distances=dist, center_shape=(ch, cw))


def init_center(batches, projector, beta):
    """Initialize the center feature by batch-iterative feature alignment.

    Each batch is a stacked (B, H, W, C) array of dispersed features. The
    frozen projector is applied per vector and the batch is averaged into a
    query map; the first query map seeds the center, and every later one
    updates its matched center vectors by an EMA step with factor ``beta``.
    When several queries share one nearest center vector, the queries are
    averaged before the single EMA step, which keeps the update independent
    of query order. Unmatched center vectors are left unchanged.
    """
    if not projector.frozen:
        raise DataError("center initialization requires a frozen projector")
    center = None
    for batch in batches:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 4 or batch.shape[0] == 0:
            raise DataError("each center-init batch must be a non-empty (B,H,W,C)")
        projected = projector.apply(batch)
        query = projected.mean(axis=0)  # (H, W, C)
        if center is None:
            center = query.copy()
            continue
        h, w, c = center.shape
        flat_q = query.reshape(-1, c)
        assign = nearest_center_vectors(flat_q, center)
        flat_c = center.reshape(-1, c)
        sums = np.zeros_like(flat_c)
        counts = np.zeros(flat_c.shape[0])
        np.add.at(sums, assign.indices, flat_q)
        np.add.at(counts, assign.indices, 1.0)
        matched = counts > 0
        means = sums[matched] / counts[matched, None]
        flat_c[matched] = (1.0 - beta) * flat_c[matched] + beta * means
        center = flat_c.reshape(h, w, c)
    if center is None:
        raise DataError("center initialization needs at least one batch")
    return center


def center_loss(projected_batch, center):
    """Mean 1-NN Euclidean distance of projected vectors to the center.

    ``projected_batch`` is a stacked (B, H, W, C) array of projected
    features. Returns the scalar loss and the assignments (reused by the
    anomaly synthesis stage).
    """
    batch = np.asarray(projected_batch, dtype=np.float64)
    if batch.ndim != 4:
        raise DataError("center_loss expects a stacked (B, H, W, C) batch")
    assign = nearest_center_vectors(
        batch.reshape(-1, batch.shape[-1]), center, batch.shape[:-1]
    )
    return float(np.mean(assign.distances, dtype=np.float64)), assign


def center_loss_grad(projected_batch, center, assign, eps=1e-12):
    """Gradient of the center loss w.r.t. the projected vectors.

    Zero-distance vectors contribute zero gradient (subgradient of the
    Euclidean norm at its kink).
    """
    batch = np.asarray(projected_batch, dtype=np.float64)
    flat_u = batch.reshape(-1, batch.shape[-1])
    flat_c = np.asarray(center).reshape(-1, batch.shape[-1])
    diff = flat_u - flat_c[assign.indices.reshape(-1)]
    dist = assign.distances.reshape(-1, 1)
    safe = np.where(dist > eps, dist, 1.0)
    grad = np.where(dist > eps, diff / safe, 0.0) / flat_u.shape[0]
    return grad.reshape(batch.shape)
