"""Three-layer discriminator mapping feature vectors to an anomaly
confidence in (0, 1), with the clamped BCE losses used for boundary
refinement. Both training-time invocations (normal and synthetic features)
run through the same parameters.
"""

import numpy as np

from .errors import DataError
from .nn import LinearLayer

LEAKY_SLOPE = 0.2
BCE_CLAMP = 1e-7


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Discriminator:
    """MLP: C -> C (leaky ReLU) -> C (leaky ReLU) -> 1 (sigmoid)."""

    def __init__(self, layers):
        if len(layers) != 3 or layers[2].out_dim != 1:
            raise DataError("discriminator needs three layers ending in one unit")
        self.layers = layers

    @classmethod
    def init_normal(cls, channels, rng):
        return cls(
            [
                LinearLayer.init_normal(channels, channels, rng),
                LinearLayer.init_normal(channels, channels, rng),
                LinearLayer.init_normal(channels, 1, rng),
            ]
        )

    @property
    def channels(self):
        return self.layers[0].in_dim

    def forward_batch(self, x):
        """Confidences for an (n, C) batch, plus caches for backward.

        Leaky ReLU is applied in place; its input sign is recovered from the
        activation sign in backward (leaky preserves sign).
        """
        x = np.asarray(x, dtype=np.float64)
        h1 = self.layers[0].forward(x)
        np.maximum(h1, LEAKY_SLOPE * h1, out=h1)
        h2 = self.layers[1].forward(h1)
        np.maximum(h2, LEAKY_SLOPE * h2, out=h2)
        a3 = self.layers[2].forward(h2)
        p = _sigmoid(a3[:, 0])
        return p, (x, h1, h2, p)

    def forward(self, v):
        """Confidence in (0, 1) for one vector."""
        p, _ = self.forward_batch(np.asarray(v, dtype=np.float64)[None, :])
        return float(p[0])

    def backward_batch(self, cache, grad_p, need_input_grad=True):
        """Backprop dL/dp; accumulates layer gradients, returns dL/dx."""
        x, h1, h2, p = cache
        da3 = (grad_p * p * (1.0 - p))[:, None]
        dh2 = self.layers[2].backward(h2, da3)
        np.multiply(dh2, LEAKY_SLOPE, out=dh2, where=h2 <= 0)
        dh1 = self.layers[1].backward(h1, dh2)
        np.multiply(dh1, LEAKY_SLOPE, out=dh1, where=h1 <= 0)
        return self.layers[0].backward(x, dh1, need_input_grad=need_input_grad)

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def gradients(self):
        return [g for layer in self.layers for g in layer.gradients()]

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def sq_norm(self):
        return float(sum(np.sum(np.square(p)) for p in self.parameters()))


def bce_loss_and_grad(p, target):
    """Mean BCE of confidences against a constant 0/1 target.

    Log arguments are clamped to [1e-7, 1 - 1e-7]; saturated confidences
    therefore contribute a finite constant and zero gradient.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        return 0.0, np.zeros_like(p)
    clamped = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    inside = (p > BCE_CLAMP) & (p < 1.0 - BCE_CLAMP)
    n = p.size
    if target == 1:
        loss = float(np.mean(-np.log(clamped)))
        grad = np.where(inside, -1.0 / (clamped * n), 0.0)
    elif target == 0:
        loss = float(np.mean(-np.log(1.0 - clamped)))
        grad = np.where(inside, 1.0 / ((1.0 - clamped) * n), 0.0)
    else:
        raise DataError(f"BCE target must be 0 or 1, got {target}")
    return loss, grad


def normal_loss(disc, vectors):
    """Mean BCE of D(u) against ground truth 0; returns loss only."""
    p, _ = disc.forward_batch(vectors)
    loss, _ = bce_loss_and_grad(p, 0)
    return loss


def anomaly_loss(disc, vectors):
    """Mean BCE of D(z) against ground truth 1; returns loss only."""
    p, _ = disc.forward_batch(vectors)
    loss, _ = bce_loss_and_grad(p, 1)
    return loss
