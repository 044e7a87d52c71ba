"""Dense linear layers with manual backprop, Adam updates, and a
finite-difference gradient checker.

Parameters and activations are float64 in memory; float32 is only used at
the file boundary (see tensorfile). Gradients accumulate with ``+=`` so a
multi-term objective can backpropagate each term separately before one
optimizer step.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DivergenceError


class LinearLayer:
    """Affine map y = W x + b with gradient slots mirroring W and b.

    ``x`` may be a single vector (in_dim,) or a batch (n, in_dim); the
    batched form applies the layer row-wise.
    """

    def __init__(self, weight, bias):
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.ndim != 1 or weight.shape[0] != bias.shape[0]:
            raise DataError(
                f"inconsistent layer shapes: weight {weight.shape}, bias {bias.shape}"
            )
        self.weight = weight
        self.bias = bias
        self.grad_weight = np.zeros_like(weight)
        self.grad_bias = np.zeros_like(bias)

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    @classmethod
    def init_normal(cls, in_dim, out_dim, rng):
        """Weights ~ N(0, 1/in_dim), biases 0."""
        w = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(out_dim, in_dim))
        return cls(w, np.zeros(out_dim))

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise DataError(
                f"input length {x.shape[-1]} does not match in_dim {self.in_dim}"
            )
        return x @ self.weight.T + self.bias

    def backward(self, x, upstream, need_input_grad=True):
        """Accumulate parameter gradients and return the input gradient.

        ``upstream`` is dL/dy with the same leading shape as ``x``.
        """
        x = np.asarray(x, dtype=np.float64)
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape[-1] != self.out_dim:
            raise DataError(
                f"upstream length {upstream.shape[-1]} does not match "
                f"out_dim {self.out_dim}"
            )
        if x.ndim == 1:
            self.grad_weight += np.outer(upstream, x)
            self.grad_bias += upstream
        else:
            self.grad_weight += upstream.reshape(-1, self.out_dim).T @ x.reshape(
                -1, self.in_dim
            )
            self.grad_bias += upstream.reshape(-1, self.out_dim).sum(axis=0)
        return upstream @ self.weight if need_input_grad else None

    def zero_grad(self):
        self.grad_weight[:] = 0.0
        self.grad_bias[:] = 0.0

    def parameters(self):
        return [self.weight, self.bias]

    def gradients(self):
        return [self.grad_weight, self.grad_bias]


@dataclass
class AdamState:
    """Per-parameter-group Adam accumulators (bias-corrected update)."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = None
    v: list = None

    def _ensure(self, params):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]


def adam_step(state, params, grads, name="params"):
    """One Adam update over a parameter group; zeroes the gradients after.

    Parameters are updated in place so that views held by layers stay valid.
    """
    state._ensure(params)
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient in parameter block '{name}'")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        g[:] = 0.0
    return params


@dataclass
class FiniteDifferenceReport:
    max_rel_error: float
    nonfinite_evals: int
    checked_coords: int


def finite_difference_check(loss_and_grad_fn, params, h=1e-3, max_coords_per_param=None, rng=None):
    """Compare analytic gradients against central differences.

    ``loss_and_grad_fn(params) -> (loss, grads)`` must be deterministic and
    must not mutate ``params``. Coordinates are checked exhaustively unless
    ``max_coords_per_param`` caps them (sampled with ``rng``). The relative
    error for one coordinate is |analytic - diff| / (|analytic| + |diff| + eps).
    """
    if h <= 0:
        raise DataError("finite-difference step h must be positive")
    params = [np.asarray(p, dtype=np.float64) for p in params]
    _, grads = loss_and_grad_fn(params)
    eps = 1e-12
    worst = 0.0
    nonfinite = 0
    checked = 0
    for pi, p in enumerate(params):
        flat = p.reshape(-1)
        n = flat.size
        if max_coords_per_param is not None and n > max_coords_per_param:
            idx = (rng or np.random.default_rng(0)).choice(
                n, size=max_coords_per_param, replace=False
            )
        else:
            idx = range(n)
        analytic = np.asarray(grads[pi], dtype=np.float64).reshape(-1)
        for k in idx:
            orig = flat[k]
            flat[k] = orig + h
            lp, _ = loss_and_grad_fn(params)
            flat[k] = orig - h
            lm, _ = loss_and_grad_fn(params)
            flat[k] = orig
            diff = (lp - lm) / (2.0 * h)
            if not (np.isfinite(lp) and np.isfinite(lm)):
                nonfinite += 1
                continue
            rel = abs(analytic[k] - diff) / (abs(analytic[k]) + abs(diff) + eps)
            worst = max(worst, rel)
            checked += 1
    return FiniteDifferenceReport(worst, nonfinite, checked)
