"""Joint training: center-constrained projection, anomaly synthesis, and
discriminative refinement in one multi-task objective.

Per batch the objective is

    L_c + gamma * ||theta||^2 + L_n + L_a + delta * (||theta||^2 + ||psi||^2)

where theta are the projector parameters and psi the discriminator's. The
projector receives gradients from all three losses and both regularizers;
the discriminator from the two BCE losses and its regularizer. The synthesis
length uses the batch's center loss as a detached constant.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .center import Projector, average_center, center_loss, init_center
from .aggregation import FeatureMap
from .dataset import load_dispersed_stack
from .discriminator import Discriminator, bce_loss_and_grad
from .errors import DataError, DivergenceError
from .manifest import subsample
from .nn import AdamState, adam_step
from .synthesis import SynthesisParams

log = logging.getLogger(__name__)


@dataclass
class LossReport:
    center: float
    normal: float
    anomaly: float
    reg_projector: float
    reg_joint: float
    total: float
    mean_normal_conf: float
    mean_anomaly_conf: float
    skipped_vectors: int = 0


def objective_forward_backward(projector, disc, center, batch, config,
                               synth_length=None, noise=None):
    """Evaluate the full objective on one dispersed batch and accumulate
    gradients into the projector and discriminator slots (zeroed first).

    ``synth_length`` overrides the detached synthesis length (the gradient
    checker freezes it at a snapshot); by default it is the batch's own
    center loss. ``noise`` supplies the pre-drawn perturbation for the
    gaussian ablation path.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4:
        raise DataError("objective expects a stacked (B, H, W, C) batch")
    n, h, w, c = batch.shape
    flat_t = batch.reshape(-1, c)

    projector.layer.zero_grad()
    disc.zero_grad()

    flat_u = projector.apply(flat_t)
    u4 = flat_u.reshape(batch.shape)
    l_center, assign = center_loss(u4, center)
    n_vec = flat_u.shape[0]
    # shared by the center gradient, the synthesis map, and its backward
    diff = flat_u - np.asarray(center).reshape(-1, c)[assign.indices.reshape(-1)]
    dist = assign.distances.reshape(-1)
    positive = dist > 1e-12
    safe = np.where(positive, dist, 1.0)

    if config.synthesis_method == "gaussian":
        if noise is None:
            raise DataError("gaussian synthesis requires a pre-drawn noise array")
        flat_z = flat_u + noise.reshape(flat_u.shape)
        valid = np.ones(n_vec, dtype=bool)
        length = 0.0
    else:
        snapshot = l_center if synth_length is None else synth_length
        length = SynthesisParams(config.alpha, snapshot).length
        valid = positive if length > 0 else np.ones(n_vec, dtype=bool)
        skipped = n_vec - int(np.count_nonzero(valid))
        if skipped:
            log.warning("synthesis skipped %d degenerate vector(s)", skipped)
        flat_z = flat_u + (length / safe)[:, None] * diff

    # one joint discriminator pass over normal and synthetic vectors (the
    # two invocations share parameters)
    all_valid = bool(valid.all())
    joint = np.concatenate(
        [flat_u, flat_z if all_valid else flat_z[valid]], axis=0
    )
    p_all, cache = disc.forward_batch(joint)
    p_u, p_z = p_all[:n_vec], p_all[n_vec:]
    l_normal, grad_pu = bce_loss_and_grad(p_u, 0)
    l_anomaly, grad_pz = bce_loss_and_grad(p_z, 1)

    theta_sq = float(sum(np.sum(np.square(p)) for p in projector.layer.parameters()))
    psi_sq = disc.sq_norm()
    reg_projector = config.gamma * theta_sq
    reg_joint = config.delta * (theta_sq + psi_sq)
    total = l_center + reg_projector + l_normal + l_anomaly + reg_joint

    # backward: dJ/du accumulates the center pull, the normal BCE, and the
    # anomaly BCE routed through the synthesis map
    grad_joint = disc.backward_batch(cache, np.concatenate([grad_pu, grad_pz]))
    grad_z = grad_joint[n_vec:]
    if not all_valid:
        full = np.zeros((n_vec, c))
        full[valid] = grad_z
        grad_z = full
    # center pull: unit direction / count, zero at the norm's kink
    grad_u = diff * (np.where(positive, 1.0, 0.0) / (safe * n_vec))[:, None]
    grad_u += grad_joint[:n_vec]
    if config.synthesis_method == "gaussian":
        grad_u += grad_z
    elif length > 0:
        # d/du [u + s*d/r] applied to g: g + s*(g/r - d (d.g)/r^3)
        dot = np.sum(diff * grad_z, axis=1)
        ray = grad_z + length * (
            grad_z / safe[:, None] - diff * (dot / safe**3)[:, None]
        )
        np.copyto(ray, 0.0, where=~valid[:, None])
        grad_u += ray
    else:
        grad_u += grad_z
    projector.backward(flat_t, grad_u, need_input_grad=False)

    coeff = 2.0 * (config.gamma + config.delta)
    projector.layer.grad_weight += coeff * projector.layer.weight
    projector.layer.grad_bias += coeff * projector.layer.bias
    for layer in disc.layers:
        layer.grad_weight += 2.0 * config.delta * layer.weight
        layer.grad_bias += 2.0 * config.delta * layer.bias

    report = LossReport(
        center=l_center,
        normal=l_normal,
        anomaly=l_anomaly,
        reg_projector=reg_projector,
        reg_joint=reg_joint,
        total=total,
        mean_normal_conf=float(np.mean(p_u)),
        mean_anomaly_conf=float(np.mean(p_z)) if p_z.size else float("nan"),
        skipped_vectors=int(np.count_nonzero(~valid)),
    )
    return report


def gradient_check_report(projector, disc, center, batch, config, h=1e-3,
                          max_coords_per_param=None, rng=None):
    """Finite-difference check of the full objective gradient.

    The synthesis length is frozen at the base point's center loss (it is a
    detached constant in the objective), so the analytic gradient and the
    differenced function agree in semantics.
    """
    from .nn import finite_difference_check

    batch = np.asarray(batch, dtype=np.float64)
    flat_u = projector.apply(batch.reshape(-1, batch.shape[-1]))
    snapshot, _ = center_loss(flat_u.reshape(batch.shape), center)
    params = projector.layer.parameters() + disc.parameters()

    def loss_and_grad(_params):
        report = objective_forward_backward(
            projector, disc, center, batch, config, synth_length=snapshot
        )
        grads = [
            g.copy()
            for g in projector.layer.gradients() + disc.gradients()
        ]
        return report.total, grads

    return finite_difference_check(
        loss_and_grad, params, h=h,
        max_coords_per_param=max_coords_per_param, rng=rng,
    )


def objective_step(projector, disc, center, batch, config, opt_projector,
                   opt_discriminator, noise_rng=None):
    """One forward/backward pass plus one Adam step per parameter group."""
    noise = None
    if config.synthesis_method == "gaussian":
        if noise_rng is None:
            raise DataError("gaussian synthesis requires a noise rng")
        batch = np.asarray(batch, dtype=np.float64)
        noise = noise_rng.normal(
            0.0, config.gaussian_noise_std, size=batch.shape
        )
    report = objective_forward_backward(
        projector, disc, center, batch, config, noise=noise
    )
    if not np.isfinite(report.total):
        raise DivergenceError(
            f"non-finite objective (L_c={report.center}, L_n={report.normal}, "
            f"L_a={report.anomaly})"
        )
    adam_step(
        opt_projector,
        projector.layer.parameters(),
        projector.layer.gradients(),
        name="projector",
    )
    adam_step(opt_discriminator, disc.parameters(), disc.gradients(),
              name="discriminator")
    return report


@dataclass
class TrainedModel:
    projector: Projector
    discriminator: Discriminator
    center: np.ndarray
    config: object
    history: list  # one dict per epoch


def _batches(n, batch_size, order=None):
    idx = np.arange(n) if order is None else order
    return [idx[i : i + batch_size] for i in range(0, n, batch_size)]


def initialize_center(features, projector, config):
    """Center feature per the configured method, on manifest-order batches."""
    batches = (
        features[b] for b in _batches(features.shape[0], config.batch_size)
    )
    if config.center_method == "average":
        projected = [
            FeatureMap(projector.apply(features[i]), role="projected")
            for i in range(features.shape[0])
        ]
        return average_center(projected)
    return init_center(batches, projector, config.beta)


def train(train_manifest, config, progress=None):
    """Full training run over a train manifest; returns the trained model.

    ``progress(epoch_row)`` is invoked after every epoch with the logged
    scalars, so callers can stream partial logs even if a later epoch
    diverges.
    """
    if train_manifest.split != "train":
        raise DataError("training requires a train-split manifest")
    selected = subsample(train_manifest, config.subsample_ratio, config.seed)
    features = load_dispersed_stack(selected, config)
    n, h, w, c = features.shape

    seeds = np.random.SeedSequence(config.seed).spawn(4)
    rng_projector = np.random.default_rng(seeds[0])
    rng_disc = np.random.default_rng(seeds[1])
    rng_shuffle = np.random.default_rng(seeds[2])
    rng_noise = np.random.default_rng(seeds[3])

    projector = Projector.init_normal(c, rng_projector)
    center = initialize_center(features, projector, config)
    projector.unfreeze()
    disc = Discriminator.init_normal(c, rng_disc)
    opt_projector = AdamState(lr=config.lr_projector)
    opt_disc = AdamState(lr=config.lr_discriminator)

    history = []
    for epoch in range(config.epochs):
        order = rng_shuffle.permutation(n)
        rows = []
        for batch_idx in _batches(n, config.batch_size, order):
            try:
                report = objective_step(
                    projector, disc, center, features[batch_idx], config,
                    opt_projector, opt_disc, noise_rng=rng_noise,
                )
            except DivergenceError as exc:
                raise DivergenceError(
                    f"epoch {epoch}: {exc}"
                ) from exc
            rows.append(report)
        row = {
            "epoch": epoch,
            "center_loss": float(np.mean([r.center for r in rows])),
            "normal_loss": float(np.mean([r.normal for r in rows])),
            "anomaly_loss": float(np.mean([r.anomaly for r in rows])),
            "total": float(np.mean([r.total for r in rows])),
            "mean_normal_conf": float(np.mean([r.mean_normal_conf for r in rows])),
            "mean_anomaly_conf": float(np.mean([r.mean_anomaly_conf for r in rows])),
        }
        history.append(row)
        if progress is not None:
            progress(row)
    return TrainedModel(projector, disc, center, config, history)
