"""Matplotlib figure rendering for training and evaluation reports.

Figures are written next to the delimited outputs they summarize; every
function is a no-op-safe file producer with the Agg backend.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_loss_curves(history, path):
    """Per-epoch loss components and discriminator confidences."""
    if not history:
        return
    epochs = [row["epoch"] for row in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    for key, label in [
        ("center_loss", "center"),
        ("normal_loss", "normal BCE"),
        ("anomaly_loss", "anomaly BCE"),
    ]:
        ax1.plot(epochs, [row[key] for row in history], label=label)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend(fontsize=8)
    ax2.plot(epochs, [row["mean_normal_conf"] for row in history],
             label="mean D(normal)")
    ax2.plot(epochs, [row["mean_anomaly_conf"] for row in history],
             label="mean D(synthetic)")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("confidence")
    ax2.set_ylim(-0.05, 1.05)
    ax2.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def _roc_points(scores, labels):
    order = np.argsort(-scores, kind="mergesort")
    y = labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    tpr = np.r_[0.0, tp / max(tp[-1], 1)]
    fpr = np.r_[0.0, fp / max(fp[-1], 1)]
    return fpr, tpr


def render_eval_figures(fig_dir, scores, labels, pixel_maps=None, masks=None):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    fig, ax = plt.subplots(figsize=(4, 4))
    fpr, tpr = _roc_points(scores, labels)
    ax.plot(fpr, tpr)
    ax.plot([0, 1], [0, 1], ls=":", c="gray")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("image-level ROC")
    _save(fig, os.path.join(fig_dir, "roc_curve.png"))

    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    bins = np.linspace(0.0, 1.0, 33)
    ax.hist(scores[labels == 0], bins=bins, alpha=0.6, label="normal")
    ax.hist(scores[labels == 1], bins=bins, alpha=0.6, label="anomalous")
    ax.set_xlabel("image score")
    ax.set_ylabel("count")
    ax.legend(fontsize=8)
    _save(fig, os.path.join(fig_dir, "score_distribution.png"))

    if pixel_maps is not None and masks is not None:
        from .metrics import PRO_MAX_THRESHOLDS, _pro_curve

        pro_fpr, pro = _pro_curve(pixel_maps, masks, PRO_MAX_THRESHOLDS)
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.plot(np.r_[0.0, pro_fpr], np.r_[0.0, pro])
        ax.axvline(0.3, ls=":", c="gray")
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("per-region overlap")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        _save(fig, os.path.join(fig_dir, "pro_curve.png"))


def render_projection_scatter(coords_u, coords_z, path):
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.scatter(coords_u[:, 0], coords_u[:, 1], s=4, alpha=0.5, label="projected")
    ax.scatter(coords_z[:, 0], coords_z[:, 1], s=4, alpha=0.5, label="synthetic")
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    ax.legend(fontsize=8)
    _save(fig, path)
