"""Evaluation metrics: AUROC, average precision, and per-region overlap.

AUROC uses the rank (Mann-Whitney) formulation with ties counting one half.
AP is the step-interpolated area under precision-recall over descending
score thresholds. PRO averages per-connected-region coverage (8-neighbor
regions) over a descending threshold sweep, integrated against the global
false-positive rate up to ``fpr_limit`` and normalized by it.
"""

import numpy as np
from scipy import ndimage

from .errors import MetricUndefinedError

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)
PRO_FPR_LIMIT = 0.3
PRO_MAX_THRESHOLDS = 500


def _scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1).astype(int)
    if scores.shape != labels.shape:
        raise MetricUndefinedError("scores and labels must have equal length")
    return scores, labels


def auroc(scores, labels):
    """Probability that a positive outranks a negative; ties count 1/2."""
    scores, labels = _scores_labels(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError(
            f"AUROC needs both classes, got {n_pos} positive / {n_neg} negative"
        )
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    first_rank = np.cumsum(counts) - counts + 1  # 1-based rank of group start
    avg_rank = first_rank + (counts - 1) / 2.0
    ranks = avg_rank[inverse]
    u_stat = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_stat / (n_pos * n_neg))


def average_precision(scores, labels):
    """Step-interpolated area under precision-recall."""
    scores, labels = _scores_labels(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise MetricUndefinedError("average precision needs at least one positive")
    order = np.argsort(-scores, kind="mergesort")
    y = labels[order]
    s = scores[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    last_of_group = np.r_[s[1:] != s[:-1], True]
    tp_k = tp[last_of_group]
    fp_k = fp[last_of_group]
    precision = tp_k / (tp_k + fp_k)
    recall = tp_k / n_pos
    return float(np.sum(np.diff(recall, prepend=0.0) * precision))


def _pro_curve(pixel_maps, masks, max_thresholds):
    """(fpr, pro) samples over a descending threshold sweep, fpr ascending."""
    region_values = []   # sorted scores inside each connected GT region
    negative_values = []
    for pm, mk in zip(pixel_maps, masks):
        pm = np.asarray(pm, dtype=np.float64)
        mk = np.asarray(mk).astype(bool)
        if pm.shape != mk.shape:
            raise MetricUndefinedError(
                f"pixel map shape {pm.shape} does not match mask {mk.shape}"
            )
        negative_values.append(pm[~mk])
        labeled, n_regions = ndimage.label(mk, structure=EIGHT_CONNECTED)
        for r in range(1, n_regions + 1):
            region_values.append(np.sort(pm[labeled == r]))
    if not region_values:
        raise MetricUndefinedError("PRO needs at least one anomalous region")
    negatives = np.sort(np.concatenate(negative_values))
    if negatives.size == 0:
        raise MetricUndefinedError("PRO needs at least one normal pixel")

    all_values = np.unique(np.concatenate([np.concatenate(region_values), negatives]))
    if all_values.size > max_thresholds:
        qs = np.quantile(all_values, np.linspace(0.0, 1.0, max_thresholds))
        thresholds = np.unique(qs)
    else:
        thresholds = all_values
    thresholds = thresholds[::-1]  # descending

    coverage = np.zeros(thresholds.size)
    for vals in region_values:
        # count of region pixels >= tau, vectorized over the sweep
        counts = vals.size - np.searchsorted(vals, thresholds, side="left")
        coverage += counts / vals.size
    pro = coverage / len(region_values)
    fp = negatives.size - np.searchsorted(negatives, thresholds, side="left")
    fpr = fp / negatives.size
    return fpr, pro


def pro_score(pixel_maps, masks, fpr_limit=PRO_FPR_LIMIT,
              max_thresholds=PRO_MAX_THRESHOLDS):
    """Normalized area under the PRO-vs-FPR curve up to ``fpr_limit``."""
    fpr, pro = _pro_curve(pixel_maps, masks, max_thresholds)
    # anchor at fpr 0 (nothing predicted above the top threshold)
    fpr = np.r_[0.0, fpr]
    pro = np.r_[0.0, pro]
    if fpr[-1] < fpr_limit:
        # sweep covers every value, so this only happens with no negatives
        # above the lowest threshold; extend flat
        fpr = np.r_[fpr, fpr_limit]
        pro = np.r_[pro, pro[-1]]
    limit_pro = float(np.interp(fpr_limit, fpr, pro))
    keep = fpr <= fpr_limit
    xs = np.r_[fpr[keep], fpr_limit]
    ys = np.r_[pro[keep], limit_pro]
    return float(np.trapezoid(ys, xs) / fpr_limit)


def evaluate(image_scores, image_labels, pixel_maps=None, masks=None):
    """All metrics for one category; pixel metrics only when maps given."""
    out = {
        "image_auroc": auroc(image_scores, image_labels),
        "image_ap": average_precision(image_scores, image_labels),
    }
    if pixel_maps is not None:
        flat_scores = np.concatenate([np.ravel(m) for m in pixel_maps])
        flat_labels = np.concatenate(
            [np.ravel(np.asarray(m).astype(bool)).astype(int) for m in masks]
        )
        out["pixel_auroc"] = auroc(flat_scores, flat_labels)
        out["pixel_ap"] = average_precision(flat_scores, flat_labels)
        out["pixel_pro"] = pro_score(pixel_maps, masks)
    return out
