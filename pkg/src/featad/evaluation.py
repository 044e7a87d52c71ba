"""Scoring and evaluation over a test manifest: per-image scores, pixel
heatmaps, and the metric report."""

import csv
import json
import os

import numpy as np

from .center import project
from .dataset import load_dispersed_entry
from .errors import DataError
from .metrics import evaluate
from .scoring import score_entry
from .tensorfile import read_mask, write_heatmap, write_tensor

METRIC_COLUMNS = ["image_auroc", "image_ap", "pixel_auroc", "pixel_ap", "pixel_pro"]


def score_manifest(model, manifest, smoothing_sigma=None, on_entry=None):
    """Score every entry; returns (ids, labels, results) in manifest order."""
    if not manifest.entries:
        raise DataError(f"manifest {manifest.path} has no entries")
    config = model.config
    sigma = config.smoothing_sigma if smoothing_sigma is None else smoothing_sigma
    ids, labels, results = [], [], []
    for entry in manifest.entries:
        dispersed = load_dispersed_entry(entry, config)
        projected = project(dispersed, model.projector)
        result = score_entry(
            projected, model.discriminator, entry.image_dims, sigma
        )
        ids.append(entry.id)
        labels.append(1 if entry.label == "anomalous" else 0)
        results.append(result)
        if on_entry is not None:
            on_entry(entry, result)
    return ids, np.array(labels), results


def load_masks(manifest):
    """Ground-truth pixel masks; normal entries yield all-zero masks."""
    masks = []
    for entry in manifest.entries:
        if entry.mask is None:
            masks.append(np.zeros(entry.image_dims, dtype=bool))
        else:
            mask = read_mask(entry.mask)
            if mask.shape != entry.image_dims:
                raise DataError(
                    f"entry {entry.id}: mask shape {mask.shape} does not match "
                    f"image_dims {entry.image_dims}"
                )
            masks.append(mask)
    return masks


def write_scores_csv(path, ids, scores, labels):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "score", "label"])
        for i, s, l in zip(ids, scores, labels):
            writer.writerow([i, f"{s:.9f}", "anomalous" if l else "normal"])


def write_metrics(out_dir, category, metric_values):
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump({"category": category, **metric_values}, fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category"] + METRIC_COLUMNS)
        writer.writerow(
            [category]
            + [
                f"{metric_values[c]:.6f}" if c in metric_values else ""
                for c in METRIC_COLUMNS
            ]
        )


def run_score(model, manifest, out_dir, smoothing_sigma=None, heatmaps=True):
    """Scores and heatmaps only; no labels are interpreted, no metrics."""
    os.makedirs(out_dir, exist_ok=True)
    heat_dir = os.path.join(out_dir, "heatmaps")
    if heatmaps:
        os.makedirs(heat_dir, exist_ok=True)

    def save_heatmap(entry, result):
        if heatmaps:
            write_heatmap(os.path.join(heat_dir, entry.id + ".pgm"),
                          result.pixel_map)
            write_tensor(os.path.join(heat_dir, entry.id + ".pbft"),
                         result.pixel_map)

    ids, labels, results = score_manifest(
        model, manifest, smoothing_sigma, on_entry=save_heatmap
    )
    scores = np.array([r.image_score for r in results])
    write_scores_csv(os.path.join(out_dir, "scores.csv"), ids, scores, labels)
    return ids, scores


def run_eval(model, manifest, out_dir, category="dataset", pixel_metrics=True,
             smoothing_sigma=None, heatmaps=True, figures=True):
    """Full evaluation: files under ``out_dir``, returns the metric dict."""
    if manifest.split != "test":
        raise DataError("evaluation requires a test-split manifest")
    os.makedirs(out_dir, exist_ok=True)
    heat_dir = os.path.join(out_dir, "heatmaps")
    if heatmaps:
        os.makedirs(heat_dir, exist_ok=True)

    def save_heatmap(entry, result):
        if heatmaps:
            write_heatmap(os.path.join(heat_dir, entry.id + ".pgm"),
                          result.pixel_map)
            write_tensor(os.path.join(heat_dir, entry.id + ".pbft"),
                         result.pixel_map)

    ids, labels, results = score_manifest(
        model, manifest, smoothing_sigma, on_entry=save_heatmap
    )
    scores = np.array([r.image_score for r in results])
    write_scores_csv(os.path.join(out_dir, "scores.csv"), ids, scores, labels)

    pixel_maps = masks = None
    if pixel_metrics:
        masks = load_masks(manifest)
        pixel_maps = [r.pixel_map for r in results]
    metric_values = evaluate(scores, labels, pixel_maps, masks)
    write_metrics(out_dir, category, metric_values)
    if figures:
        from .report import render_eval_figures

        render_eval_figures(
            os.path.join(out_dir, "figures"), scores, labels, pixel_maps, masks
        )
    return metric_values
