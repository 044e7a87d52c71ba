"""Two-component projection of projected and synthetic feature vectors,
for scatter-style inspection of how the boundary separates them."""

import csv

import numpy as np

from .center import center_loss, project
from .dataset import load_dispersed_entry
from .errors import DataError
from .synthesis import SynthesisParams, synthesize


def top_components(vectors, k=2, iters=500, tol=1e-12, seed=0):
    """Leading eigenpairs of the covariance via power iteration + deflation.

    Returns (components (k, d) row vectors, variances (k,)).
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError("component analysis needs a (n >= 2, d) matrix")
    x = x - x.mean(axis=0)
    cov = (x.T @ x) / (x.shape[0] - 1)
    rng = np.random.default_rng(seed)
    d = cov.shape[0]
    comps = np.zeros((k, d))
    variances = np.zeros(k)
    for j in range(k):
        v = rng.normal(size=d)
        v /= np.linalg.norm(v)
        for _ in range(iters):
            nv = cov @ v
            norm = np.linalg.norm(nv)
            if norm == 0:
                break
            nv /= norm
            if np.linalg.norm(nv - v) < tol:
                v = nv
                break
            v = nv
        variances[j] = float(v @ cov @ v)
        comps[j] = v
        cov = cov - variances[j] * np.outer(v, v)
    return comps, variances


def collect_vectors(model, manifest, max_per_role=2000):
    """Pooled projected (u) and synthetic (z) vectors over a manifest."""
    config = model.config
    stacks = []
    for entry in manifest.entries:
        dispersed = load_dispersed_entry(entry, config)
        stacks.append(project(dispersed, model.projector).grid)
    u4 = np.stack(stacks)
    loss_value, assign = center_loss(u4, model.center)
    params = SynthesisParams(config.alpha, loss_value)
    z4, valid = synthesize(u4, assign, model.center, params, on_degenerate="skip")
    c = u4.shape[-1]
    u = u4.reshape(-1, c)
    z = z4.reshape(-1, c)[valid.reshape(-1)]
    rng = np.random.default_rng(config.seed)
    if u.shape[0] > max_per_role:
        u = u[np.sort(rng.permutation(u.shape[0])[:max_per_role])]
    if z.shape[0] > max_per_role:
        z = z[np.sort(rng.permutation(z.shape[0])[:max_per_role])]
    return u, z


def run_diagnose(model, manifest, csv_path, max_per_role=2000):
    """Write (x, y, role) rows of the top-2 projection; returns variances."""
    u, z = collect_vectors(model, manifest, max_per_role)
    pooled = np.concatenate([u, z], axis=0)
    comps, variances = top_components(pooled, k=2, seed=model.config.seed)
    center = pooled.mean(axis=0)
    coords_u = (u - center) @ comps.T
    coords_z = (z - center) @ comps.T
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "role"])
        for row in coords_u:
            writer.writerow([f"{row[0]:.9f}", f"{row[1]:.9f}", "projected"])
        for row in coords_z:
            writer.writerow([f"{row[0]:.9f}", f"{row[1]:.9f}", "synthetic"])
    return coords_u, coords_z, variances
