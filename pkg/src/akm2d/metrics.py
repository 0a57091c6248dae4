"""Pixel-level detection scores and sampling-pattern distances."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

__all__ = ["MetricsRecord", "detection_metrics", "sampling_metrics", "nearest_sample_distance"]


@dataclass
class MetricsRecord:
    n_points: int
    precision: float
    recall: float
    f_measure: float
    er: float
    ammd: float
    mmd: float
    wall_time_s: float = 0.0

    def as_dict(self):
        return asdict(self)


def detection_metrics(est_region, true_region):
    """Precision, recall and F-measure of a binary map against the truth.

    Empty denominators: both maps empty scores (1, 1, 1); an empty estimate
    against a nonempty truth scores (0, 0, 0); a nonempty estimate against an
    empty truth scores (0, 0, 0).
    """
    est = np.asarray(est_region, dtype=bool)
    true = np.asarray(true_region, dtype=bool)
    if est.shape != true.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {true.shape}")
    n_est, n_true = int(est.sum()), int(true.sum())
    if n_est == 0 and n_true == 0:
        return 1.0, 1.0, 1.0
    if n_est == 0 or n_true == 0:
        return 0.0, 0.0, 0.0
    hit = int(np.logical_and(est, true).sum())
    p = hit / n_est
    r = hit / n_true
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def nearest_sample_distance(points, grid):
    """Distance from every grid cell to its nearest sample, shape ``(m, m)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    coords = grid.coords(np.arange(grid.size))
    dist, _ = cKDTree(pts).query(coords)
    return dist.reshape(grid.m, grid.m)


def sampling_metrics(points, true_region, grid, dist=None):
    """Exploitation ratio, anomaly max-min distance and max-min distance.

    ``points`` are sampled coordinates (assumed to be grid cells). ``dist``
    may pass a precomputed nearest-sample distance field.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("sampling_metrics needs at least one sampled point")
    true = np.asarray(true_region, dtype=bool)
    if dist is None:
        dist = nearest_sample_distance(pts, grid)
    ii = np.clip(np.rint(pts[:, 0] * grid.m).astype(int) - 1, 0, grid.m - 1)
    jj = np.clip(np.rint(pts[:, 1] * grid.m).astype(int) - 1, 0, grid.m - 1)
    er = float(true[ii, jj].mean())
    ammd = float(dist[true].max()) if true.any() else 0.0
    mmd = float(dist.max())
    return er, ammd, mmd

