"""Evaluation measures: symmetric Chamfer distance and average L1 depth error."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .geometry import DepthMap


class SpatialIndex:
    """Exact nearest-neighbor index over a point cloud.

    Ties are broken by smallest insertion index so queries are deterministic.
    """

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if points.shape[0] == 0:
            raise ValueError("empty point cloud")
        self.points = points
        self._tree = cKDTree(points)

    def __len__(self) -> int:
        return self.points.shape[0]

    def nearest(self, query: np.ndarray) -> tuple[np.ndarray, float]:
        """Exact nearest stored point and its Euclidean distance."""
        query = np.asarray(query, dtype=np.float64).reshape(3)
        dist, idx = self._tree.query(query)
        # Re-examine a slightly padded ball so exact ties resolve by index.
        candidates = self._tree.query_ball_point(query, dist * (1.0 + 1e-9) + 1e-300)
        if not candidates:
            return self.points[idx].copy(), float(dist)
        cand = np.asarray(candidates, dtype=np.int64)
        dists = np.linalg.norm(self.points[cand] - query, axis=1)
        best = dists.min()
        winner = int(cand[dists <= best].min())
        return self.points[winner].copy(), float(best)

    def nearest_distances(self, queries: np.ndarray) -> np.ndarray:
        """Distance from each query point to its nearest stored point."""
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        dists, _ = self._tree.query(queries)
        return dists


def nearest(query: np.ndarray, index: SpatialIndex) -> tuple[np.ndarray, float]:
    return index.nearest(query)


def chamfer(x: np.ndarray, y: np.ndarray) -> float:
    """Symmetric Chamfer distance: mean closest-point distance averaged over
    both directions (unsquared)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 3)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("empty point cloud")
    d_xy = SpatialIndex(y).nearest_distances(x)
    d_yx = SpatialIndex(x).nearest_distances(y)
    return 0.5 * (float(np.mean(d_xy)) + float(np.mean(d_yx)))


def avg_l1(pred: DepthMap, truth: DepthMap, near: float, far: float) -> float:
    """Mean absolute depth difference in 8-bit units.

    World depth maps linearly to [0, 255] over [near, far]; every pixel
    counts, with invalid pixels encoded as 0 so unfilled holes are penalized.
    """
    if pred.depth.shape != truth.depth.shape:
        raise ValueError(
            f"resolution mismatch: {pred.depth.shape} vs {truth.depth.shape}"
        )
    scale = 255.0 / (far - near)
    a = np.where(pred.valid, (pred.depth - near) * scale, 0.0)
    b = np.where(truth.valid, (truth.depth - near) * scale, 0.0)
    return float(np.mean(np.abs(a - b)))
