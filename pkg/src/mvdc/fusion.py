"""Fuse multi-view depth maps back into a point cloud.

Pipeline: back-project every valid pixel of every view, keep points confirmed
by enough other views (voting), then drop points with too few close neighbors
(radius outlier removal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import CameraRig, DepthMap, backproject_map

PGM_STEPS = 65534  # quantization intervals of the 16-bit depth file encoding


def default_depth_tol(rig: CameraRig) -> float:
    """Two file-quantization steps: absorbs encode/decode error without
    admitting genuinely misplaced points."""
    return 2.0 * (rig.far - rig.near) / PGM_STEPS


@dataclass
class VotedPoints:
    """Back-projected points with their source view and accumulated votes."""

    positions: np.ndarray
    source_views: np.ndarray
    votes: np.ndarray

    def __len__(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def empty(cls) -> "VotedPoints":
        return cls(
            positions=np.empty((0, 3), dtype=np.float64),
            source_views=np.empty(0, dtype=np.int64),
            votes=np.empty(0, dtype=np.int64),
        )


@dataclass
class FuseParams:
    vote_threshold: int = 7
    depth_tol: float | None = None
    radius: float = 0.006
    min_neighbors: int = 6
    reject_occluded: bool = False


def _check_alignment(maps: list[DepthMap], rig: CameraRig) -> None:
    if len(maps) != rig.num_views:
        raise ValueError(f"expected {rig.num_views} maps, got {len(maps)}")
    got = tuple(m.view_index for m in maps)
    if got != rig.view_ids:
        raise ValueError(f"maps misaligned with rig: views {got} vs {rig.view_ids}")


def backproject_all(maps: list[DepthMap], rig: CameraRig) -> VotedPoints:
    """Union of back-projections over all views; every point starts with one
    vote (its own view)."""
    _check_alignment(maps, rig)
    positions = []
    views = []
    for dmap, cam in zip(maps, rig.cameras):
        pts = backproject_map(dmap, cam)
        positions.append(pts)
        views.append(np.full(pts.shape[0], cam.index, dtype=np.int64))
    pos = np.concatenate(positions) if positions else np.empty((0, 3))
    src = np.concatenate(views) if views else np.empty(0, dtype=np.int64)
    return VotedPoints(positions=pos, source_views=src, votes=np.ones(len(src), dtype=np.int64))


def vote_filter(
    points: VotedPoints,
    maps: list[DepthMap],
    rig: CameraRig,
    threshold: int = 7,
    depth_tol: float | None = None,
    reject_occluded: bool = False,
) -> np.ndarray:
    """Keep points confirmed by at least `threshold` views in total.

    A point earns a vote from another view when its reprojection lands on a
    valid pixel and is not in free space in front of the surface stored there
    (depth >= stored - depth_tol). Points hidden behind the stored surface
    still count as falling on the shape; pass reject_occluded=True to require
    the stored depth to match within depth_tol on both sides instead.
    """
    _check_alignment(maps, rig)
    if not 1 <= threshold <= rig.num_views:
        raise ValueError(f"threshold must be in [1, {rig.num_views}]")
    if depth_tol is None:
        depth_tol = default_depth_tol(rig)
    n = len(points)
    if n == 0:
        return np.empty((0, 3), dtype=np.float64)
    votes = np.ones(n, dtype=np.int64)
    for dmap, cam in zip(maps, rig.cameras):
        other = points.source_views != cam.index
        if not other.any():
            continue
        pts = points.positions[other]
        cam_pts = pts @ cam.r.T + cam.t
        z = cam_pts[:, 2]
        front = z > 0.0
        ix = np.full(z.shape, -1, dtype=np.int64)
        iy = np.full(z.shape, -1, dtype=np.int64)
        ix[front] = np.rint(cam.fx * cam_pts[front, 0] / z[front] + cam.cx).astype(np.int64)
        iy[front] = np.rint(cam.fy * cam_pts[front, 1] / z[front] + cam.cy).astype(np.int64)
        inside = front & (ix >= 0) & (ix < cam.width) & (iy >= 0) & (iy < cam.height)
        hit = np.zeros(z.shape, dtype=bool)
        hit[inside] = dmap.valid[iy[inside], ix[inside]]
        ok = hit.copy()
        stored = np.zeros(z.shape, dtype=np.float64)
        stored[hit] = dmap.depth[iy[hit], ix[hit]]
        if reject_occluded:
            ok[hit] = np.abs(z[hit] - stored[hit]) <= depth_tol
        else:
            ok[hit] = z[hit] >= stored[hit] - depth_tol
        votes[other] += ok
    points.votes = votes
    return points.positions[votes >= threshold].copy()


def radius_outlier_removal(
    cloud: np.ndarray, radius: float = 0.006, min_neighbors: int = 6
) -> np.ndarray:
    """Keep points with at least `min_neighbors` other points within `radius`
    (boundary distances inclusive)."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    if cloud.shape[0] == 0:
        return cloud.copy()
    tree = cKDTree(cloud)
    counts = tree.query_ball_point(cloud, radius, return_length=True)
    # query_ball_point counts the point itself.
    return cloud[counts - 1 >= min_neighbors].copy()


def fuse(maps: list[DepthMap], rig: CameraRig, params: FuseParams | None = None) -> np.ndarray:
    """backproject_all -> vote_filter -> radius_outlier_removal."""
    if params is None:
        params = FuseParams()
    points = backproject_all(maps, rig)
    kept = vote_filter(
        points,
        maps,
        rig,
        threshold=params.vote_threshold,
        depth_tol=params.depth_tol,
        reject_occluded=params.reject_occluded,
    )
    return radius_outlier_removal(kept, radius=params.radius, min_neighbors=params.min_neighbors)
