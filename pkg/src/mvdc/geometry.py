"""Shape normalization, the 8-camera cube rig, projection, and depth rendering.

Point clouds are plain (N, 3) float64 arrays in model space. A shape is
normalized by centering it on its bounding-box midpoint and scaling it so it
fits inside a sphere of radius SPHERE_RADIUS around the origin; all cameras
are placed on the corners of a cube around that sphere, looking at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError

SPHERE_RADIUS = 0.2

# The frustum depth window [near, far] is centered on the camera-to-origin
# distance with 10% slack around the shape sphere, so every in-sphere depth
# encodes strictly inside the window (and clear of the background code).
DEPTH_MARGIN = 1.1

# Canonical corner numbering of the camera cube (index 1..8). The view
# subsets used for reduced rigs refer to these ids.
CORNER_SIGNS = (
    (+1, +1, +1),
    (-1, +1, +1),
    (+1, -1, +1),
    (-1, -1, +1),
    (+1, +1, -1),
    (-1, +1, -1),
    (+1, -1, -1),
    (-1, -1, -1),
)

RIG_SUBSETS = {
    8: (1, 2, 3, 4, 5, 6, 7, 8),
    5: (1, 3, 5, 6, 8),
    3: (1, 3, 5),
}


@dataclass
class NormalizationRecord:
    """Inverse transform of normalize_shape: p_orig = p * scale_factor + center."""

    center: np.ndarray
    scale_factor: float


@dataclass
class Camera:
    """Pinhole camera: pixel = K (R p + t) / depth, looking at the world origin."""

    k: np.ndarray
    r: np.ndarray
    t: np.ndarray
    index: int
    width: int
    height: int

    @property
    def fx(self) -> float:
        return float(self.k[0, 0])

    @property
    def fy(self) -> float:
        return float(self.k[1, 1])

    @property
    def cx(self) -> float:
        return float(self.k[0, 2])

    @property
    def cy(self) -> float:
        return float(self.k[1, 2])

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.r.T @ self.t

    @property
    def view_dir(self) -> np.ndarray:
        """Unit optical-axis direction in world coordinates."""
        return self.r[2].copy()


@dataclass
class CameraRig:
    cameras: list[Camera]
    cube_half_side: float
    resolution: int
    splat_size: int = 1
    fov_fill_ratio: float = 0.8

    @property
    def num_views(self) -> int:
        return len(self.cameras)

    @property
    def view_ids(self) -> tuple[int, ...]:
        return tuple(cam.index for cam in self.cameras)

    @property
    def distance(self) -> float:
        """Camera-to-origin distance (cube corner radius)."""
        return float(self.cube_half_side * np.sqrt(3.0))

    @property
    def near(self) -> float:
        return self.distance - DEPTH_MARGIN * SPHERE_RADIUS

    @property
    def far(self) -> float:
        return self.distance + DEPTH_MARGIN * SPHERE_RADIUS

    @property
    def pixel_footprint(self) -> float:
        """World-space size of one pixel at the rig distance."""
        return self.distance / self.cameras[0].fx

    def camera_by_view(self, view_index: int) -> Camera:
        for cam in self.cameras:
            if cam.index == view_index:
                return cam
        raise ValueError(f"no camera with view index {view_index}")


@dataclass
class DepthMap:
    """Per-pixel depth in world units; invalid pixels hold the sentinel 0."""

    depth: np.ndarray
    valid: np.ndarray
    view_index: int = 0

    @property
    def width(self) -> int:
        return int(self.depth.shape[1])

    @property
    def height(self) -> int:
        return int(self.depth.shape[0])

    def valid_count(self) -> int:
        return int(self.valid.sum())


def normalize_shape(cloud: np.ndarray) -> tuple[np.ndarray, NormalizationRecord]:
    """Center a cloud on its bounding-box midpoint and scale it into the
    radius-SPHERE_RADIUS sphere.

    The scale factor is the maximum axis extent divided by the sphere radius,
    so the longest axis ends up with half-extent SPHERE_RADIUS / 2.
    """
    cloud = np.asarray(cloud, dtype=np.float64)
    if cloud.size == 0:
        raise ValueError("empty point cloud")
    if not np.isfinite(cloud).all():
        raise ValueError("point cloud contains non-finite coordinates")
    lo = cloud.min(axis=0)
    hi = cloud.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise ValueError("degenerate extent")
    center = (lo + hi) / 2.0
    scale = extent / SPHERE_RADIUS
    return (cloud - center) / scale, NormalizationRecord(center=center, scale_factor=scale)


def denormalize_shape(cloud: np.ndarray, record: NormalizationRecord) -> np.ndarray:
    """Undo normalize_shape using its record."""
    return np.asarray(cloud, dtype=np.float64) * record.scale_factor + record.center


def _look_at(center: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotation/translation of a camera at `center` looking at the origin.

    Rows of R are the camera's right/down/forward axes in world coordinates;
    the up reference is world +z (with +x fallback for near-polar directions).
    """
    center = np.asarray(center, dtype=np.float64)
    forward = -center / np.linalg.norm(center)
    up_ref = np.array([0.0, 0.0, 1.0])
    if abs(forward @ up_ref) > 1.0 - 1e-9:
        up_ref = np.array([1.0, 0.0, 0.0])
    up = up_ref - (up_ref @ forward) * forward
    up /= np.linalg.norm(up)
    right = np.cross(forward, up)
    down = -up
    r = np.stack([right, down, forward])
    t = -r @ center
    return r, t


def make_camera(
    center: np.ndarray,
    resolution: int,
    index: int = 0,
    fov_fill_ratio: float = 0.8,
) -> Camera:
    """Camera at `center` looking at the origin, focal length chosen so the
    shape sphere spans `fov_fill_ratio` of the image height."""
    center = np.asarray(center, dtype=np.float64)
    dist = float(np.linalg.norm(center))
    if dist <= SPHERE_RADIUS:
        raise ValueError("camera center inside the shape sphere")
    r, t = _look_at(center)
    # Perspective projection of the sphere limb: radius f * R / sqrt(d^2 - R^2).
    limb = SPHERE_RADIUS / np.sqrt(dist * dist - SPHERE_RADIUS * SPHERE_RADIUS)
    focal = fov_fill_ratio * (resolution / 2.0) / limb
    cx = (resolution - 1) / 2.0
    k = np.array([[focal, 0.0, cx], [0.0, focal, cx], [0.0, 0.0, 1.0]])
    return Camera(k=k, r=r, t=t, index=index, width=resolution, height=resolution)


def build_rig(
    cube_half_side: float = 0.4,
    resolution: int = 256,
    views: int = 8,
    splat_size: int = 1,
    fov_fill_ratio: float = 0.8,
) -> CameraRig:
    """Cameras on the corners of a cube of half side `cube_half_side`, all
    looking at the origin. Reduced rigs use the canonical view subsets."""
    if cube_half_side <= SPHERE_RADIUS:
        raise ValueError(
            f"cube_half_side must exceed the shape sphere radius {SPHERE_RADIUS}"
        )
    if views not in RIG_SUBSETS:
        raise ValueError(f"unsupported view count {views}; expected one of {sorted(RIG_SUBSETS)}")
    if resolution < 4:
        raise ValueError("resolution too small")
    if splat_size < 1:
        raise ValueError("splat_size must be >= 1")
    if not 0.0 < fov_fill_ratio <= 1.0:
        raise ValueError("fov_fill_ratio must be in (0, 1]")
    cameras = []
    for idx in RIG_SUBSETS[views]:
        signs = CORNER_SIGNS[idx - 1]
        center = cube_half_side * np.array(signs, dtype=np.float64)
        cameras.append(make_camera(center, resolution, index=idx, fov_fill_ratio=fov_fill_ratio))
    return CameraRig(
        cameras=cameras,
        cube_half_side=cube_half_side,
        resolution=resolution,
        splat_size=splat_size,
        fov_fill_ratio=fov_fill_ratio,
    )


def project_points(points: np.ndarray, camera: Camera) -> np.ndarray:
    """Project (N, 3) world points to (N, 3) rows (x_p, y_p, depth).

    All points must lie strictly in front of the camera.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    cam_pts = points @ camera.r.T + camera.t
    z = cam_pts[:, 2]
    if np.any(z <= 0.0):
        raise ValueError("behind camera")
    out = np.empty_like(cam_pts)
    out[:, 0] = camera.fx * cam_pts[:, 0] / z + camera.cx
    out[:, 1] = camera.fy * cam_pts[:, 1] / z + camera.cy
    out[:, 2] = z
    return out


def project(point: np.ndarray, camera: Camera) -> tuple[float, float, float]:
    """Project a single world point; returns (x_p, y_p, depth)."""
    row = project_points(np.asarray(point, dtype=np.float64).reshape(1, 3), camera)[0]
    return float(row[0]), float(row[1]), float(row[2])


def back_project_pixels(pixels: np.ndarray, camera: Camera) -> np.ndarray:
    """Inverse of project_points: (N, 3) rows (x_p, y_p, depth) to world points."""
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    d = pixels[:, 2]
    if np.any(d <= 0.0):
        raise ValueError("non-positive depth")
    cam_pts = np.empty_like(pixels)
    cam_pts[:, 0] = (pixels[:, 0] - camera.cx) / camera.fx * d
    cam_pts[:, 1] = (pixels[:, 1] - camera.cy) / camera.fy * d
    cam_pts[:, 2] = d
    return (cam_pts - camera.t) @ camera.r


def back_project(pixel: tuple[float, float, float], camera: Camera) -> np.ndarray:
    """Back-project a single (x_p, y_p, depth) pixel to a world point."""
    return back_project_pixels(np.asarray(pixel, dtype=np.float64).reshape(1, 3), camera)[0]


def backproject_map(depth_map: DepthMap, camera: Camera) -> np.ndarray:
    """World points for every valid pixel of a depth map, in row-major order."""
    iy, ix = np.nonzero(depth_map.valid)
    if iy.size == 0:
        return np.empty((0, 3), dtype=np.float64)
    pixels = np.stack(
        [ix.astype(np.float64), iy.astype(np.float64), depth_map.depth[iy, ix]], axis=1
    )
    return back_project_pixels(pixels, camera)


def _splat_offsets(splat_size: int) -> list[tuple[int, int]]:
    half = splat_size // 2
    rng = range(-half, -half + splat_size)
    return [(dx, dy) for dy in rng for dx in rng]


def render(cloud: np.ndarray, camera: Camera, splat_size: int = 1) -> DepthMap:
    """Z-buffer render of a point cloud: per pixel the minimum depth wins.

    Points are splatted as squares of `splat_size` pixels; pixels that receive
    no point are invalid. An empty cloud yields an all-invalid map.
    """
    w, h = camera.width, camera.height
    buf = np.full(h * w, np.inf, dtype=np.float64)
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    if cloud.shape[0] > 0:
        cam_pts = cloud @ camera.r.T + camera.t
        z = cam_pts[:, 2]
        front = z > 0.0
        xs = camera.fx * cam_pts[front, 0] / z[front] + camera.cx
        ys = camera.fy * cam_pts[front, 1] / z[front] + camera.cy
        zs = z[front]
        ix = np.rint(xs).astype(np.int64)
        iy = np.rint(ys).astype(np.int64)
        for dx, dy in _splat_offsets(splat_size):
            jx = ix + dx
            jy = iy + dy
            inside = (jx >= 0) & (jx < w) & (jy >= 0) & (jy < h)
            np.minimum.at(buf, jy[inside] * w + jx[inside], zs[inside])
    buf = buf.reshape(h, w)
    valid = np.isfinite(buf)
    return DepthMap(depth=np.where(valid, buf, 0.0), valid=valid, view_index=camera.index)


def render_views(cloud: np.ndarray, rig: CameraRig) -> list[DepthMap]:
    """Render one depth map per rig camera."""
    return [render(cloud, cam, splat_size=rig.splat_size) for cam in rig.cameras]


_RIG_KEYS = ("cube_half_side", "resolution", "V", "splat_size", "fov_fill_ratio")


def save_rig_config(path, rig: CameraRig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"cube_half_side = {rig.cube_half_side!r}\n")
        fh.write(f"resolution = {rig.resolution}\n")
        fh.write(f"V = {rig.num_views}\n")
        fh.write(f"splat_size = {rig.splat_size}\n")
        fh.write(f"fov_fill_ratio = {rig.fov_fill_ratio!r}\n")


def load_rig_config(path) -> CameraRig:
    """Build a rig from a key = value config file."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", path=path, line=lineno)
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _RIG_KEYS:
                raise ParseError(f"unknown rig key {key!r}", path=path, line=lineno)
            values[key] = value.strip()
    try:
        return build_rig(
            cube_half_side=float(values.get("cube_half_side", 0.4)),
            resolution=int(values.get("resolution", 256)),
            views=int(values.get("V", 8)),
            splat_size=int(values.get("splat_size", 1)),
            fov_fill_ratio=float(values.get("fov_fill_ratio", 0.8)),
        )
    except ValueError as exc:
        raise ParseError(f"invalid rig config: {exc}", path=path) from exc
