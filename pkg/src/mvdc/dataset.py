"""Training-pair generation and file I/O.

A sample pairs V partial-shape depth maps (rendered from a single-viewpoint
2.5D capture of the ground truth) with V ground-truth depth maps. Depth maps
are stored as 16-bit PGM, clouds as ASCII xyz.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .geometry import (
    CameraRig,
    DepthMap,
    NormalizationRecord,
    backproject_map,
    make_camera,
    normalize_shape,
    render,
    render_views,
)

PGM_MAXVAL = 65535


@dataclass
class PerturbParams:
    """Input corruption levels: depth noise, random subsampling, occlusion."""

    eta: float = 0.0
    mu: float = 1.0
    occlusion_fraction: float = 0.0

    def validate(self) -> None:
        if self.eta < 0.0:
            raise ValueError("eta must be >= 0")
        if not 0.0 < self.mu <= 1.0:
            raise ValueError("mu must be in (0, 1]")
        if not 0.0 <= self.occlusion_fraction < 1.0:
            raise ValueError("occlusion_fraction must be in [0, 1)")

    def is_identity(self) -> bool:
        return self.eta == 0.0 and self.mu == 1.0 and self.occlusion_fraction == 0.0


@dataclass
class Sample:
    shape_id: str
    partial_maps: list[DepthMap]
    truth_maps: list[DepthMap]
    normalization: NormalizationRecord
    rng_seed: int


# ------------------------------------------------------------------ clouds


def write_cloud(path, cloud: np.ndarray) -> None:
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in cloud:
            fh.write(f"{x:.6f} {y:.6f} {z:.6f}\n")


def read_cloud(path) -> np.ndarray:
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(
                    f"expected 3 coordinates, got {len(parts)}", path=path, line=lineno
                )
            try:
                points.append([float(v) for v in parts])
            except ValueError as exc:
                raise ParseError(f"bad coordinate: {exc}", path=path, line=lineno) from exc
    return np.asarray(points, dtype=np.float64).reshape(-1, 3)


# --------------------------------------------------------------- depth maps


def quantize_depth(dmap: DepthMap, near: float, far: float) -> np.ndarray:
    """World depth to 16-bit levels: [near, far] maps to [1, 65535], 0 invalid."""
    scaled = (dmap.depth - near) / (far - near) * (PGM_MAXVAL - 1)
    levels = np.rint(scaled).astype(np.int64) + 1
    levels = np.clip(levels, 1, PGM_MAXVAL)
    return np.where(dmap.valid, levels, 0).astype(np.uint16)


def dequantize_depth(levels: np.ndarray, near: float, far: float, view_index: int = 0) -> DepthMap:
    valid = levels > 0
    depth = near + (levels.astype(np.float64) - 1) / (PGM_MAXVAL - 1) * (far - near)
    return DepthMap(depth=np.where(valid, depth, 0.0), valid=valid, view_index=view_index)


def write_depth_pgm(path, dmap: DepthMap, near: float, far: float) -> None:
    """16-bit big-endian PGM; near/far and view index ride in a header comment."""
    levels = quantize_depth(dmap, near, far)
    header = (
        f"P5\n# near={float(near)!r} far={float(far)!r} view={dmap.view_index}\n"
        f"{dmap.width} {dmap.height}\n{PGM_MAXVAL}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(levels.astype(">u2").tobytes())


def read_depth_pgm(path) -> tuple[DepthMap, float, float]:
    """Read a depth PGM; returns (map, near, far)."""
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0
    tokens: list[bytes] = []
    meta = {}
    while len(tokens) < 4:
        if pos >= len(data):
            raise ParseError("truncated header", path=path, offset=pos)
        if data[pos : pos + 1].isspace():
            pos += 1
            continue
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise ParseError("unterminated comment", path=path, offset=pos)
            for item in data[pos + 1 : end].split():
                if b"=" in item:
                    key, _, value = item.partition(b"=")
                    meta[key.decode("ascii")] = value.decode("ascii")
            pos = end + 1
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ParseError(f"not a P5 PGM (magic {tokens[0]!r})", path=path, offset=0)
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise ParseError(f"bad header field: {exc}", path=path, offset=pos) from exc
    if maxval != PGM_MAXVAL:
        raise ParseError(f"expected maxval {PGM_MAXVAL}, got {maxval}", path=path, offset=pos)
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 2
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise ParseError(
            f"raster truncated: expected {expected} bytes, got {len(raster)}",
            path=path,
            offset=pos,
        )
    levels = np.frombuffer(raster, dtype=">u2").reshape(height, width).astype(np.uint16)
    try:
        near = float(meta["near"])
        far = float(meta["far"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"missing or bad near/far metadata: {exc}", path=path) from exc
    view = int(meta.get("view", "0"))
    return dequantize_depth(levels, near, far, view_index=view), near, far


# ------------------------------------------------------------ normalization


def write_normalization(path, record: NormalizationRecord) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        c = [float(v) for v in record.center]
        fh.write(f"center {c[0]!r} {c[1]!r} {c[2]!r}\n")
        fh.write(f"scale {float(record.scale_factor)!r}\n")


def read_normalization(path) -> NormalizationRecord:
    center = None
    scale = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            try:
                if parts[0] == "center" and len(parts) == 4:
                    center = np.array([float(v) for v in parts[1:]])
                elif parts[0] == "scale" and len(parts) == 2:
                    scale = float(parts[1])
                else:
                    raise ParseError(f"unrecognized line {parts[0]!r}", path=path, line=lineno)
            except ValueError as exc:
                raise ParseError(f"bad number: {exc}", path=path, line=lineno) from exc
    if center is None or scale is None:
        raise ParseError("missing center or scale", path=path)
    return NormalizationRecord(center=center, scale_factor=scale)


# ------------------------------------------------------------- perturbation


def perturb_depth_map(
    dmap: DepthMap, params: PerturbParams, seed: int, near: float, far: float
) -> DepthMap:
    """Gaussian depth noise on valid pixels, sigma = eta * (far - near)."""
    params.validate()
    if params.eta == 0.0:
        return DepthMap(depth=dmap.depth.copy(), valid=dmap.valid.copy(), view_index=dmap.view_index)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, params.eta * (far - near), size=dmap.depth.shape)
    depth = np.where(dmap.valid, np.clip(dmap.depth + noise, near, far), 0.0)
    return DepthMap(depth=depth, valid=dmap.valid.copy(), view_index=dmap.view_index)


def subsample_cloud(cloud: np.ndarray, mu: float, rng: np.random.Generator) -> np.ndarray:
    keep = rng.random(cloud.shape[0]) < mu
    return cloud[keep].copy()


def occlude_cloud(cloud: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Remove a spatially coherent chunk: the `fraction` of points nearest a
    randomly chosen anchor point."""
    n = cloud.shape[0]
    k = int(round(fraction * n))
    if k == 0:
        return cloud.copy()
    anchor = cloud[rng.integers(n)]
    dists = np.linalg.norm(cloud - anchor, axis=1)
    order = np.argsort(dists, kind="stable")
    removed = np.zeros(n, dtype=bool)
    removed[order[:k]] = True
    return cloud[~removed].copy()


def perturb_cloud(
    cloud: np.ndarray, params: PerturbParams, seed: int, depth_range: float
) -> np.ndarray:
    """Apply noise, subsampling, and occlusion to a point cloud.

    Positional noise stands in for per-pixel depth noise when no depth map is
    available: isotropic Gaussian with sigma = eta * depth_range.
    """
    params.validate()
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    if params.is_identity():
        return cloud.copy()
    rng = np.random.default_rng(seed)
    out = cloud.copy()
    if params.eta > 0.0:
        out = out + rng.normal(0.0, params.eta * depth_range, size=out.shape)
    if params.mu < 1.0:
        out = subsample_cloud(out, params.mu, rng)
    if params.occlusion_fraction > 0.0:
        out = occlude_cloud(out, params.occlusion_fraction, rng)
    return out


# ------------------------------------------------------------ sample making


def _random_direction(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(size=3)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def make_partial(
    gt_cloud: np.ndarray,
    rig: CameraRig,
    seed: int,
    perturb: PerturbParams | None = None,
) -> np.ndarray:
    """Single-viewpoint 2.5D capture of a normalized cloud.

    Renders from a uniformly random direction at the rig camera distance and
    back-projects the valid pixels; the far side self-occludes. Retries with
    the next seed (at most 8 times) if a render comes out empty.
    """
    gt_cloud = np.asarray(gt_cloud, dtype=np.float64).reshape(-1, 3)
    if gt_cloud.shape[0] == 0:
        raise ValueError("empty point cloud")
    for attempt in range(9):
        rng = np.random.default_rng(seed + attempt)
        direction = _random_direction(rng)
        cam = make_camera(
            direction * rig.distance,
            rig.resolution,
            index=0,
            fov_fill_ratio=rig.fov_fill_ratio,
        )
        dmap = render(gt_cloud, cam, splat_size=rig.splat_size)
        if perturb is not None and perturb.eta > 0.0:
            dmap = perturb_depth_map(dmap, perturb, seed + attempt, rig.near, rig.far)
        partial = backproject_map(dmap, cam)
        if perturb is not None:
            sub = PerturbParams(eta=0.0, mu=perturb.mu, occlusion_fraction=perturb.occlusion_fraction)
            partial = perturb_cloud(partial, sub, seed + attempt, rig.far - rig.near)
        if partial.shape[0] > 0:
            return partial
    raise ValueError(f"could not produce a non-empty partial cloud from seed {seed}")


def make_sample(
    gt_cloud: np.ndarray,
    rig: CameraRig,
    shape_id: str,
    seed: int,
    perturb: PerturbParams | None = None,
) -> Sample:
    """Normalize, capture a partial cloud, and render both sides from all views."""
    normalized, record = normalize_shape(gt_cloud)
    partial = make_partial(normalized, rig, seed, perturb=perturb)
    return Sample(
        shape_id=shape_id,
        partial_maps=render_views(partial, rig),
        truth_maps=render_views(normalized, rig),
        normalization=record,
        rng_seed=seed,
    )


# ------------------------------------------------------- dataset directories


def shape_seed(base_seed: int, shape_id: str) -> int:
    """Stable per-shape seed; independent of Python hash randomization."""
    import zlib

    return (base_seed * 1_000_003 + zlib.crc32(shape_id.encode("utf-8"))) % (2**63)


def save_sample(root, sample: Sample, rig: CameraRig) -> None:
    shape_dir = os.path.join(root, sample.shape_id)
    os.makedirs(shape_dir, exist_ok=True)
    for dmap in sample.partial_maps:
        write_depth_pgm(
            os.path.join(shape_dir, f"partial_{dmap.view_index}.pgm"), dmap, rig.near, rig.far
        )
    for dmap in sample.truth_maps:
        write_depth_pgm(
            os.path.join(shape_dir, f"truth_{dmap.view_index}.pgm"), dmap, rig.near, rig.far
        )
    write_normalization(os.path.join(shape_dir, "norm.txt"), sample.normalization)
    with open(os.path.join(shape_dir, "seed.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"{sample.rng_seed}\n")


def load_sample(root, shape_id: str, rig: CameraRig) -> Sample:
    shape_dir = os.path.join(root, shape_id)
    partial_maps = []
    truth_maps = []
    for view in rig.view_ids:
        pmap, _, _ = read_depth_pgm(os.path.join(shape_dir, f"partial_{view}.pgm"))
        tmap, _, _ = read_depth_pgm(os.path.join(shape_dir, f"truth_{view}.pgm"))
        partial_maps.append(pmap)
        truth_maps.append(tmap)
    record = read_normalization(os.path.join(shape_dir, "norm.txt"))
    with open(os.path.join(shape_dir, "seed.txt"), "r", encoding="utf-8") as fh:
        seed = int(fh.read().strip())
    return Sample(
        shape_id=shape_id,
        partial_maps=partial_maps,
        truth_maps=truth_maps,
        normalization=record,
        rng_seed=seed,
    )


def write_manifest(path, splits: dict[str, list[str]]) -> None:
    """Manifest lines: `<shape_id> <split>`."""
    with open(path, "w", encoding="utf-8") as fh:
        for split, ids in splits.items():
            for shape_id in ids:
                fh.write(f"{shape_id} {split}\n")


def read_manifest(path) -> dict[str, list[str]]:
    splits: dict[str, list[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError("expected '<shape_id> <split>'", path=path, line=lineno)
            splits.setdefault(parts[1], []).append(parts[0])
    return splits
