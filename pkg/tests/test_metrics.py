import numpy as np
import pytest

from mvdc import geometry as geo
from mvdc.metrics import SpatialIndex, avg_l1, chamfer, nearest


def brute_force_chamfer(x, y):
    d = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2)
    return 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean())


# ----------------------------------------------------------------- chamfer


def test_chamfer_identical_clouds_is_zero():
    rng = np.random.default_rng(0)
    cloud = rng.normal(size=(100, 3))
    assert chamfer(cloud, cloud) == 0.0


def test_chamfer_single_pair():
    assert chamfer(np.array([[0.0, 0.0, 0.0]]), np.array([[1.0, 0.0, 0.0]])) == pytest.approx(1.0)


def test_chamfer_matches_brute_force():
    rng = np.random.default_rng(1)
    for trial in range(5):
        x = rng.normal(size=(300, 3))
        y = rng.normal(size=(300, 3)) + 0.5
        assert chamfer(x, y) == pytest.approx(brute_force_chamfer(x, y), abs=1e-12)


def test_chamfer_symmetric():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(120, 3))
    y = rng.normal(size=(80, 3))
    assert chamfer(x, y) == chamfer(y, x)


def test_chamfer_rejects_empty():
    with pytest.raises(ValueError):
        chamfer(np.empty((0, 3)), np.array([[0.0, 0.0, 0.0]]))
    with pytest.raises(ValueError):
        chamfer(np.array([[0.0, 0.0, 0.0]]), np.empty((0, 3)))


# ------------------------------------------------------------------ avg_l1


def _map_pair(depth_a, depth_b, valid_a=None, valid_b=None):
    valid_a = np.ones_like(depth_a, dtype=bool) if valid_a is None else valid_a
    valid_b = np.ones_like(depth_b, dtype=bool) if valid_b is None else valid_b
    return (
        geo.DepthMap(depth=np.where(valid_a, depth_a, 0.0), valid=valid_a),
        geo.DepthMap(depth=np.where(valid_b, depth_b, 0.0), valid=valid_b),
    )


def test_avg_l1_identical_maps_zero():
    depth = np.full((16, 16), 0.6)
    a, b = _map_pair(depth, depth.copy())
    assert avg_l1(a, b, near=0.5, far=0.9) == 0.0


def test_avg_l1_one_quantization_unit():
    near, far = 0.5, 0.9
    unit = (far - near) / 255.0
    depth = np.full((8, 8), 0.6)
    a, b = _map_pair(depth, depth + unit)
    assert avg_l1(a, b, near, far) == pytest.approx(1.0, abs=1e-9)


def test_avg_l1_matches_loop_oracle():
    rng = np.random.default_rng(3)
    near, far = 0.5, 0.9
    depth_a = rng.uniform(near, far, (12, 12))
    depth_b = rng.uniform(near, far, (12, 12))
    valid_a = rng.random((12, 12)) > 0.3
    valid_b = rng.random((12, 12)) > 0.3
    a, b = _map_pair(depth_a, depth_b, valid_a, valid_b)
    total = 0.0
    scale = 255.0 / (far - near)
    for iy in range(12):
        for ix in range(12):
            ea = (depth_a[iy, ix] - near) * scale if valid_a[iy, ix] else 0.0
            eb = (depth_b[iy, ix] - near) * scale if valid_b[iy, ix] else 0.0
            total += abs(ea - eb)
    assert avg_l1(a, b, near, far) == pytest.approx(total / 144.0, abs=1e-9)


def test_avg_l1_resolution_mismatch():
    a, _ = _map_pair(np.full((8, 8), 0.6), np.full((8, 8), 0.6))
    b, _ = _map_pair(np.full((16, 16), 0.6), np.full((16, 16), 0.6))
    with pytest.raises(ValueError, match="resolution mismatch"):
        avg_l1(a, b, 0.5, 0.9)


def test_avg_l1_triangle_inequality():
    rng = np.random.default_rng(4)
    near, far = 0.5, 0.9
    maps = []
    for _ in range(3):
        depth = rng.uniform(near, far, (10, 10))
        valid = rng.random((10, 10)) > 0.2
        maps.append(geo.DepthMap(depth=np.where(valid, depth, 0.0), valid=valid))
    a, b, c = maps
    assert avg_l1(a, c, near, far) <= avg_l1(a, b, near, far) + avg_l1(b, c, near, far) + 1e-12


# ----------------------------------------------------------------- nearest


def test_nearest_exact_hit():
    rng = np.random.default_rng(5)
    points = rng.normal(size=(50, 3))
    index = SpatialIndex(points)
    point, dist = nearest(points[17], index)
    assert dist == 0.0
    assert np.array_equal(point, points[17])


def test_nearest_tie_breaks_by_insertion_index():
    points = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    index = SpatialIndex(points)
    point, dist = index.nearest(np.zeros(3))
    assert dist == 1.0
    assert np.array_equal(point, points[0])
    # same ties, reorderd: still the earliest index wins
    index2 = SpatialIndex(points[::-1].copy())
    point2, _ = index2.nearest(np.zeros(3))
    assert np.array_equal(point2, points[2])


def test_nearest_matches_linear_scan():
    rng = np.random.default_rng(6)
    points = rng.normal(size=(500, 3))
    index = SpatialIndex(points)
    queries = rng.normal(size=(10000, 3))
    fast = index.nearest_distances(queries)
    slow = np.linalg.norm(queries[:, None, :] - points[None, :, :], axis=2).min(axis=1)
    assert np.array_equal(fast, slow) or np.abs(fast - slow).max() == 0.0


def test_spatial_index_rejects_empty():
    with pytest.raises(ValueError):
        SpatialIndex(np.empty((0, 3)))
