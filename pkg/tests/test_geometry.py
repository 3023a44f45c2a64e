import numpy as np
import pytest

from mvdc import geometry as geo
from helpers import sphere_cloud


# ---------------------------------------------------------------- normalize


def test_normalize_cube_corners():
    corners = np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float
    )
    out, record = geo.normalize_shape(corners)
    assert record.scale_factor == pytest.approx(10.0, abs=1e-12)
    assert np.allclose(record.center, 0.0, atol=1e-12)
    assert np.allclose(np.abs(out), 0.1, atol=1e-12)


def test_normalize_rejects_empty_and_degenerate():
    with pytest.raises(ValueError):
        geo.normalize_shape(np.empty((0, 3)))
    with pytest.raises(ValueError, match="degenerate extent"):
        geo.normalize_shape(np.tile([[2.0, 2.0, 2.0]], (5, 1)))
    with pytest.raises(ValueError):
        geo.normalize_shape(np.array([[np.nan, 0, 0]]))


def test_normalize_random_cloud_contained_in_sphere():
    rng = np.random.default_rng(42)
    cloud = rng.uniform(3.0, 5.0, (100, 3))
    out, record = geo.normalize_shape(cloud)
    # oracle: direct bounding-box computation
    lo, hi = cloud.min(axis=0), cloud.max(axis=0)
    assert np.allclose(record.center, (lo + hi) / 2, atol=1e-12)
    assert record.scale_factor == pytest.approx((hi - lo).max() / geo.SPHERE_RADIUS, abs=1e-12)
    assert (np.linalg.norm(out, axis=1) <= geo.SPHERE_RADIUS + 1e-9).all()


def test_normalize_inverse_recovers_original():
    rng = np.random.default_rng(3)
    cloud = rng.normal(size=(50, 3)) * 7.0 + 100.0
    out, record = geo.normalize_shape(cloud)
    restored = geo.denormalize_shape(out, record)
    assert np.abs((restored - cloud) / cloud).max() < 1e-9


def test_normalize_idempotent():
    cloud = sphere_cloud(200, seed=5)
    once, _ = geo.normalize_shape(cloud)
    twice, record = geo.normalize_shape(once)
    assert record.scale_factor == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(once, twice, atol=1e-12)


# ---------------------------------------------------------------------- rig


def test_rig_camera_centers_are_cube_corners():
    rig = geo.build_rig(cube_half_side=0.4)
    centers = sorted(tuple(np.sign(c.center)) for c in rig.cameras)
    assert centers == sorted(
        (sx, sy, sz) for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)
    )
    for cam in rig.cameras:
        assert np.allclose(np.abs(cam.center), 0.4, atol=1e-12)


def test_rig_rotations_orthonormal_and_aimed_at_origin():
    rig = geo.build_rig()
    for cam in rig.cameras:
        assert np.allclose(cam.r @ cam.r.T, np.eye(3), atol=1e-9)
        assert np.linalg.det(cam.r) == pytest.approx(1.0, abs=1e-9)
        origin_in_cam = cam.r @ np.zeros(3) + cam.t
        assert abs(origin_in_cam[0]) < 1e-9
        assert abs(origin_in_cam[1]) < 1e-9
        assert origin_in_cam[2] == pytest.approx(rig.distance, abs=1e-9)


def test_rig_view_direction_example():
    rig = geo.build_rig(cube_half_side=0.4)
    cam = rig.camera_by_view(1)  # corner (+, +, +)
    expected = -np.ones(3) / np.sqrt(3.0)
    assert np.allclose(cam.view_dir, expected, atol=1e-12)


def test_rig_subsets():
    assert geo.build_rig(views=3).view_ids == (1, 3, 5)
    assert geo.build_rig(views=5).view_ids == (1, 3, 5, 6, 8)
    assert geo.build_rig(views=8).view_ids == tuple(range(1, 9))
    with pytest.raises(ValueError):
        geo.build_rig(views=4)


def test_rig_rejects_small_cube():
    with pytest.raises(ValueError):
        geo.build_rig(cube_half_side=0.2)


def test_sphere_fills_80_percent_of_image_height():
    rig = geo.build_rig(cube_half_side=0.4)
    boundary = sphere_cloud(50000, radius=geo.SPHERE_RADIUS, seed=1)
    for cam in rig.cameras:
        pix = geo.project_points(boundary, cam)
        extent = max(
            np.abs(pix[:, 0] - cam.cx).max(), np.abs(pix[:, 1] - cam.cy).max()
        )
        ratio = extent / (cam.height / 2.0)
        assert abs(ratio - 0.8) < 0.01
        # the whole sphere is inside the frustum
        assert (pix[:, 0] >= 0).all() and (pix[:, 0] <= cam.width - 1).all()
        assert (pix[:, 1] >= 0).all() and (pix[:, 1] <= cam.height - 1).all()


def test_rig_closed_under_sign_flips():
    rig = geo.build_rig()
    centers = {tuple(np.round(c.center, 12)) for c in rig.cameras}
    for center in list(centers):
        for axis in range(3):
            flipped = list(center)
            flipped[axis] = -flipped[axis]
            assert tuple(flipped) in centers


# --------------------------------------------------------------- projection


def test_project_optical_axis_hits_principal_point():
    cam = geo.build_rig().cameras[0]
    for dist in (0.5, 0.7, 0.9):
        point = cam.center + dist * cam.view_dir
        x, y, d = geo.project(point, cam)
        assert x == pytest.approx(cam.cx, abs=1e-9)
        assert y == pytest.approx(cam.cy, abs=1e-9)
        assert d == pytest.approx(dist, abs=1e-12)


def test_project_matches_explicit_matrix_arithmetic():
    cam = geo.build_rig().camera_by_view(1)
    point = np.array([0.1, 0.0, 0.0])
    # oracle: evaluate K (R p + t) and dehomogenize by hand
    p_cam = cam.r @ point + cam.t
    hom = cam.k @ p_cam
    expected = (hom[0] / p_cam[2], hom[1] / p_cam[2], p_cam[2])
    got = geo.project(point, cam)
    assert got == pytest.approx(expected, abs=1e-12)


def test_project_behind_camera_raises():
    cam = geo.build_rig().cameras[0]
    behind = cam.center - 0.1 * cam.view_dir
    with pytest.raises(ValueError, match="behind camera"):
        geo.project(behind, cam)


def test_back_project_principal_point_lies_on_optical_axis():
    cam = geo.build_rig().cameras[0]
    point = geo.back_project((cam.cx, cam.cy, 0.6), cam)
    assert np.allclose(point, cam.center + 0.6 * cam.view_dir, atol=1e-12)


def test_back_project_rejects_nonpositive_depth():
    cam = geo.build_rig().cameras[0]
    with pytest.raises(ValueError):
        geo.back_project((10.0, 10.0, 0.0), cam)
    with pytest.raises(ValueError):
        geo.back_project((10.0, 10.0, -0.5), cam)


def test_projection_round_trip_1000_pixels():
    rig = geo.build_rig()
    rng = np.random.default_rng(7)
    pixels = np.column_stack(
        [
            rng.uniform(0, rig.resolution - 1, 1000),
            rng.uniform(0, rig.resolution - 1, 1000),
            rng.uniform(rig.near, rig.far, 1000),
        ]
    )
    for cam in rig.cameras:
        points = geo.back_project_pixels(pixels, cam)
        back = geo.project_points(points, cam)
        assert np.abs(back - pixels).max() < 1e-9


def test_world_round_trip():
    cam = geo.build_rig().cameras[3]
    rng = np.random.default_rng(11)
    points = rng.uniform(-0.15, 0.15, (500, 3))
    pix = geo.project_points(points, cam)
    back = geo.back_project_pixels(pix, cam)
    assert np.abs(back - points).max() < 1e-9


def test_backproject_map_matches_per_pixel_loop():
    cam = geo.build_rig(resolution=64).cameras[2]
    dmap = geo.render(sphere_cloud(4000, seed=2), cam)
    fast = geo.backproject_map(dmap, cam)
    slow = []
    for iy in range(dmap.height):
        for ix in range(dmap.width):
            if dmap.valid[iy, ix]:
                slow.append(geo.back_project((ix, iy, dmap.depth[iy, ix]), cam))
    assert np.array_equal(fast, np.asarray(slow))


# ------------------------------------------------------------------- render


def test_render_empty_cloud_all_invalid():
    cam = geo.build_rig(resolution=32).cameras[0]
    dmap = geo.render(np.empty((0, 3)), cam)
    assert not dmap.valid.any()
    assert (dmap.depth == 0.0).all()


def test_render_zbuffer_keeps_minimum_depth():
    cam = geo.build_rig().cameras[0]
    near_pt = geo.back_project((100.2, 80.4, 0.5), cam)
    far_pt = geo.back_project((100.3, 80.1, 0.7), cam)  # same pixel after rounding
    dmap = geo.render(np.stack([far_pt, near_pt]), cam)
    assert dmap.valid[80, 100]
    assert dmap.depth[80, 100] == pytest.approx(0.5, abs=1e-12)


def test_render_depth_positive_and_zero_sentinel():
    cam = geo.build_rig(resolution=64).cameras[1]
    dmap = geo.render(sphere_cloud(2000, seed=3), cam)
    assert (dmap.depth[dmap.valid] > 0).all()
    assert (dmap.depth[~dmap.valid] == 0.0).all()


def test_render_permutation_invariant():
    cam = geo.build_rig(resolution=64).cameras[4]
    cloud = sphere_cloud(3000, seed=4)
    rng = np.random.default_rng(0)
    shuffled = cloud[rng.permutation(cloud.shape[0])]
    a = geo.render(cloud, cam)
    b = geo.render(shuffled, cam)
    assert np.array_equal(a.depth, b.depth)
    assert np.array_equal(a.valid, b.valid)


def test_render_zbuffer_monotone_under_insertion():
    cam = geo.build_rig(resolution=64).cameras[5]
    cloud = sphere_cloud(1000, seed=6)
    extra = sphere_cloud(200, radius=0.12, seed=7)
    base = geo.render(cloud, cam)
    more = geo.render(np.concatenate([cloud, extra]), cam)
    assert (more.valid | ~base.valid).all()  # validity only grows
    both = base.valid
    assert (more.depth[both] <= base.depth[both] + 1e-15).all()


def test_render_sphere_back_projects_onto_surface():
    rig = geo.build_rig()
    cloud = sphere_cloud(60000, radius=0.15, seed=8)
    for cam in rig.cameras[:2]:
        dmap = geo.render(cloud, cam)
        pts = geo.backproject_map(dmap, cam)
        dist = np.abs(np.linalg.norm(pts, axis=1) - 0.15)
        assert dist.max() < 2.0 * rig.pixel_footprint


def test_render_splat_size_two_covers_more_pixels():
    cam = geo.build_rig(resolution=128).cameras[0]
    cloud = sphere_cloud(500, seed=9)
    s1 = geo.render(cloud, cam, splat_size=1)
    s2 = geo.render(cloud, cam, splat_size=2)
    assert s2.valid_count() > s1.valid_count()
    assert (s2.valid | ~s1.valid).all()


# --------------------------------------------------------------- rig config


def test_rig_config_round_trip(tmp_path):
    rig = geo.build_rig(cube_half_side=0.5, resolution=64, views=5, splat_size=2, fov_fill_ratio=0.7)
    path = tmp_path / "rig.cfg"
    geo.save_rig_config(path, rig)
    loaded = geo.load_rig_config(path)
    assert loaded.cube_half_side == rig.cube_half_side
    assert loaded.resolution == rig.resolution
    assert loaded.view_ids == rig.view_ids
    assert loaded.splat_size == rig.splat_size
    assert loaded.fov_fill_ratio == rig.fov_fill_ratio


def test_rig_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "rig.cfg"
    path.write_text("cube_half_side = 0.4\nbogus = 1\n")
    from mvdc.errors import ParseError

    with pytest.raises(ParseError, match="bogus"):
        geo.load_rig_config(path)
