"""Azimuthal view partitioning: totality, boundaries, rotation symmetry."""

import numpy as np

from pcodo.geometry import PointCloud
from pcodo.views import View, azimuth_deg, partition_views, view_clouds, view_labels


def oracle_label(x, z):
    phi = np.degrees(np.arctan2(z, x)) % 360.0
    if 45.0 <= phi < 135.0:
        return View.FRONT
    if 135.0 <= phi < 225.0:
        return View.LEFT
    if 225.0 <= phi < 315.0:
        return View.REAR
    return View.RIGHT


def test_axis_examples():
    pts = np.array([
        [1.0, 0.3, 0.0],   # +x: 0 deg
        [0.0, -2.0, 1.0],  # +z: 90 deg
        [-1.0, 5.0, 0.0],  # -x: 180 deg
        [0.0, 0.0, -1.0],  # -z: 270 deg
    ])
    assert np.allclose(azimuth_deg(pts), [0.0, 90.0, 180.0, 270.0], atol=1e-12)
    assert np.array_equal(
        view_labels(pts), [View.RIGHT, View.FRONT, View.LEFT, View.REAR]
    )


def test_height_never_matters():
    rng = np.random.default_rng(0)
    flat = rng.normal(size=(500, 3))
    lifted = flat.copy()
    lifted[:, 1] += rng.uniform(-100.0, 100.0, size=500)
    assert np.array_equal(view_labels(flat), view_labels(lifted))


def test_boundary_belongs_to_the_next_view():
    # half-open sectors: 45 deg is Front, 135 Left, 225 Rear, 315 Right
    c = np.cos(np.radians([45.0, 135.0, 225.0, 315.0]))
    s = np.sin(np.radians([45.0, 135.0, 225.0, 315.0]))
    pts = np.column_stack([c, np.zeros(4), s])
    assert np.array_equal(
        view_labels(pts), [View.FRONT, View.LEFT, View.REAR, View.RIGHT]
    )


def test_totality_and_disjointness():
    """Every point lands in exactly one view; labels match the oracle."""
    rng = np.random.default_rng(1)
    xyz = rng.normal(scale=10.0, size=(20000, 3))
    labels = view_labels(xyz)
    assert labels.min() >= 0 and labels.max() <= 3

    part = partition_views(PointCloud(xyz))
    all_indices = np.concatenate([part.indices(v) for v in View])
    assert all_indices.size == len(xyz)
    assert np.array_equal(np.sort(all_indices), np.arange(len(xyz)))

    sampled = rng.choice(len(xyz), size=500, replace=False)
    for i in sampled:
        assert labels[i] == oracle_label(xyz[i, 0], xyz[i, 2])


def test_quarter_turn_permutes_views_cyclically():
    """Rotating the cloud 90 deg about vertical advances every label by one."""
    rng = np.random.default_rng(2)
    xyz = rng.normal(scale=5.0, size=(4000, 3))
    labels = view_labels(xyz)
    rotated = np.column_stack([-xyz[:, 2], xyz[:, 1], xyz[:, 0]])  # azimuth + 90
    assert np.array_equal(view_labels(rotated), (labels + 1) % 4)

    part = partition_views(PointCloud(xyz))
    part_rot = partition_views(PointCloud(rotated))
    order = [View.RIGHT, View.FRONT, View.LEFT, View.REAR]
    for v, succ in zip(order, order[1:] + order[:1]):
        assert np.array_equal(np.sort(part.indices(v)), np.sort(part_rot.indices(succ)))


def test_view_clouds_cover_the_cloud():
    rng = np.random.default_rng(3)
    cloud = PointCloud(rng.normal(size=(1000, 3)))
    clouds = view_clouds(cloud)
    assert sum(len(sub) for sub, _ in clouds.values()) == len(cloud)
    for v, (sub, idx) in clouds.items():
        if len(sub):
            assert np.array_equal(view_labels(sub.xyz), np.full(len(sub), int(v)))
            assert np.array_equal(sub.xyz, cloud.xyz[idx])


def test_origin_maps_to_right():
    # atan2(0, 0) = 0, so the degenerate origin lands in Right by convention
    assert view_labels(np.array([[0.0, 1.0, 0.0]]))[0] == View.RIGHT
