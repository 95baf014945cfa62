"""Synthetic scene generation: world layout, trajectory, sequence output."""

import math

import numpy as np
import pytest

from pcodo.kitti_io import load_sequence, read_pose_file, read_velodyne_scan
from pcodo.synth import (
    POLE_SITES,
    SceneConfig,
    build_world,
    generate_sequence,
    render_scan,
    synthetic_trajectory,
    twin_blob_centers,
)


def test_total_points_accounting():
    cfg = SceneConfig()
    expected = (
        cfg.n_ground
        + cfg.n_wall
        + len(POLE_SITES) * cfg.pole_points
        + 2 * cfg.twin_points
        + cfg.third_points
    )
    assert cfg.total_points == expected


def test_scaled_tracks_request():
    scaled = SceneConfig().scaled(8000)
    assert abs(scaled.total_points - 8000) <= 0.01 * 8000
    # geometry parameters are not rescaled, only counts
    assert scaled.twin_radius == SceneConfig().twin_radius


def test_scaled_respects_floors():
    tiny = SceneConfig().scaled(100)
    assert tiny.n_ground >= 100
    assert tiny.n_wall >= 50
    assert tiny.pole_points >= 20
    assert tiny.twin_points >= 60
    assert tiny.third_points >= 60


def test_twin_centers_straddle_boundary():
    cfg = SceneConfig()
    a, b = twin_blob_centers(cfg)
    for c in (a, b):
        assert abs(math.hypot(c[0], c[2]) - cfg.twin_radius) <= 1e-12
        assert c[1] == cfg.twin_y
    bearing_a = math.degrees(math.atan2(a[2], a[0]))
    bearing_b = math.degrees(math.atan2(b[2], b[0]))
    assert abs((bearing_a + bearing_b) / 2.0 - cfg.twin_bearing) <= 1e-9
    arc = math.radians(bearing_b - bearing_a) * cfg.twin_radius
    assert abs(arc - cfg.twin_separation) <= 1e-9


def test_twins_share_point_pattern():
    """Both blobs add the same offsets to different centers."""
    cfg = SceneConfig().scaled(3000)
    world = build_world(cfg, seed=11)
    start = cfg.n_ground + cfg.n_wall + len(cfg.pole_sites) * cfg.pole_points
    blob_a = world[start : start + cfg.twin_points]
    blob_b = world[start + cfg.twin_points : start + 2 * cfg.twin_points]
    a, b = twin_blob_centers(cfg)
    diff = blob_b - blob_a
    assert np.allclose(diff, b - a, atol=1e-9)
    assert np.ptp(diff, axis=0).max() <= 1e-9


def test_world_is_deterministic_and_finite():
    cfg = SceneConfig().scaled(2000)
    w1 = build_world(cfg, seed=3)
    w2 = build_world(cfg, seed=3)
    w3 = build_world(cfg, seed=4)
    assert np.array_equal(w1, w2)
    assert not np.array_equal(w1, w3)
    assert w1.shape == (cfg.total_points, 3)
    assert np.isfinite(w1).all()


def test_ground_and_wall_are_exact_planes():
    cfg = SceneConfig().scaled(2000)
    world = build_world(cfg, seed=5)
    ground = world[: cfg.n_ground]
    wall = world[cfg.n_ground : cfg.n_ground + cfg.n_wall]
    assert np.all(ground[:, 1] == cfg.ground_y)
    assert np.all(wall[:, 0] == cfg.wall_x)


def test_trajectory_holds_anchor_bearing():
    cfg = SceneConfig()
    a, b = twin_blob_centers(cfg)
    anchor = (a + b) / 2.0
    traj = synthetic_trajectory(30, 0.4, (anchor[0], anchor[2]), cfg.twin_bearing)
    assert len(traj) == 30
    assert np.array_equal(traj[0].t, np.zeros(3))
    for pose in traj:
        local = pose.R.T @ (np.array([anchor[0], 0.0, anchor[2]]) - pose.t)
        bearing = math.degrees(math.atan2(local[2], local[0]))
        assert abs(bearing - cfg.twin_bearing) <= 1e-9


def test_trajectory_motion_is_gentle():
    cfg = SceneConfig()
    a, b = twin_blob_centers(cfg)
    anchor = (a + b) / 2.0
    traj = synthetic_trajectory(50, 0.4, (anchor[0], anchor[2]), cfg.twin_bearing)
    for i in range(len(traj) - 1):
        d = np.linalg.norm(traj[i + 1].t - traj[i].t)
        assert abs(d - 0.4) <= 1e-9
        rel = traj[i].R.T @ traj[i + 1].R
        angle = math.degrees(math.acos(np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)))
        assert angle <= 2.0


def test_trajectory_yaw_cap():
    # anchor right next to the start with a large step forces a sharp turn
    with pytest.raises(ValueError, match="yaw"):
        synthetic_trajectory(5, 2.0, (1.0, 1.0), 45.0)


def test_render_zero_noise_is_exact():
    cfg = SceneConfig().scaled(1500)
    world = build_world(cfg, seed=2)
    traj = synthetic_trajectory(3, 0.4, (18.0, 18.0), 45.0)
    pose = traj[2]
    rng = np.random.default_rng(0)
    cloud = render_scan(world, pose, 0.0, rng)
    assert np.array_equal(cloud.xyz, (world - pose.t) @ pose.R)


def test_render_noise_is_seeded():
    cfg = SceneConfig().scaled(1500)
    world = build_world(cfg, seed=2)
    pose = synthetic_trajectory(1, 0.4, (18.0, 18.0), 45.0)[0]
    c1 = render_scan(world, pose, 0.05, np.random.default_rng(9))
    c2 = render_scan(world, pose, 0.05, np.random.default_rng(9))
    c3 = render_scan(world, pose, 0.05, np.random.default_rng(10))
    assert np.array_equal(c1.xyz, c2.xyz)
    assert not np.array_equal(c1.xyz, c3.xyz)


def test_generate_sequence_outputs(tmp_path):
    out = generate_sequence(tmp_path / "seq", frames=4, points=1500, noise=0.01, seed=5)
    bins = sorted((out / "velodyne").glob("*.bin"))
    assert [p.name for p in bins] == [f"{k:06d}.bin" for k in range(4)]
    gt = read_pose_file(out / "poses.txt")
    assert len(gt) == 4
    assert (out / "sequence.cfg").is_file()

    seq = load_sequence(out)
    assert len(seq) == 4
    scan = seq.read_scan(0)
    assert len(scan) == SceneConfig().scaled(1500).total_points


def test_generated_motion_stays_in_budget(tiny_seq_dir):
    gt = read_pose_file(tiny_seq_dir / "poses.txt")
    for i in range(len(gt) - 1):
        rel_R = gt[i].R.T @ gt[i + 1].R
        rel_t = gt[i].R.T @ (gt[i + 1].t - gt[i].t)
        assert np.linalg.norm(rel_t) <= 1.0
        angle = math.degrees(math.acos(np.clip((np.trace(rel_R) - 1.0) / 2.0, -1.0, 1.0)))
        assert angle <= 2.0


def test_static_sequence_repeats_scan(tmp_path):
    out = generate_sequence(tmp_path / "seq", frames=3, points=1200, noise=0.0, seed=1, step=0.0)
    ref = (out / "velodyne" / "000000.bin").read_bytes()
    for k in (1, 2):
        assert (out / "velodyne" / f"{k:06d}.bin").read_bytes() == ref


def test_regeneration_is_bit_identical(tmp_path):
    a = generate_sequence(tmp_path / "a", frames=3, points=1200, noise=0.02, seed=6)
    b = generate_sequence(tmp_path / "b", frames=3, points=1200, noise=0.02, seed=6)
    for k in range(3):
        name = f"{k:06d}.bin"
        assert (a / "velodyne" / name).read_bytes() == (b / "velodyne" / name).read_bytes()
    assert (a / "poses.txt").read_text() == (b / "poses.txt").read_text()


def test_scans_have_exact_counterparts(tmp_path):
    """Zero-noise scans of the same world differ only by the rigid motion."""
    out = generate_sequence(tmp_path / "seq", frames=2, points=1200, noise=0.0, seed=8)
    gt = read_pose_file(out / "poses.txt")
    s0 = read_velodyne_scan(out / "velodyne" / "000000.bin")
    s1 = read_velodyne_scan(out / "velodyne" / "000001.bin")
    rel_R = gt[1].R.T @ gt[0].R
    rel_t = gt[1].R.T @ (gt[0].t - gt[1].t)
    moved = s0.xyz @ rel_R.T + rel_t
    # float32 storage caps the agreement, not the geometry
    assert np.abs(moved - s1.xyz).max() <= 1e-4
