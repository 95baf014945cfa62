"""Synthetic LiDAR-style sequences with known ground truth.

The default scene is a road corridor in the pipeline frame (+Z forward,
+Y up): a uniform ground plane, a wall set back from the ground edge (so
the two planes never meet -- an intersection line would survive the
eigen filter and slide along the corridor), twenty thin poles standing
on the ground, and three isotropic Gaussian blobs.  Pole bases mix line
and plane statistics, so they pass the geometry-aware filter and act as
the distinctive anchors; plane interiors and pole shafts are filtered.
Two compact blobs are near-identical point patterns straddling the
45-degree view boundary, and the trajectory is a steady curve holding
the pair at that bearing, so telling them apart genuinely depends on
view partitioning; a third, larger blob gives the samplers a wide
isotropic structure.

Every scan observes the same world points from the current pose plus
fresh per-scan Gaussian noise, so exact cross-frame counterparts exist.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Pose, PointCloud, Trajectory
from .kitti_io import (
    IDENTITY_AXIS_MAPPING,
    SEQUENCE_META,
    AxisMapping,
    write_trajectory,
    write_velodyne_scan,
)

DEFAULT_SEED = 7

# (x, z) of the 20 pole bases: two staggered roadside rows, all on ground
POLE_SITES = (
    (-9.5, -6.0), (-9.1, 0.9), (-9.8, 7.8), (-9.3, 14.7), (-9.6, 21.6),
    (-9.0, 28.4), (-9.7, 35.3), (-9.2, 42.2), (-9.9, 49.1), (-9.4, 56.0),
    (9.5, -3.0), (9.9, 3.8), (9.2, 10.6), (9.7, 17.3), (9.0, 24.1),
    (9.6, 30.9), (9.3, 37.7), (9.8, 44.4), (9.1, 51.2), (9.4, 58.0),
)


@dataclass(frozen=True)
class SceneConfig:
    """Composition of the synthetic world (counts at ~20k points/scan).

    The twin blobs are identical point patterns straddling the 45-degree
    view boundary, so any cross-boundary twin confusion is exactly what
    view partitioning is positioned to rule out.  All blobs are sparse
    (inter-point spacing far above the noise scale, keeping per-point
    neighborhoods and hence features stable frame to frame) and float
    well clear of the ground so their filter neighborhoods stay
    self-contained.
    """

    n_ground: int = 9000
    n_wall: int = 2500
    pole_points: int = 150
    twin_points: int = 330
    third_points: int = 330

    ground_y: float = -1.7
    ground_x: tuple[float, float] = (-10.5, 14.0)
    ground_z: tuple[float, float] = (-8.0, 58.0)
    wall_x: float = -13.0
    wall_y: tuple[float, float] = (-1.7, 4.3)

    pole_sites: tuple = POLE_SITES
    pole_y: tuple[float, float] = (-1.7, 2.8)
    pole_jitter: float = 0.02

    twin_y: float = 2.6
    twin_sigma: float = 1.1
    twin_bearing: float = 45.0
    twin_radius: float = 26.0
    twin_separation: float = 5.6
    third_y: float = 2.6
    third_sigma: float = 1.1
    third_blob: tuple[float, float] = (140.0, 13.5)

    def scaled(self, total_points: int) -> "SceneConfig":
        """Rescale component counts to roughly ``total_points`` per scan."""
        f = total_points / self.total_points
        return SceneConfig(
            n_ground=max(100, round(self.n_ground * f)),
            n_wall=max(50, round(self.n_wall * f)),
            pole_points=max(20, round(self.pole_points * f)),
            twin_points=max(60, round(self.twin_points * f)),
            third_points=max(60, round(self.third_points * f)),
            ground_y=self.ground_y,
            ground_x=self.ground_x,
            ground_z=self.ground_z,
            wall_x=self.wall_x,
            wall_y=self.wall_y,
            pole_sites=self.pole_sites,
            pole_y=self.pole_y,
            pole_jitter=self.pole_jitter,
            twin_y=self.twin_y,
            twin_sigma=self.twin_sigma,
            twin_bearing=self.twin_bearing,
            twin_radius=self.twin_radius,
            twin_separation=self.twin_separation,
            third_y=self.third_y,
            third_sigma=self.third_sigma,
            third_blob=self.third_blob,
        )

    @property
    def total_points(self) -> int:
        return (
            self.n_ground
            + self.n_wall
            + len(self.pole_sites) * self.pole_points
            + 2 * self.twin_points
            + self.third_points
        )


def _bearing_xz(bearing_deg: float, radius: float) -> tuple[float, float]:
    b = math.radians(bearing_deg)
    return radius * math.cos(b), radius * math.sin(b)


def twin_blob_centers(config: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    """World centers of the twin blob pair, symmetric about the boundary."""
    half_deg = math.degrees(config.twin_separation / 2.0 / config.twin_radius)
    ax, az = _bearing_xz(config.twin_bearing - half_deg, config.twin_radius)
    bx, bz = _bearing_xz(config.twin_bearing + half_deg, config.twin_radius)
    y = config.twin_y
    return np.array([ax, y, az]), np.array([bx, y, bz])


def build_world(config: SceneConfig, seed: int) -> np.ndarray:
    """Static world point set, (W, 3) float64."""
    rng = np.random.default_rng([seed, 0])
    parts = []

    gx = rng.uniform(*config.ground_x, config.n_ground)
    gz = rng.uniform(*config.ground_z, config.n_ground)
    parts.append(np.column_stack([gx, np.full(config.n_ground, config.ground_y), gz]))

    wy = rng.uniform(*config.wall_y, config.n_wall)
    wz = rng.uniform(*config.ground_z, config.n_wall)
    parts.append(np.column_stack([np.full(config.n_wall, config.wall_x), wy, wz]))

    for px, pz in config.pole_sites:
        y = np.linspace(*config.pole_y, config.pole_points)
        jitter = rng.normal(0.0, config.pole_jitter, (config.pole_points, 2))
        parts.append(np.column_stack([px + jitter[:, 0], y, pz + jitter[:, 1]]))

    offsets = rng.normal(0.0, config.twin_sigma, (config.twin_points, 3))
    center_a, center_b = twin_blob_centers(config)
    parts.append(center_a + offsets)
    parts.append(center_b + offsets)  # exact twin: same local pattern

    cx, cz = _bearing_xz(*config.third_blob)
    third = rng.normal(0.0, config.third_sigma, (config.third_points, 3))
    parts.append(np.array([cx, config.third_y, cz]) + third)

    return np.concatenate(parts)


def _heading_matrix(heading_rad: float) -> np.ndarray:
    c, s = math.cos(heading_rad), math.sin(heading_rad)
    # rotation about +Y; positive heading veers the local +Z toward +X
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def synthetic_trajectory(
    n_frames: int,
    step: float,
    anchor_xz: tuple[float, float],
    anchor_bearing_deg: float = 45.0,
    max_yaw_deg: float = 2.0,
) -> Trajectory:
    """Curved path holding a constant sensor bearing to a scene anchor.

    Each frame the heading is set so the anchor sits at
    ``anchor_bearing_deg`` in the sensor frame, then the vehicle advances
    ``step`` meters along its local +Z.  This produces a smooth steady
    curve (the classic drive past a roadside landmark).  Raises if any
    per-frame yaw change would exceed ``max_yaw_deg``.
    """
    ax, az = anchor_xz
    pos = np.zeros(3)
    poses = []
    prev_heading = None
    for _ in range(n_frames):
        bearing = math.degrees(math.atan2(az - pos[2], ax - pos[0]))
        heading = math.radians(anchor_bearing_deg - bearing)
        if prev_heading is not None:
            yaw = math.degrees(abs(heading - prev_heading))
            if yaw > max_yaw_deg:
                raise ValueError(f"per-frame yaw {yaw:.2f} deg exceeds {max_yaw_deg}")
        prev_heading = heading
        R = _heading_matrix(heading)
        poses.append(Pose(R, pos.copy()))
        pos = pos + R @ np.array([0.0, 0.0, step])
    return Trajectory(tuple(poses))


def render_scan(world: np.ndarray, pose: Pose, noise: float, rng: np.random.Generator) -> PointCloud:
    """Observe the world from ``pose`` with fresh per-point Gaussian noise."""
    local = (world - pose.t) @ pose.R
    if noise > 0.0:
        local = local + rng.normal(0.0, noise, local.shape)
    return PointCloud(local)


def generate_sequence(
    out_dir,
    frames: int = 50,
    points: int = 20000,
    noise: float = 0.02,
    seed: int = DEFAULT_SEED,
    step: float = 0.4,
    scene: SceneConfig | None = None,
) -> Path:
    """Write a synthetic sequence: velodyne/*.bin, poses.txt, sequence.cfg.

    Scans are stored in the pipeline frame (identity axis mapping, pinned
    by sequence.cfg); poses.txt holds the ground-truth sensor-to-world
    transforms in KITTI row format.
    """
    out = Path(out_dir)
    scan_dir = out / "velodyne"
    scan_dir.mkdir(parents=True, exist_ok=True)

    config = (scene or SceneConfig()).scaled(points)
    world = build_world(config, seed)
    center_a, center_b = twin_blob_centers(config)
    anchor = (center_a + center_b) / 2.0
    trajectory = synthetic_trajectory(
        frames, step, (anchor[0], anchor[2]), config.twin_bearing
    )

    mapping = AxisMapping.identity()
    for k, pose in enumerate(trajectory):
        rng = np.random.default_rng([seed, 1, k])
        cloud = render_scan(world, pose, noise, rng)
        write_velodyne_scan(cloud, scan_dir / f"{k:06d}.bin", mapping)

    write_trajectory(trajectory, out / "poses.txt")

    meta = configparser.ConfigParser()
    meta["sequence"] = {"axis_mapping": IDENTITY_AXIS_MAPPING}
    meta["scene"] = {
        "frames": str(frames),
        "points_per_scan": str(config.total_points),
        "noise_m": repr(noise),
        "seed": str(seed),
        "step_m": repr(step),
    }
    with open(out / SEQUENCE_META, "w") as fh:
        meta.write(fh)
    return out
