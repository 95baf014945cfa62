"""Trajectory accuracy metrics.

Two families: the KITTI segment metric (average relative translation and
rotation error over subsequences of 100..800 m, starts at every frame)
and per-frame relative-pose RMSE.  Both compare relative motions, so they
are invariant under a global change of basis; predicted and ground-truth
trajectories may live in any shared rigid frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import LengthMismatch, PathTooShort
from .geometry import Trajectory

KITTI_SEGMENT_LENGTHS = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0)


def _check_pair(pred: Trajectory, gt: Trajectory) -> None:
    if len(pred) != len(gt):
        raise LengthMismatch(f"predicted {len(pred)} poses vs ground truth {len(gt)}")
    if len(pred) < 2:
        raise ValueError("need at least 2 poses to compare trajectories")


def cumulative_distances(trajectory: Trajectory) -> np.ndarray:
    """Arc length along the trajectory, one entry per pose, starting at 0."""
    pos = trajectory.positions()
    steps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def path_length(trajectory: Trajectory) -> float:
    return float(cumulative_distances(trajectory)[-1])


def _rotation_angle(R: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, in radians."""
    c = (np.trace(R) - 1.0) * 0.5
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def kitti_errors(
    pred: Trajectory,
    gt: Trajectory,
    lengths: tuple[float, ...] = KITTI_SEGMENT_LENGTHS,
    frame_step: int = 1,
) -> tuple[float, float]:
    """KITTI benchmark averages: (translation %, rotation deg/m).

    For every start frame and segment length, the relative motion over
    the segment is compared between prediction and ground truth; the
    translation error norm and rotation angle are normalized by segment
    length and averaged over all feasible (start, length) pairs.  A path
    shorter than the smallest length raises PathTooShort.
    """
    _check_pair(pred, gt)
    dist = cumulative_distances(gt)
    P = pred.matrices()
    G = gt.matrices()

    t_errs: list[float] = []
    r_errs: list[float] = []
    for first in range(0, len(gt), frame_step):
        for length in lengths:
            target = dist[first] + length
            last = int(np.searchsorted(dist, target, side="right"))
            if last >= len(gt):
                continue
            delta_gt = np.linalg.inv(G[first]) @ G[last]
            delta_pred = np.linalg.inv(P[first]) @ P[last]
            err = np.linalg.inv(delta_pred) @ delta_gt
            t_errs.append(float(np.linalg.norm(err[:3, 3])) / length)
            r_errs.append(_rotation_angle(err[:3, :3]) / length)
    if not t_errs:
        raise PathTooShort(
            f"ground-truth path {dist[-1]:.1f} m cannot fit the smallest "
            f"segment ({min(lengths):.0f} m)"
        )
    return 100.0 * float(np.mean(t_errs)), float(np.degrees(np.mean(r_errs)))


def relative_pose_errors(pred: Trajectory, gt: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Per consecutive frame pair: translation error norms (m) and
    Euler-XYZ rotation residual norms (rad) of the relative-motion error."""
    _check_pair(pred, gt)
    P = pred.matrices()
    G = gt.matrices()
    delta_pred = np.einsum("nij,njk->nik", np.linalg.inv(P[:-1]), P[1:])
    delta_gt = np.einsum("nij,njk->nik", np.linalg.inv(G[:-1]), G[1:])
    err = np.einsum("nij,njk->nik", np.linalg.inv(delta_gt), delta_pred)
    t_err = np.linalg.norm(err[:, :3, 3], axis=1)
    euler = Rotation.from_matrix(err[:, :3, :3]).as_euler("xyz")
    r_err = np.linalg.norm(euler, axis=1)
    return t_err, r_err


def relative_pose_rmse(pred: Trajectory, gt: Trajectory) -> tuple[float, float]:
    """(translation RMSE in m, rotation RMSE in rad) over per-frame
    relative-motion errors; vector-norm convention on both residuals."""
    t_err, r_err = relative_pose_errors(pred, gt)
    return float(np.sqrt(np.mean(t_err**2))), float(np.sqrt(np.mean(r_err**2)))


def final_drift(pred: Trajectory, gt: Trajectory) -> float:
    """End-position error as a fraction of ground-truth path length."""
    _check_pair(pred, gt)
    length = path_length(gt)
    if length <= 0.0:
        raise PathTooShort("ground-truth path has zero length")
    gap = float(np.linalg.norm(pred[-1].t - gt[-1].t))
    return gap / length


@dataclass(frozen=True)
class OdometryErrors:
    """Summary of one prediction/ground-truth comparison.

    KITTI fields are NaN when no 100 m segment fits the path (short
    synthetic sequences); the relative metrics always exist.
    """

    kitti_translation_pct: float
    kitti_rotation_deg_per_m: float
    rel_translation_rmse_m: float
    rel_rotation_rmse_rad: float
    drift_fraction: float

    @property
    def rel_rotation_rmse_deg(self) -> float:
        return math.degrees(self.rel_rotation_rmse_rad)


def evaluate_trajectories(pred: Trajectory, gt: Trajectory) -> OdometryErrors:
    """All metrics at once; KITTI fields degrade to NaN on short paths."""
    try:
        kitti_t, kitti_r = kitti_errors(pred, gt)
    except PathTooShort:
        kitti_t, kitti_r = float("nan"), float("nan")
    rel_t, rel_r = relative_pose_rmse(pred, gt)
    return OdometryErrors(
        kitti_translation_pct=kitti_t,
        kitti_rotation_deg_per_m=kitti_r,
        rel_translation_rmse_m=rel_t,
        rel_rotation_rmse_rad=rel_r,
        drift_fraction=final_drift(pred, gt),
    )
