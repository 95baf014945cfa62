"""Rigid motion estimation from point correspondences (SVD alignment)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InsufficientPoints
from .geometry import Pose, RigidMotion, Trajectory, compose_pose

# rank(K) < 2 when the second singular value vanishes relative to the first
_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class CorrespondenceCloud:
    """Paired points: row i of ``X`` corresponds to row i of ``Y``."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self) -> None:
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        Y = np.ascontiguousarray(self.Y, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != 3 or X.shape != Y.shape:
            raise ValueError(f"X and Y must share shape (N, 3); got {X.shape} and {Y.shape}")
        if len(X) < 3:
            raise InsufficientPoints(f"need >= 3 correspondences, got {len(X)}")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise ValueError("correspondences contain non-finite values")
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def __len__(self) -> int:
        return len(self.X)


def estimate_rigid_motion(pairs: CorrespondenceCloud) -> tuple[RigidMotion, float]:
    """Least-squares rigid motion mapping X onto Y, plus its residual.

    Minimizes mean ||R x_i + t - y_i||^2 over proper rotations via the
    cross-covariance SVD; the sign of the smallest singular direction is
    corrected so a reflection can never be returned.  The residual (mean
    squared error) comes back alongside the motion for diagnostics.
    """
    X, Y = pairs.X, pairs.Y
    x_bar = X.mean(axis=0)
    y_bar = Y.mean(axis=0)
    Xc = X - x_bar
    Yc = Y - y_bar

    K = Xc.T @ Yc
    U, S, Vt = np.linalg.svd(K)
    if S[0] <= 0.0 or S[1] <= _RANK_RTOL * S[0]:
        raise DegenerateGeometry(
            f"cross-covariance rank < 2 (singular values {S}); rotation unobservable"
        )
    V = Vt.T
    d = np.sign(np.linalg.det(V @ U.T))
    R = V @ np.diag([1.0, 1.0, d]) @ U.T
    t = y_bar - R @ x_bar

    residual = float(np.mean(np.sum((X @ R.T + t - Y) ** 2, axis=1)))
    return RigidMotion(R, t), residual


def accumulate(trajectory: Trajectory, motion: RigidMotion) -> Trajectory:
    """Extend a trajectory by one relative motion: ``T_n = T_{n-1} * M``."""
    return trajectory.with_appended(compose_pose(trajectory[-1], motion))
