"""Core geometric value types shared by every pipeline stage.

Everything here is an immutable value: wrapped arrays are frozen at
construction, so instances can be shared freely between stages without
defensive copies.  Rotations are validated once, at the boundary, and all
pose math runs in 64-bit floats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# A matrix is accepted as a rotation when max |R'R - I| and |det R - 1|
# stay below this bound.
ROTATION_TOL = 1e-9


def _freeze(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


def _check_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> None:
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    if not np.isfinite(R).all():
        raise ValueError("rotation contains non-finite values")
    ortho_err = np.abs(R.T @ R - np.eye(3)).max()
    if ortho_err > tol:
        raise ValueError(f"matrix is not orthonormal (|R'R - I|max = {ortho_err:.3e})")
    det = np.linalg.det(R)
    if abs(det - 1.0) > tol:
        raise ValueError(f"matrix is not a proper rotation (det = {det:.12f})")


def _check_vector(t: np.ndarray, name: str) -> None:
    if t.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {t.shape}")
    if not np.isfinite(t).all():
        raise ValueError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class PointCloud:
    """Ordered set of 3D points in meters with optional per-point intensity.

    ``xyz`` is an (N, 3) float64 array; ``intensity`` an optional (N,)
    array.  Points must be finite; emptiness is allowed (view partitions
    can be empty) and is checked by the stages that need points.
    """

    xyz: np.ndarray
    intensity: np.ndarray | None = None

    def __post_init__(self) -> None:
        xyz = np.ascontiguousarray(self.xyz, dtype=np.float64)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError(f"xyz must be (N, 3), got {xyz.shape}")
        if not np.isfinite(xyz).all():
            raise ValueError("point coordinates must be finite")
        xyz.flags.writeable = False
        object.__setattr__(self, "xyz", xyz)
        if self.intensity is not None:
            inten = np.ascontiguousarray(self.intensity, dtype=np.float64)
            if inten.shape != (len(xyz),):
                raise ValueError(
                    f"intensity must have shape ({len(xyz)},), got {inten.shape}"
                )
            if not np.isfinite(inten).all():
                raise ValueError("intensity contains non-finite values")
            inten.flags.writeable = False
            object.__setattr__(self, "intensity", inten)

    def __len__(self) -> int:
        return self.xyz.shape[0]

    def take(self, indices) -> "PointCloud":
        """Subset cloud by integer indices or a boolean mask."""
        idx = np.asarray(indices)
        inten = None if self.intensity is None else self.intensity[idx]
        return PointCloud(self.xyz[idx], inten)


@dataclass(frozen=True)
class RigidMotion:
    """Proper rigid transform ``y = R @ x + t`` between two scans."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        R = np.ascontiguousarray(self.R, dtype=np.float64)
        t = np.ascontiguousarray(self.t, dtype=np.float64)
        _check_rotation(R)
        _check_vector(t, "translation")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "RigidMotion":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (N, 3) batch."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.R.T + self.t

    def inverse(self) -> "RigidMotion":
        return RigidMotion(self.R.T, -self.R.T @ self.t)

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.t
        return T


@dataclass(frozen=True)
class Pose:
    """Absolute pose as a homogeneous transform with a structural bottom row.

    Only ``R`` and ``t`` are stored; the (0, 0, 0, 1) row exists by
    construction, never as data, so it cannot drift no matter how many
    compositions a trajectory accumulates.
    """

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        R = np.ascontiguousarray(self.R, dtype=np.float64)
        t = np.ascontiguousarray(self.t, dtype=np.float64)
        _check_rotation(R)
        _check_vector(t, "translation")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "Pose":
        T = np.asarray(T, dtype=np.float64)
        if T.shape != (4, 4):
            raise ValueError(f"pose matrix must be 4x4, got {T.shape}")
        if not np.allclose(T[3], (0.0, 0.0, 0.0, 1.0), rtol=0.0, atol=1e-12):
            raise ValueError(f"pose matrix bottom row must be (0,0,0,1), got {T[3]}")
        return cls(T[:3, :3], T[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.t
        return T

    def inverse(self) -> "Pose":
        return Pose(self.R.T, -self.R.T @ self.t)


def compose_pose(prev: Pose, motion: RigidMotion) -> Pose:
    """Right-multiply a pose by a relative motion: ``T_new = T_prev * M``."""
    return Pose(prev.R @ motion.R, prev.R @ motion.t + prev.t)


@dataclass(frozen=True)
class Trajectory:
    """Sequence of absolute poses, one per processed scan."""

    poses: tuple[Pose, ...]

    def __post_init__(self) -> None:
        poses = tuple(self.poses)
        if not poses:
            raise ValueError("a trajectory must contain at least one pose")
        if not all(isinstance(p, Pose) for p in poses):
            raise TypeError("trajectory entries must be Pose instances")
        object.__setattr__(self, "poses", poses)

    @classmethod
    def identity(cls) -> "Trajectory":
        return cls((Pose.identity(),))

    @classmethod
    def from_matrices(cls, matrices) -> "Trajectory":
        return cls(tuple(Pose.from_matrix(T) for T in matrices))

    def __len__(self) -> int:
        return len(self.poses)

    def __iter__(self):
        return iter(self.poses)

    def __getitem__(self, i) -> Pose:
        return self.poses[i]

    def matrices(self) -> np.ndarray:
        """All poses stacked as an (N, 4, 4) array."""
        return np.stack([p.matrix for p in self.poses])

    def positions(self) -> np.ndarray:
        """Translation parts stacked as (N, 3)."""
        return np.stack([p.t for p in self.poses])

    def with_appended(self, pose: Pose) -> "Trajectory":
        return Trajectory(self.poses + (pose,))
