"""KITTI-format I/O: velodyne binaries, pose files, calibration, PLY.

Scan files hold little-endian float32 (x, y, z, reflectance) quadruples.
Raw velodyne axes are +X forward / +Y left / +Z up; the pipeline frame is
+Z forward / +Y up / +X right, and the signed-permutation ``AxisMapping``
converts between them on read/write.  Pose files carry one row-major 3x4
matrix (12 floats) per line.
"""

from __future__ import annotations

import configparser
import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, MalformedPose, MalformedScan, WriteError
from .geometry import PointCloud, Pose, Trajectory

logger = logging.getLogger(__name__)

_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}

# pipeline axes expressed in velodyne components: x' = -y, y' = z, z' = x
DEFAULT_AXIS_MAPPING = "-y,z,x"
IDENTITY_AXIS_MAPPING = "x,y,z"


@dataclass(frozen=True)
class AxisMapping:
    """Signed axis permutation between storage and pipeline coordinates.

    The mapping string names, per pipeline axis, the storage component it
    reads from: ``"-y,z,x"`` means pipeline (x, y, z) = storage (-y, z, x).
    Composing with the inverse is the identity exactly (signed
    permutations are closed under inversion; no rounding is involved).
    """

    spec: str = DEFAULT_AXIS_MAPPING

    def __post_init__(self) -> None:
        perm, signs = _parse_axis_spec(self.spec)
        object.__setattr__(self, "_perm", perm)
        object.__setattr__(self, "_signs", signs)

    @classmethod
    def identity(cls) -> "AxisMapping":
        return cls(IDENTITY_AXIS_MAPPING)

    @property
    def matrix(self) -> np.ndarray:
        M = np.zeros((3, 3))
        for row in range(3):
            M[row, self._perm[row]] = self._signs[row]
        return M

    def apply(self, xyz: np.ndarray) -> np.ndarray:
        pts = np.asarray(xyz)
        return pts[..., self._perm] * self._signs

    def inverse(self) -> "AxisMapping":
        tokens = [""] * 3
        names = "xyz"
        for row in range(3):
            sign = "-" if self._signs[row] < 0 else ""
            tokens[self._perm[row]] = sign + names[row]
        return AxisMapping(",".join(tokens))

    def homogeneous(self) -> np.ndarray:
        H = np.eye(4)
        H[:3, :3] = self.matrix
        return H


def _parse_axis_spec(spec: str) -> tuple[np.ndarray, np.ndarray]:
    tokens = [t.strip().lower() for t in spec.split(",")]
    if len(tokens) != 3:
        raise ValueError(f"axis mapping needs 3 tokens, got {spec!r}")
    perm = np.empty(3, dtype=np.int64)
    signs = np.empty(3)
    for i, tok in enumerate(tokens):
        m = re.fullmatch(r"([+-]?)([xyz])", tok)
        if not m:
            raise ValueError(f"bad axis token {tok!r} in {spec!r}")
        signs[i] = -1.0 if m.group(1) == "-" else 1.0
        perm[i] = _AXIS_INDEX[m.group(2)]
    if len(set(perm.tolist())) != 3:
        raise ValueError(f"axis mapping must use each axis once: {spec!r}")
    perm.flags.writeable = False
    signs.flags.writeable = False
    return perm, signs


# ---------------------------------------------------------------------------
# Velodyne binary scans
# ---------------------------------------------------------------------------


def read_velodyne_scan(path, mapping: AxisMapping | None = None) -> PointCloud:
    """Read one .bin scan into the pipeline frame.

    Rejects files whose size is not a multiple of 16 bytes, empty files,
    and any non-finite value.
    """
    path = Path(path)
    raw = np.fromfile(path, dtype="<f4")
    if raw.size == 0:
        raise MalformedScan(f"{path}: empty scan")
    if raw.size % 4 != 0:
        raise MalformedScan(f"{path}: size {raw.size * 4} bytes is not a multiple of 16")
    if not np.isfinite(raw).all():
        raise MalformedScan(f"{path}: non-finite values")
    pts = raw.reshape(-1, 4)
    xyz = pts[:, :3].astype(np.float64)
    if mapping is not None:
        xyz = mapping.apply(xyz)
    return PointCloud(xyz, intensity=pts[:, 3].astype(np.float64))


def write_velodyne_scan(cloud: PointCloud, path, mapping: AxisMapping | None = None) -> None:
    """Write a cloud as a .bin scan, undoing the axis mapping first."""
    xyz = cloud.xyz
    if mapping is not None:
        xyz = mapping.inverse().apply(xyz)
    inten = cloud.intensity if cloud.intensity is not None else np.zeros(len(cloud))
    out = np.empty((len(cloud), 4), dtype="<f4")
    out[:, :3] = xyz
    out[:, 3] = inten
    try:
        with open(path, "wb") as fh:
            fh.write(out.tobytes())
    except OSError as exc:
        raise WriteError(f"cannot write scan {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Pose files and calibration
# ---------------------------------------------------------------------------

# accept a slightly bent rotation block and snap it back; reject worse
_REORTHO_LIMIT = 1e-3


def _nearest_rotation(R: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(R)
    d = np.sign(np.linalg.det(U @ Vt))
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def _pose_from_row(values: np.ndarray, where: str) -> Pose:
    M = values.reshape(3, 4)
    if not np.isfinite(M).all():
        raise MalformedPose(f"{where}: non-finite pose entries")
    R = M[:, :3]
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > _REORTHO_LIMIT:
        raise MalformedPose(f"{where}: rotation error {err:.3e} exceeds {_REORTHO_LIMIT}")
    return Pose(_nearest_rotation(R), M[:, 3])


def read_pose_file(path) -> Trajectory:
    """Parse a KITTI pose file: 12 floats per line, row-major 3x4.

    Rotation blocks are re-orthonormalized when their error is small
    (file truncation to 9 digits bends them slightly); anything beyond
    the tolerance raises MalformedPose.
    """
    path = Path(path)
    poses = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 12:
            raise MalformedPose(f"{path}:{lineno}: expected 12 fields, got {len(fields)}")
        try:
            values = np.array([float(f) for f in fields])
        except ValueError as exc:
            raise MalformedPose(f"{path}:{lineno}: {exc}") from exc
        poses.append(_pose_from_row(values, f"{path}:{lineno}"))
    if not poses:
        raise MalformedPose(f"{path}: no poses")
    return Trajectory(tuple(poses))


def write_trajectory(trajectory: Trajectory, path) -> None:
    """Write poses as KITTI rows with full float64 round-trip precision."""
    try:
        with open(path, "w") as fh:
            for pose in trajectory:
                row = np.hstack([pose.R, pose.t[:, None]]).reshape(-1)
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    except OSError as exc:
        raise WriteError(f"cannot write trajectory {path}: {exc}") from exc


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    """Positions only, one ``frame,x,y,z`` row per pose (plotting aid)."""
    try:
        with open(path, "w") as fh:
            fh.write("frame,x,y,z\n")
            for i, pose in enumerate(trajectory):
                t = pose.t
                fh.write(f"{i},{t[0]:.17g},{t[1]:.17g},{t[2]:.17g}\n")
    except OSError as exc:
        raise WriteError(f"cannot write trajectory csv {path}: {exc}") from exc


def read_calibration(path) -> dict[str, np.ndarray]:
    """Parse a KITTI calib.txt into name -> 4x4 homogeneous transforms."""
    out: dict[str, np.ndarray] = {}
    path = Path(path)
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        key, _, rest = line.partition(":")
        fields = rest.split()
        if len(fields) != 12:
            raise MalformedPose(f"{path}:{lineno}: expected 12 fields, got {len(fields)}")
        try:
            values = np.array([float(f) for f in fields])
        except ValueError as exc:
            raise MalformedPose(f"{path}:{lineno}: {exc}") from exc
        T = np.eye(4)
        T[:3] = values.reshape(3, 4)
        if not np.isfinite(T).all():
            raise MalformedPose(f"{path}:{lineno}: non-finite calibration")
        out[key.strip()] = T
    return out


def transform_trajectory(trajectory: Trajectory, T: np.ndarray) -> Trajectory:
    """Conjugate every pose by ``T``: poses move to the frame ``T`` maps into."""
    T = np.asarray(T, dtype=np.float64)
    T_inv = np.linalg.inv(T)
    mats = trajectory.matrices()
    out = np.einsum("ij,njk,kl->nil", T, mats, T_inv)
    # conjugation keeps rows exact only in exact arithmetic; rebuild poses
    poses = []
    for M in out:
        R = _nearest_rotation(M[:3, :3])
        poses.append(Pose(R, M[:3, 3]))
    return Trajectory(tuple(poses))


def ground_truth_in_pipeline_frame(
    poses: Trajectory,
    calib: dict[str, np.ndarray] | None,
    mapping: AxisMapping,
) -> Trajectory:
    """Bring camera-frame ground truth into the pipeline LiDAR frame.

    Applies ``Tr`` (velodyne -> camera) as ``Tr^-1 T Tr`` when the
    calibration provides it, then the axis mapping conjugation.  Without
    calibration the poses pass through with a warning (all evaluation
    metrics are invariant to the shared frame, only overlay plots shift).
    """
    traj = poses
    H = mapping.homogeneous()
    identity_mapping = np.array_equal(H, np.eye(4))
    if calib and "Tr" in calib:
        traj = transform_trajectory(traj, np.linalg.inv(calib["Tr"]))
    elif not identity_mapping:
        # identity-mapped sequences store poses in the pipeline frame already
        logger.warning("no Tr calibration; using ground-truth poses as-is")
    if not identity_mapping:
        traj = transform_trajectory(traj, H)
    return traj


# ---------------------------------------------------------------------------
# ASCII PLY (synthetic-test import/export)
# ---------------------------------------------------------------------------


def read_ply_cloud(path) -> PointCloud:
    """Minimal ASCII PLY reader: ``element vertex`` with x/y/z properties."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MalformedScan(f"{path}: missing ply magic")
    n_vertex = None
    header_end = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n_vertex = int(parts[2])
        if parts[:1] == ["end_header"]:
            header_end = i
            break
    if n_vertex is None or header_end is None:
        raise MalformedScan(f"{path}: incomplete header")
    rows = lines[header_end + 1 : header_end + 1 + n_vertex]
    if len(rows) < n_vertex:
        raise MalformedScan(f"{path}: {len(rows)} vertex rows, header promised {n_vertex}")
    try:
        xyz = np.array([[float(v) for v in r.split()[:3]] for r in rows])
    except (ValueError, IndexError) as exc:
        raise MalformedScan(f"{path}: bad vertex row: {exc}") from exc
    if xyz.size == 0:
        raise MalformedScan(f"{path}: empty vertex list")
    if not np.isfinite(xyz).all():
        raise MalformedScan(f"{path}: non-finite vertices")
    return PointCloud(xyz)


def write_ply_cloud(cloud: PointCloud, path) -> None:
    try:
        with open(path, "w") as fh:
            fh.write("ply\nformat ascii 1.0\n")
            fh.write(f"element vertex {len(cloud)}\n")
            fh.write("property float x\nproperty float y\nproperty float z\n")
            fh.write("end_header\n")
            for p in cloud.xyz:
                fh.write(f"{p[0]:.8g} {p[1]:.8g} {p[2]:.8g}\n")
    except OSError as exc:
        raise WriteError(f"cannot write ply {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Sequence discovery
# ---------------------------------------------------------------------------

SEQUENCE_META = "sequence.cfg"


@dataclass(frozen=True)
class ScanSequence:
    """A scan directory plus optional ground truth and calibration."""

    name: str
    scan_paths: tuple[Path, ...]
    axis_mapping: AxisMapping
    ground_truth: Trajectory | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scan_paths", tuple(Path(p) for p in self.scan_paths))
        if not self.scan_paths:
            raise MalformedScan(f"sequence {self.name}: no scan files")
        if self.ground_truth is not None and len(self.ground_truth) != len(self.scan_paths):
            raise LengthMismatch(
                f"sequence {self.name}: {len(self.scan_paths)} scans vs "
                f"{len(self.ground_truth)} ground-truth poses"
            )

    def __len__(self) -> int:
        return len(self.scan_paths)

    def read_scan(self, index: int) -> PointCloud:
        return read_velodyne_scan(self.scan_paths[index], self.axis_mapping)


def _sorted_bins(directory: Path) -> tuple[Path, ...]:
    return tuple(sorted(directory.glob("*.bin")))


def load_kitti_sequence(data_root, sequence: str, mapping: AxisMapping | None = None) -> ScanSequence:
    """Standard KITTI odometry layout: sequences/<id>/velodyne + poses/<id>.txt."""
    root = Path(data_root)
    mapping = mapping if mapping is not None else AxisMapping()
    seq_dir = root / "sequences" / sequence
    scans = _sorted_bins(seq_dir / "velodyne")
    if not scans:
        raise MalformedScan(f"no scans under {seq_dir / 'velodyne'}")

    calib = None
    calib_path = seq_dir / "calib.txt"
    if calib_path.exists():
        calib = read_calibration(calib_path)

    gt = None
    pose_path = root / "poses" / f"{sequence}.txt"
    if pose_path.exists():
        gt = ground_truth_in_pipeline_frame(read_pose_file(pose_path), calib, mapping)

    return ScanSequence(sequence, scans, mapping, gt)


def load_flat_sequence(directory, mapping: AxisMapping | None = None) -> ScanSequence:
    """Flat layout (synthetic output): <dir>/velodyne/*.bin [+ poses.txt].

    A ``sequence.cfg`` in the directory may pin the axis mapping the scans
    were written with; it wins over the caller's default.
    """
    d = Path(directory)
    meta_path = d / SEQUENCE_META
    if meta_path.exists():
        parser = configparser.ConfigParser()
        parser.read(meta_path)
        mapping = AxisMapping(parser.get("sequence", "axis_mapping", fallback=DEFAULT_AXIS_MAPPING))
    elif mapping is None:
        mapping = AxisMapping()

    scan_dir = d / "velodyne" if (d / "velodyne").is_dir() else d
    scans = _sorted_bins(scan_dir)
    if not scans:
        raise MalformedScan(f"no scans under {scan_dir}")

    calib = None
    if (d / "calib.txt").exists():
        calib = read_calibration(d / "calib.txt")

    gt = None
    if (d / "poses.txt").exists():
        gt = ground_truth_in_pipeline_frame(read_pose_file(d / "poses.txt"), calib, mapping)

    return ScanSequence(d.name, scans, mapping, gt)


def load_sequence(path, sequence: str | None = None, mapping: AxisMapping | None = None) -> ScanSequence:
    """Dispatch on layout: KITTI root when ``sequence`` is given, else flat."""
    if sequence:
        return load_kitti_sequence(path, sequence, mapping)
    return load_flat_sequence(path, mapping)
