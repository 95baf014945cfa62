"""End-to-end odometry: train a feature model, then track scan pairs.

Per-frame randomness is derived from the master seed and the frame index
so runs are reproducible and any frame can be recomputed in isolation.
A frame whose matching or motion estimate fails degrades to an identity
step with a warning instead of aborting the run.  Stage timings are
collected per frame but kept out of the science outputs so reruns stay
bit-identical.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import (
    DegenerateGeometry,
    EmptySelection,
    InsufficientPoints,
    NoCorrespondences,
    RansacFailure,
)
from .features import SaabModel, extract_features, train_saab
from .geometry import PointCloud, RigidMotion, Trajectory
from .kitti_io import ScanSequence
from .matching import match_views, ransac_filter
from .motion import accumulate
from .sampling import select_points
from .views import view_labels

_STREAM_SAMPLING = 1
_STREAM_RANSAC = 2


def derive_seed(master: int, stream: int, frame: int) -> int:
    """Stable per-frame seed from the master seed and a stream id."""
    return int(np.random.SeedSequence([master, stream, frame]).generate_state(1)[0])


def training_frames(n_frames: int, count: int) -> list[int]:
    """Uniform-stride frame indices, always including the first scan."""
    if n_frames < 1:
        raise ValueError("sequence has no frames")
    count = min(count, n_frames)
    return sorted(set(np.linspace(0, n_frames - 1, count).round().astype(int).tolist()))


def train_model(sequences, config: RunConfig) -> SaabModel:
    """Fit the two-hop feature model on subsampled training scans.

    ``sequences`` is one ScanSequence or a list of them; scans are strided
    uniformly over the concatenated frame list, sampled with the configured
    strategy, and fed to Saab training.
    """
    if isinstance(sequences, ScanSequence):
        sequences = [sequences]
    entries = [(seq, frame) for seq in sequences for frame in range(len(seq))]
    clouds = []
    for pick in training_frames(len(entries), config.train_scans):
        seq, frame = entries[pick]
        cloud = seq.read_scan(frame)
        seed = derive_seed(config.seed, _STREAM_SAMPLING, pick)
        selection = select_points(cloud, config.sampling_config(seed))
        clouds.append(cloud.take(selection.indices))
    return train_saab(clouds, config.feature_config())


@dataclass
class FrameTimings:
    """Wall-clock seconds per pipeline stage for one frame."""

    sampling: float = 0.0
    features: float = 0.0
    matching: float = 0.0
    motion: float = 0.0

    HEADER = "frame,sampling_s,features_s,matching_s,motion_s,total_s"

    @property
    def total(self) -> float:
        return self.sampling + self.features + self.matching + self.motion

    def row(self, frame: int) -> str:
        return (
            f"{frame},{self.sampling:.6f},{self.features:.6f},"
            f"{self.matching:.6f},{self.motion:.6f},{self.total:.6f}"
        )


@dataclass
class FrameDiagnostics:
    """Per-frame result bookkeeping; timings live in ``timings``."""

    frame: int
    raw_points: int
    selected_points: int
    pairs: int
    inliers: int
    residual: float
    iterations: int
    attempts: int
    fallback: bool
    note: str
    timings: FrameTimings = field(default_factory=FrameTimings)

    HEADER = (
        "frame,raw_points,selected_points,pairs,inliers,"
        "residual,iterations,attempts,fallback,note"
    )

    def row(self) -> str:
        return (
            f"{self.frame},{self.raw_points},{self.selected_points},"
            f"{self.pairs},{self.inliers},{self.residual:.17g},"
            f"{self.iterations},{self.attempts},{int(self.fallback)},{self.note}"
        )


@dataclass
class OdometryResult:
    trajectory: Trajectory
    frames: list[FrameDiagnostics]

    @property
    def fallback_count(self) -> int:
        return sum(f.fallback for f in self.frames)


class _FrameState:
    """Sampled coordinates, view labels, and features of one scan."""

    __slots__ = ("coords", "labels", "features", "selected")

    def __init__(self, cloud: PointCloud, model: SaabModel, config: RunConfig,
                 seed: int, timings: FrameTimings):
        t0 = time.perf_counter()
        selection = select_points(cloud, config.sampling_config(seed))
        sampled = cloud.take(selection.indices)
        t1 = time.perf_counter()
        features = extract_features(sampled, model, selection.eigen)
        if not config.use_eigen_features:
            features = features[:, :-3]
        t2 = time.perf_counter()

        if config.use_views:
            labels = view_labels(sampled.xyz)
        else:
            labels = np.zeros(len(sampled), dtype=np.uint8)

        timings.sampling = t1 - t0
        timings.features = t2 - t1
        self.coords = sampled.xyz
        self.labels = labels
        self.features = features
        self.selected = len(sampled)


def run_odometry(
    sequence: ScanSequence,
    model: SaabModel,
    config: RunConfig,
    progress=None,
) -> OdometryResult:
    """Track consecutive scans and accumulate poses from the first frame."""
    trajectory = Trajectory.identity()
    diagnostics: list[FrameDiagnostics] = []
    prev: _FrameState | None = None

    for frame in range(len(sequence)):
        cloud = sequence.read_scan(frame)
        timings = FrameTimings()
        diag = FrameDiagnostics(
            frame, len(cloud), 0, 0, 0, float("nan"), 0, 0, False, "",
            timings,
        )

        state = None
        try:
            seed = derive_seed(config.seed, _STREAM_SAMPLING, frame)
            state = _FrameState(cloud, model, config, seed, timings)
            diag.selected_points = state.selected
        except (EmptySelection, InsufficientPoints) as exc:
            diag.fallback, diag.note = True, type(exc).__name__
            warnings.warn(f"frame {frame}: {exc}; using identity motion")

        if frame > 0:
            motion = RigidMotion.identity()
            if state is not None and prev is not None:
                try:
                    t0 = time.perf_counter()
                    matches = match_views(
                        prev.features, prev.labels, state.features, state.labels,
                        mutual=config.mutual,
                    )
                    t1 = time.perf_counter()
                    diag.pairs = len(matches)
                    result = ransac_filter(
                        matches,
                        prev.coords,
                        state.coords,
                        config.ransac_config(
                            derive_seed(config.seed, _STREAM_RANSAC, frame)
                        ),
                    )
                    timings.matching = t1 - t0
                    timings.motion = time.perf_counter() - t1
                    diag.inliers = result.inlier_count
                    diag.iterations = len(result.iteration_counts)
                    diag.attempts = result.attempts
                    diag.residual = result.residual
                    # forward motion maps scan t-1 points into scan t;
                    # the vehicle moved by its inverse
                    motion = result.motion.inverse()
                except (
                    NoCorrespondences,
                    InsufficientPoints,
                    RansacFailure,
                    DegenerateGeometry,
                ) as exc:
                    diag.fallback, diag.note = True, type(exc).__name__
                    warnings.warn(f"frame {frame}: {exc}; using identity motion")
            elif not diag.fallback:
                diag.fallback, diag.note = True, "NoPreviousFrame"
            trajectory = accumulate(trajectory, motion)

        prev = state
        diagnostics.append(diag)
        if progress is not None:
            progress(frame, len(sequence))

    return OdometryResult(trajectory, diagnostics)
