"""Point selection: local eigen-features and the three sampling strategies.

The geometry-aware sampler keeps points whose local neighborhoods are
neither line-like nor plane-like but information-rich: linearity and
planarity below their cutoffs, eigen-entropy above its floor.  Random and
farthest-point sampling exist as baselines for ablation runs.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateNeighborhood, EmptySelection, InsufficientPoints
from .geometry import PointCloud
from .neighbors import knn_indices

logger = logging.getLogger(__name__)

# Neighborhoods whose covariance trace (before normalization) is at or
# below this are coincident point clusters: eigen-features are undefined.
DEGENERATE_TRACE = 1e-12

ENTROPY_MAX = math.log(3.0)


class SamplingStrategy(str, enum.Enum):
    GEOMETRY_AWARE = "geometry"
    RANDOM = "random"
    FARTHEST_POINT = "fps"


@dataclass(frozen=True)
class SamplingConfig:
    """Knobs for point selection.

    Defaults follow the reference configuration: 48 neighbors for the
    local covariance, cutoffs 0.7/0.7 for linearity/planarity, entropy
    floor 0.8, and 2048 output points.
    """

    k_neighbors: int = 48
    linearity_max: float = 0.7
    planarity_max: float = 0.7
    entropy_min: float = 0.8
    target_count: int = 2048
    strategy: SamplingStrategy = SamplingStrategy.GEOMETRY_AWARE
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.k_neighbors < 3:
            raise ValueError("k_neighbors must be >= 3")
        if not 0.0 < self.linearity_max <= 1.0:
            raise ValueError("linearity_max must lie in (0, 1]")
        if not 0.0 < self.planarity_max <= 1.0:
            raise ValueError("planarity_max must lie in (0, 1]")
        if not 0.0 <= self.entropy_min < ENTROPY_MAX:
            raise ValueError(f"entropy_min must lie in [0, ln 3 = {ENTROPY_MAX:.6f})")
        if self.target_count < 3:
            raise ValueError("target_count must be >= 3")
        object.__setattr__(self, "strategy", SamplingStrategy(self.strategy))


@dataclass(frozen=True)
class EigenFeatures:
    """Batched local-covariance eigen descriptors.

    ``eigenvalues`` holds the clamped, sum-normalized spectrum in
    descending order; the three scalar features derive from it:

        linearity     = (l1 - l2) / l1
        planarity     = (l2 - l3) / l1
        eigen_entropy = sum_i l_i * ln(1 / l_i)     (0 * ln(1/0) := 0)

    ``degenerate`` marks points whose raw covariance trace was ~0; their
    feature slots are zero-filled and must not be consumed.
    """

    eigenvalues: np.ndarray
    linearity: np.ndarray
    planarity: np.ndarray
    eigen_entropy: np.ndarray
    degenerate: np.ndarray

    def __len__(self) -> int:
        return self.linearity.shape[0]

    def take(self, indices) -> "EigenFeatures":
        idx = np.asarray(indices)
        return EigenFeatures(
            self.eigenvalues[idx],
            self.linearity[idx],
            self.planarity[idx],
            self.eigen_entropy[idx],
            self.degenerate[idx],
        )

    def triple(self) -> np.ndarray:
        """(N, 3) matrix of (linearity, planarity, eigen_entropy)."""
        return np.column_stack([self.linearity, self.planarity, self.eigen_entropy])


def eigen_features(cloud: PointCloud, k: int, indices=None) -> EigenFeatures:
    """Eigen-features of the k-neighborhoods of ``cloud`` points.

    The neighbor set of a point includes the point itself.  ``indices``
    restricts the queries to a subset of the cloud (neighbors still come
    from the full cloud).
    """
    if len(cloud) < k:
        raise InsufficientPoints(f"cloud has {len(cloud)} points, k={k} required")
    xyz = cloud.xyz
    queries = xyz if indices is None else xyz[np.asarray(indices)]
    nbr = knn_indices(xyz, k, queries=queries)

    pts = xyz[nbr]                                   # (Q, k, 3)
    centered = pts - pts.mean(axis=1, keepdims=True)
    cov = np.einsum("qki,qkj->qij", centered, centered) / k

    trace = np.einsum("qii->q", cov)
    degenerate = trace <= DEGENERATE_TRACE

    # eigh is ascending; flip to descending.  Degenerate rows are replaced
    # by identity covariances to keep the batched solve well-posed, then
    # zero-filled below.
    safe = np.where(degenerate[:, None, None], np.eye(3), cov)
    lam = np.linalg.eigvalsh(safe)[:, ::-1]
    lam = np.clip(lam, 0.0, None)
    lam = lam / lam.sum(axis=1, keepdims=True)

    l1, l2, l3 = lam[:, 0], lam[:, 1], lam[:, 2]
    linearity = (l1 - l2) / l1
    planarity = (l2 - l3) / l1
    with np.errstate(divide="ignore", invalid="ignore"):
        ent_terms = np.where(lam > 0.0, -lam * np.log(lam), 0.0)
    entropy = ent_terms.sum(axis=1)

    zero = np.zeros(len(queries))
    return EigenFeatures(
        eigenvalues=np.where(degenerate[:, None], 0.0, lam),
        linearity=np.where(degenerate, zero, linearity),
        planarity=np.where(degenerate, zero, planarity),
        eigen_entropy=np.where(degenerate, zero, entropy),
        degenerate=degenerate,
    )


def point_eigen_features(cloud: PointCloud, index: int, k: int) -> EigenFeatures:
    """Eigen-features of a single point; raises on a coincident neighborhood."""
    feats = eigen_features(cloud, k, indices=[index])
    if feats.degenerate[0]:
        raise DegenerateNeighborhood(
            f"point {index}: neighborhood covariance trace <= {DEGENERATE_TRACE}"
        )
    return feats


@dataclass(frozen=True)
class SampleSelection:
    """Outcome of point selection: cloud indices plus their eigen-features."""

    indices: np.ndarray
    eigen: EigenFeatures

    def __len__(self) -> int:
        return self.indices.shape[0]


def _subsample(indices: np.ndarray, target: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    chosen = rng.choice(indices.shape[0], size=target, replace=False)
    return np.sort(indices[chosen])


def geometry_aware_indices(
    cloud: PointCloud,
    config: SamplingConfig,
    eigen: EigenFeatures | None = None,
    seed=None,
) -> tuple[np.ndarray, EigenFeatures]:
    """Indices of geometry-selected points plus their eigen-features.

    Points pass the filter only with linearity and planarity strictly
    below their cutoffs and entropy strictly above the floor.  When more
    points survive than ``target_count``, a seeded uniform subsample picks
    the output; a shortfall keeps all survivors and logs it.
    """
    if eigen is None:
        eigen = eigen_features(cloud, config.k_neighbors)
    keep = (
        ~eigen.degenerate
        & (eigen.linearity < config.linearity_max)
        & (eigen.planarity < config.planarity_max)
        & (eigen.eigen_entropy > config.entropy_min)
    )
    survivors = np.flatnonzero(keep)
    if survivors.size == 0:
        raise EmptySelection("geometry-aware filter removed every point")
    if survivors.size > config.target_count:
        picked = _subsample(survivors, config.target_count, seed if seed is not None else config.rng_seed)
    else:
        if survivors.size < config.target_count:
            logger.info(
                "geometry-aware shortfall: %d survivors < target %d",
                survivors.size,
                config.target_count,
            )
        picked = survivors
    return picked, eigen.take(picked)


def geometry_aware_sample(cloud: PointCloud, config: SamplingConfig, seed=None) -> PointCloud:
    indices, _ = geometry_aware_indices(cloud, config, seed=seed)
    return cloud.take(indices)


def random_indices(cloud: PointCloud, n: int, seed) -> np.ndarray:
    """Seeded uniform sample of ``n`` distinct point indices, ascending."""
    if n > len(cloud):
        raise InsufficientPoints(f"requested {n} points from a cloud of {len(cloud)}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(len(cloud), size=n, replace=False))


def random_sample(cloud: PointCloud, n: int, seed) -> PointCloud:
    return cloud.take(random_indices(cloud, n, seed))


def farthest_point_indices(cloud: PointCloud, n: int, seed) -> np.ndarray:
    """Greedy max-min coverage sample started from a seeded random point."""
    if n > len(cloud):
        raise InsufficientPoints(f"requested {n} points from a cloud of {len(cloud)}")
    xyz = cloud.xyz
    rng = np.random.default_rng(seed)
    selected = np.empty(n, dtype=np.int64)
    selected[0] = rng.integers(len(cloud))
    dist = np.linalg.norm(xyz - xyz[selected[0]], axis=1)
    for i in range(1, n):
        nxt = int(np.argmax(dist))
        selected[i] = nxt
        np.minimum(dist, np.linalg.norm(xyz - xyz[nxt], axis=1), out=dist)
    return selected


def farthest_point_sample(cloud: PointCloud, n: int, seed) -> PointCloud:
    return cloud.take(farthest_point_indices(cloud, n, seed))


def select_points(cloud: PointCloud, config: SamplingConfig, seed=None) -> SampleSelection:
    """Run the configured strategy and attach eigen-features to the picks.

    Eigen-features are always computed against the full input cloud, so
    baseline strategies see the same local descriptors the geometry-aware
    path does.
    """
    use_seed = seed if seed is not None else config.rng_seed
    if config.strategy is SamplingStrategy.GEOMETRY_AWARE:
        indices, eigen = geometry_aware_indices(cloud, config, seed=use_seed)
        return SampleSelection(indices, eigen)
    if config.strategy is SamplingStrategy.RANDOM:
        indices = random_indices(cloud, min(config.target_count, len(cloud)), use_seed)
    elif config.strategy is SamplingStrategy.FARTHEST_POINT:
        indices = farthest_point_indices(cloud, min(config.target_count, len(cloud)), use_seed)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown strategy {config.strategy}")
    eigen = eigen_features(cloud, config.k_neighbors, indices=indices)
    return SampleSelection(indices, eigen)
