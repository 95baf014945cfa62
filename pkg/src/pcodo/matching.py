"""Feature matching between consecutive scans and RANSAC pair filtering.

Nearest neighbors are exact: a blocked brute-force distance computation
beats any spatial index at the ~190 dimensions our descriptors have, and
it is deterministic, which the pipeline requires.  Matching runs per
view; a pair never crosses views.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateGeometry, InsufficientPoints, NoCorrespondences, RansacFailure
from .geometry import RigidMotion
from .motion import CorrespondenceCloud, estimate_rigid_motion

logger = logging.getLogger(__name__)

MIN_SAMPLE = 3
# degenerate draws may burn at most this multiple of the iteration budget
ATTEMPT_FACTOR = 10


@dataclass(frozen=True)
class Matches:
    """Correspondence batch as parallel arrays.

    ``source_index`` points into scan t, ``target_index`` into scan t+1;
    ``feature_distance`` is the Euclidean descriptor distance and ``view``
    the view both endpoints share.
    """

    source_index: np.ndarray
    target_index: np.ndarray
    feature_distance: np.ndarray
    view: np.ndarray

    def __post_init__(self) -> None:
        src = np.ascontiguousarray(self.source_index, dtype=np.int64)
        tgt = np.ascontiguousarray(self.target_index, dtype=np.int64)
        dist = np.ascontiguousarray(self.feature_distance, dtype=np.float64)
        view = np.ascontiguousarray(self.view, dtype=np.uint8)
        n = len(src)
        if not (len(tgt) == len(dist) == len(view) == n):
            raise ValueError("match arrays must share one length")
        if n and (dist < 0.0).any():
            raise ValueError("feature distances must be nonnegative")
        for arr in (src, tgt, dist, view):
            arr.flags.writeable = False
        object.__setattr__(self, "source_index", src)
        object.__setattr__(self, "target_index", tgt)
        object.__setattr__(self, "feature_distance", dist)
        object.__setattr__(self, "view", view)

    def __len__(self) -> int:
        return len(self.source_index)

    def take(self, mask) -> "Matches":
        m = np.asarray(mask)
        return Matches(
            self.source_index[m],
            self.target_index[m],
            self.feature_distance[m],
            self.view[m],
        )


def nearest_neighbor_indices(
    query: np.ndarray, reference: np.ndarray, chunk: int = 512
) -> tuple[np.ndarray, np.ndarray]:
    """Exact 1-NN of every query row among the reference rows.

    Returns (indices, distances).  Ties resolve to the lowest reference
    index, so results are reproducible bit-for-bit.
    """
    q = np.asarray(query, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    idx = np.empty(len(q), dtype=np.int64)
    dist = np.empty(len(q), dtype=np.float64)
    for start in range(0, len(q), chunk):
        stop = min(start + chunk, len(q))
        d = cdist(q[start:stop], r)
        best = np.argmin(d, axis=1)
        idx[start:stop] = best
        dist[start:stop] = d[np.arange(stop - start), best]
    return idx, dist


def match_views(
    features_t: np.ndarray,
    labels_t: np.ndarray,
    features_t1: np.ndarray,
    labels_t1: np.ndarray,
    mutual: bool = False,
) -> Matches:
    """One-directional NN matching within each view, combined across views.

    Every scan-t point in a view gets its nearest scan-t+1 neighbor from
    the same view; views empty on either side contribute nothing.  With
    ``mutual`` on, only pairs that are nearest neighbors of each other
    survive.  Raises NoCorrespondences when no view yields a pair.
    """
    labels_t = np.asarray(labels_t)
    labels_t1 = np.asarray(labels_t1)
    srcs, tgts, dists, views = [], [], [], []
    for v in np.unique(labels_t):
        qi = np.flatnonzero(labels_t == v)
        ri = np.flatnonzero(labels_t1 == v)
        if qi.size == 0 or ri.size == 0:
            continue
        nn, nd = nearest_neighbor_indices(features_t[qi], features_t1[ri])
        if mutual:
            back, _ = nearest_neighbor_indices(features_t1[ri[nn]], features_t[qi])
            ok = back == np.arange(len(qi))
            qi, nn, nd = qi[ok], nn[ok], nd[ok]
        srcs.append(qi)
        tgts.append(ri[nn])
        dists.append(nd)
        views.append(np.full(qi.shape, v, dtype=np.uint8))
    if not srcs:
        raise NoCorrespondences("no view had points on both sides")
    src = np.concatenate(srcs)
    order = np.argsort(src, kind="stable")
    return Matches(
        src[order],
        np.concatenate(tgts)[order],
        np.concatenate(dists)[order],
        np.concatenate(views)[order],
    )


@dataclass(frozen=True)
class RansacConfig:
    """RANSAC knobs; the minimal sample is fixed at 3 points."""

    max_iterations: int = 512
    inlier_threshold: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.inlier_threshold <= 0.0:
            raise ValueError("inlier_threshold must be positive")


@dataclass(frozen=True)
class RansacResult:
    """Best consensus found: refit motion, its inlier set, and run stats."""

    motion: RigidMotion
    residual: float
    inlier_mask: np.ndarray
    iteration_counts: np.ndarray
    attempts: int

    @property
    def inlier_count(self) -> int:
        return int(np.count_nonzero(self.inlier_mask))


def ransac_filter(
    pairs: Matches,
    coords_t: np.ndarray,
    coords_t1: np.ndarray,
    config: RansacConfig,
) -> RansacResult:
    """Consensus filtering of matches under a rigid-motion model.

    Each iteration fits a motion to 3 random pairs and counts pairs with
    ||R x + t - y|| <= threshold.  Degenerate triples (collinear, so the
    fit has no unique rotation) are skipped without spending an iteration,
    up to 10x the iteration budget in total draws.  The best iteration
    (most inliers, earliest iteration on ties) defines the inlier set; the
    returned motion is refit on all of its inliers.
    """
    if len(pairs) < MIN_SAMPLE:
        raise InsufficientPoints(f"RANSAC needs >= {MIN_SAMPLE} pairs, got {len(pairs)}")
    X = np.asarray(coords_t, dtype=np.float64)[pairs.source_index]
    Y = np.asarray(coords_t1, dtype=np.float64)[pairs.target_index]

    rng = np.random.default_rng(config.seed)
    best_count = -1
    best_mask: np.ndarray | None = None
    counts = np.zeros(config.max_iterations, dtype=np.int64)
    iteration = 0
    attempts = 0
    max_attempts = ATTEMPT_FACTOR * config.max_iterations
    while iteration < config.max_iterations and attempts < max_attempts:
        attempts += 1
        sample = rng.choice(len(pairs), size=MIN_SAMPLE, replace=False)
        try:
            motion, _ = estimate_rigid_motion(CorrespondenceCloud(X[sample], Y[sample]))
        except DegenerateGeometry:
            continue
        err = np.linalg.norm(motion.apply(X) - Y, axis=1)
        mask = err <= config.inlier_threshold
        count = int(np.count_nonzero(mask))
        counts[iteration] = count
        if count > best_count:
            best_count = count
            best_mask = mask
        iteration += 1
    counts = counts[:iteration]

    if best_mask is None or best_count < MIN_SAMPLE:
        raise RansacFailure(
            f"best consensus {max(best_count, 0)} < {MIN_SAMPLE} "
            f"after {iteration} iterations ({attempts} draws)"
        )
    motion, residual = estimate_rigid_motion(CorrespondenceCloud(X[best_mask], Y[best_mask]))
    logger.debug(
        "ransac: %d/%d inliers, %d iterations, %d draws",
        best_count,
        len(pairs),
        iteration,
        attempts,
    )
    return RansacResult(
        motion=motion,
        residual=residual,
        inlier_mask=best_mask,
        iteration_counts=counts,
        attempts=attempts,
    )
