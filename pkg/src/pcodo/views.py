"""Azimuthal view partitioning of a scan into front/rear/left/right groups.

Azimuth is measured in the horizontal X-Z plane: 0 degrees along +X,
90 degrees along +Z (the forward axis), wrapped to [0, 360).  Views are
half-open 90-degree sectors with lower-inclusive boundaries.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud

logger = logging.getLogger(__name__)


class View(enum.IntEnum):
    FRONT = 0
    LEFT = 1
    REAR = 2
    RIGHT = 3


VIEW_NAMES = {View.FRONT: "front", View.LEFT: "left", View.REAR: "rear", View.RIGHT: "right"}


def azimuth_deg(xyz: np.ndarray) -> np.ndarray:
    """Azimuth of one (3,) point or an (N, 3) batch, in [0, 360) degrees.

    The origin column pair (x = z = 0) maps to 0 degrees, which lands in
    the right view by convention.
    """
    pts = np.asarray(xyz, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    ang = np.degrees(np.arctan2(pts[:, 2], pts[:, 0])) % 360.0
    # fp wrap guard: -1e-15 % 360 can round to exactly 360.0
    ang = np.where(ang >= 360.0, 0.0, ang)
    return float(ang[0]) if single else ang


def view_labels(xyz: np.ndarray) -> np.ndarray:
    """Per-point view assignment as an (N,) uint8 array of View values."""
    pts = np.asarray(xyz, dtype=np.float64)
    ang = azimuth_deg(pts)
    labels = np.full(pts.shape[0], View.RIGHT, dtype=np.uint8)
    labels[(ang >= 45.0) & (ang < 135.0)] = View.FRONT
    labels[(ang >= 135.0) & (ang < 225.0)] = View.LEFT
    labels[(ang >= 225.0) & (ang < 315.0)] = View.REAR
    n_origin = int(np.count_nonzero((pts[:, 0] == 0.0) & (pts[:, 2] == 0.0)))
    if n_origin:
        logger.warning("%d point(s) at x=z=0 assigned to the right view", n_origin)
    return labels


@dataclass(frozen=True)
class ViewPartition:
    """Index maps from one cloud into its four azimuthal views."""

    labels: np.ndarray

    def indices(self, view: View) -> np.ndarray:
        return np.flatnonzero(self.labels == view)

    def counts(self) -> dict[View, int]:
        return {v: int(np.count_nonzero(self.labels == v)) for v in View}


def partition_views(cloud: PointCloud) -> ViewPartition:
    """Assign every point of ``cloud`` to exactly one view."""
    return ViewPartition(view_labels(cloud.xyz))


def view_clouds(cloud: PointCloud, partition: ViewPartition | None = None):
    """The four sub-clouds plus their index maps back into ``cloud``."""
    part = partition if partition is not None else partition_views(cloud)
    out = {}
    for v in View:
        idx = part.indices(v)
        out[v] = (cloud.take(idx), idx)
    return out
