"""Exact k-nearest-neighbor lookups over point coordinates."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def knn_indices(points: np.ndarray, k: int, queries: np.ndarray | None = None) -> np.ndarray:
    """Indices of the k nearest points for each query (exact search).

    When ``queries`` is None the points query themselves, in which case the
    query point is its own first neighbor (distance zero).  Requires
    ``k <= len(points)``.
    """
    pts = np.asarray(points, dtype=np.float64)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(pts):
        raise ValueError(f"k={k} exceeds cloud size {len(pts)}")
    tree = cKDTree(pts)
    q = pts if queries is None else np.asarray(queries, dtype=np.float64)
    _, idx = tree.query(q, k=k)
    if idx.ndim == 1:
        idx = idx[:, None]
    return idx


def exclude_self_knn(points: np.ndarray, k: int) -> np.ndarray:
    """(N, k) indices of each point's k nearest *other* points.

    Queries k+1 neighbors and strips the row's own index.  When duplicate
    coordinates push the own index out of the k+1 nearest, the farthest
    neighbor is dropped instead, so every row still has exactly k entries.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if k + 1 > n:
        raise ValueError(f"k={k} needs at least {k + 1} points, cloud has {n}")
    idx = knn_indices(pts, k + 1)
    own = np.arange(n)[:, None]
    is_self = idx == own
    has_self = is_self.any(axis=1)
    drop = np.where(has_self, is_self.argmax(axis=1), k)
    keep = np.arange(k + 1)[None, :] != drop[:, None]
    return idx[keep].reshape(n, k)
