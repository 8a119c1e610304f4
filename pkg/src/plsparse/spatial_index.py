"""k-d tree over 3D points with boundary-inclusive ball and k-NN queries.

Backed by scipy's cKDTree; results are post-sorted so the contract is
deterministic regardless of tree internals: ball queries return ascending
indices, k-NN returns (index, distance) ascending by distance with ties
broken by lower index. Results never depend on leaf_size.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .core import PointCloud
from .errors import UsageError


class SpatialIndex:
    """Immutable index over a point set; queries are thread-safe."""

    def __init__(self, points: np.ndarray, leaf_size: int = 16):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(points) == 0:
            raise UsageError("cannot index an empty cloud")
        if not np.all(np.isfinite(points)):
            raise UsageError("cannot index non-finite points")
        self.points = points
        self._tree = cKDTree(points, leafsize=max(1, leaf_size))

    def __len__(self) -> int:
        return len(self.points)

    def ball_query(self, center, radius: float) -> np.ndarray:
        """Indices i with ||p_i - center|| <= radius, ascending."""
        if radius < 0:
            raise UsageError("radius must be non-negative")
        center = np.asarray(center, dtype=np.float64).reshape(3)
        idx = self._tree.query_ball_point(center, radius)
        return np.sort(np.asarray(idx, dtype=np.intp))

    def ball_query_many(self, centers: np.ndarray, radius: float) -> np.ndarray:
        """Union of ball queries around many centers; ascending unique indices."""
        if radius < 0:
            raise UsageError("radius must be non-negative")
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
        if len(centers) == 0:
            return np.empty(0, dtype=np.intp)
        lists = self._tree.query_ball_point(centers, radius)
        flat = [i for sub in lists for i in sub]
        return np.unique(np.asarray(flat, dtype=np.intp))

    def knn_query(self, center, k: int) -> list[tuple[int, float]]:
        """The k nearest points as (index, distance), ties by lower index."""
        n = len(self.points)
        if not 1 <= k <= n:
            raise UsageError(f"k must be in [1, {n}], got {k}")
        center = np.asarray(center, dtype=np.float64).reshape(3)
        dists, _ = self._tree.query(center, k=k)
        dists = np.atleast_1d(dists)
        # Re-resolve via a ball at the k-th distance so boundary ties obey
        # the lower-index rule exactly.
        kth = float(dists[-1])
        pad = max(1e-12, 1e-12 * kth)
        cand = np.asarray(self._tree.query_ball_point(center, kth + pad), dtype=np.intp)
        cand_d = np.linalg.norm(self.points[cand] - center, axis=1)
        order = np.lexsort((cand, cand_d))
        chosen = cand[order][:k]
        return [(int(i), float(np.linalg.norm(self.points[i] - center))) for i in chosen]

    def nearest_distances(self, queries: np.ndarray) -> np.ndarray:
        """Distance from each query point to its nearest indexed point."""
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        dists, _ = self._tree.query(queries, k=1)
        return np.atleast_1d(dists)


def build(cloud: PointCloud | np.ndarray, leaf_size: int = 16) -> SpatialIndex:
    """Index a cloud (or a raw (N, 3) array)."""
    points = cloud.points if isinstance(cloud, PointCloud) else cloud
    return SpatialIndex(points, leaf_size=leaf_size)
