"""Distance-stratified sampler: bin points by sensor range, sample uniformly
within each bin at a global rate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PointCloud, round_half_up
from .errors import UsageError


@dataclass
class StratifyConfig:
    bin_width: float = 5.0
    max_range: float = 70.0
    rate: float = 0.10
    seed: int = 0
    min_keep_per_bin: int = 0
    use_depth: bool = False  # bin by z instead of Euclidean range

    def __post_init__(self):
        if self.bin_width <= 0:
            raise UsageError("bin_width must be positive")
        if not 0.0 < self.rate <= 1.0:
            raise UsageError("rate must be in (0, 1]")
        if self.min_keep_per_bin < 0:
            raise UsageError("min_keep_per_bin must be >= 0")

    @property
    def n_bins(self) -> int:
        """Regular bins plus the trailing overflow bin for r >= max_range."""
        return int(math.ceil(self.max_range / self.bin_width)) + 1


def point_ranges(cloud: PointCloud, cfg: StratifyConfig) -> np.ndarray:
    if cfg.use_depth:
        return cloud.points[:, 2]
    return np.linalg.norm(cloud.points, axis=1)


def stratify(cloud: PointCloud, cfg: StratifyConfig) -> list[np.ndarray]:
    """Partition point indices into range bins floor(r / bin_width); ranges at
    or beyond max_range land in the final overflow bin."""
    r = point_ranges(cloud, cfg)
    overflow = cfg.n_bins - 1
    bins = np.floor(r / cfg.bin_width).astype(np.intp)
    bins[r >= cfg.max_range] = overflow
    bins = np.clip(bins, 0, overflow)
    return [np.flatnonzero(bins == b) for b in range(cfg.n_bins)]


def bin_keep_count(n_b: int, cfg: StratifyConfig) -> int:
    """Closed-form per-bin kept count: max(min_keep, round(rate*n_b)), capped
    at n_b."""
    return min(n_b, max(cfg.min_keep_per_bin, round_half_up(cfg.rate * n_b)))


def sample_indices(cloud: PointCloud, cfg: StratifyConfig) -> np.ndarray:
    """Global indices kept by the stratified sample, ascending so the output
    preserves input relative order. Each bin draws from its own seeded
    sub-stream, so bins are order-independent and parallel-safe."""
    kept = []
    for b, idx in enumerate(stratify(cloud, cfg)):
        k = bin_keep_count(len(idx), cfg)
        if k == 0:
            continue
        rng = np.random.default_rng([cfg.seed, 2, b])
        kept.append(idx[rng.permutation(len(idx))[:k]])
    if not kept:
        return np.empty(0, dtype=np.intp)
    return np.sort(np.concatenate(kept))


def sample(cloud: PointCloud, cfg: StratifyConfig) -> PointCloud:
    """Stratified subsample of the cloud (tags and intensity carried along)."""
    return cloud.subset(sample_indices(cloud, cfg))
