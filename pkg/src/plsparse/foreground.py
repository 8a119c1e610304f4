"""Approximate foreground separation: tag points near keypoint anchors as
foreground, then blend a low-rate seeded background sample back in."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (PointCloud, TAG_BACKGROUND, TAG_FOREGROUND, round_half_up)
from .errors import UsageError
from .spatial_index import SpatialIndex


@dataclass
class SeparationConfig:
    fg_radius: float = 0.8
    bg_keep_ratio: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.fg_radius <= 0:
            raise UsageError("fg_radius must be positive")
        if not 0.0 <= self.bg_keep_ratio <= 1.0:
            raise UsageError("bg_keep_ratio must be in [0, 1]")


def separate(cloud: PointCloud, anchors: np.ndarray, cfg: SeparationConfig,
             index: str = "cloud") -> PointCloud:
    """Tag each point foreground iff it lies within fg_radius of any anchor.

    index selects which side gets the k-d tree: "cloud" (balls around each
    anchor) or "anchors" (nearest-anchor distance per point). The resulting
    tag sets are identical; both exist so that symmetry is testable.
    """
    if len(cloud) == 0:
        raise UsageError("cloud must be non-empty")
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 3)
    tags = np.full(len(cloud), TAG_BACKGROUND, dtype=np.int8)
    if len(anchors) > 0:
        if index == "cloud":
            tree = SpatialIndex(cloud.points)
            fg = tree.ball_query_many(anchors, cfg.fg_radius)
            tags[fg] = TAG_FOREGROUND
        elif index == "anchors":
            tree = SpatialIndex(anchors)
            dists = tree.nearest_distances(cloud.points)
            tags[dists <= cfg.fg_radius] = TAG_FOREGROUND
        else:
            raise UsageError(f"unknown index side {index!r}")
    return cloud.with_tags(tags)


def blend_background_indices(cloud: PointCloud, cfg: SeparationConfig) -> np.ndarray:
    """Indices kept by blending: all foreground in input order, then a seeded
    uniform sample (without replacement) of round(bg_keep_ratio * n_bg)
    background points, also in input order."""
    if cloud.tag is None:
        raise UsageError("cloud has no tags; run separate first")
    fg_idx = np.flatnonzero(cloud.tag == TAG_FOREGROUND)
    bg_idx = np.flatnonzero(cloud.tag != TAG_FOREGROUND)
    k = min(len(bg_idx), round_half_up(cfg.bg_keep_ratio * len(bg_idx)))
    # Sub-stream 1 of the module seed; sampler bins use their own sub-streams.
    rng = np.random.default_rng([cfg.seed, 1])
    pick = np.sort(rng.choice(len(bg_idx), size=k, replace=False)) if k else np.empty(0, dtype=np.intp)
    return np.concatenate([fg_idx, bg_idx[pick.astype(np.intp)]])


def blend_background(cloud: PointCloud, cfg: SeparationConfig) -> PointCloud:
    """Subset of the cloud per blend_background_indices, tags preserved."""
    return cloud.subset(blend_background_indices(cloud, cfg))
