"""Frustum extraction: tag the PseudoLiDAR points whose projections fall
inside externally supplied 2D foreground regions (boxes or masks)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import (CameraCalib, DepthMap, PointCloud, TAG_BACKGROUND,
                   TAG_FOREGROUND)
from .errors import DataError, UsageError
from .foreground import SeparationConfig, blend_background
from .kitti_io import LabelRecord
from .projection import RangeCropConfig, backproject, project_to_pixels
from .sampler import StratifyConfig, sample


@dataclass
class Region2D:
    """One detected foreground region: either a pixel box or a binary mask."""

    class_name: str = "Car"
    score: float = 1.0
    bbox: tuple[float, float, float, float] | None = None  # (l, t, r, b)
    mask: np.ndarray | None = None

    def __post_init__(self):
        if (self.bbox is None) == (self.mask is None):
            raise UsageError("region needs exactly one of bbox or mask")
        if not 0.0 <= self.score <= 1.0:
            raise DataError(f"region score {self.score} outside [0, 1]")
        if self.bbox is not None:
            left, top, right, bottom = self.bbox
            if not (right > left and bottom > top):
                raise DataError(f"degenerate region box {self.bbox}")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)


def regions_from_labels(labels: list[LabelRecord]) -> list[Region2D]:
    """Turn KITTI detection records into box regions (DontCare skipped)."""
    return [
        Region2D(class_name=rec.class_name,
                 score=1.0 if rec.score is None else rec.score,
                 bbox=rec.bbox2d)
        for rec in labels if not rec.ignorable
    ]


def rasterize_box(bbox, width: int, height: int) -> np.ndarray:
    """Boolean mask of integer pixels (i, j) with left <= i <= right and
    top <= j <= bottom, clipped to the image."""
    left, top, right, bottom = bbox
    mask = np.zeros((height, width), dtype=bool)
    i0 = max(0, int(np.ceil(left)))
    j0 = max(0, int(np.ceil(top)))
    i1 = min(width - 1, int(np.floor(right)))
    j1 = min(height - 1, int(np.floor(bottom)))
    if i1 >= i0 and j1 >= j0:
        mask[j0:j1 + 1, i0:i1 + 1] = True
    return mask


def _region_mask(region: Region2D, width: int, height: int, dilate_px: int) -> np.ndarray:
    if region.mask is not None:
        if region.mask.shape != (height, width):
            raise UsageError(
                f"mask shape {region.mask.shape} != image {(height, width)}"
            )
        mask = region.mask
        if dilate_px > 0:
            size = 2 * dilate_px + 1
            mask = ndimage.binary_dilation(mask, structure=np.ones((size, size), bool))
        return mask
    left, top, right, bottom = region.bbox
    box = (left - dilate_px, top - dilate_px, right + dilate_px, bottom + dilate_px)
    return rasterize_box(box, width, height)


def extract(cloud: PointCloud, regions: list[Region2D], calib: CameraCalib,
            image_size: tuple[int, int], score_floor: float = 0.0,
            dilate_px: int = 4):
    """Tag points whose projected pixel lies inside any qualifying region.

    image_size is (width, height). A point's pixel is the integer cell
    (floor(u), floor(v)); regions with score below score_floor are skipped.
    Returns (tagged cloud, per-region counts, n_behind_camera).
    """
    width, height = image_size
    uvz, n_behind = project_to_pixels(cloud, calib)
    front = cloud.points[:, 2] > 0
    cols = np.floor(uvz[:, 0]).astype(np.intp)
    rows = np.floor(uvz[:, 1]).astype(np.intp)
    in_image = (cols >= 0) & (cols < width) & (rows >= 0) & (rows < height)

    tags = np.full(len(cloud), TAG_BACKGROUND, dtype=np.int8)
    front_idx = np.flatnonzero(front)
    counts = []
    fg_front = np.zeros(len(front_idx), dtype=bool)
    for region in regions:
        if region.score < score_floor:
            counts.append(0)
            continue
        mask = _region_mask(region, width, height, dilate_px)
        hit = np.zeros(len(front_idx), dtype=bool)
        hit[in_image] = mask[rows[in_image], cols[in_image]]
        counts.append(int(hit.sum()))
        fg_front |= hit
    tags[front_idx[fg_front]] = TAG_FOREGROUND
    return cloud.with_tags(tags), counts, n_behind


def pipeline_supervised(depth: DepthMap, calib: CameraCalib,
                        regions: list[Region2D],
                        dss_cfg: StratifyConfig,
                        sep_cfg: SeparationConfig | None = None,
                        range_crop: RangeCropConfig | None = RangeCropConfig(),
                        score_floor: float = 0.0, dilate_px: int = 4):
    """backproject -> frustum extract -> background blend -> stratified
    sampling.

    Returns (final cloud, stage counts dict)."""
    sep_cfg = sep_cfg or SeparationConfig(seed=dss_cfg.seed)
    raw = backproject(depth, calib, range_crop)
    tagged, _, _ = extract(raw, regions, calib,
                           (depth.width, depth.height),
                           score_floor=score_floor, dilate_px=dilate_px)
    blended = blend_background(tagged, sep_cfg)
    final = sample(blended, dss_cfg)
    counts = {
        "raw": len(raw),
        "foreground": int((tagged.tag == TAG_FOREGROUND).sum()),
        "blended": len(blended),
        "final": len(final),
    }
    return final, counts
