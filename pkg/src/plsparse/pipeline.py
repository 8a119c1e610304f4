"""Per-frame and batch orchestration of the unsupervised and supervised
sparsification pipelines, with deterministic per-frame seeding."""

from __future__ import annotations

import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import CameraCalib, DepthMap, PointCloud, TAG_FOREGROUND
from .errors import ToolkitError
from .foreground import SeparationConfig, blend_background, separate
from .frustum import Region2D, extract, regions_from_labels
from .keypoints import KeypointConfig, anchors_array, select_points_of_interest
from .kitti_io import (read_calib, read_depth_png, read_labels, read_point_bin,
                       write_point_bin)
from .projection import RangeCropConfig, backproject, camera_to_sensor
from .sampler import StratifyConfig, sample


@dataclass
class PipelineConfig:
    crop: RangeCropConfig | None = field(default_factory=RangeCropConfig)
    keypoint: KeypointConfig = field(default_factory=KeypointConfig)
    separation: SeparationConfig = field(default_factory=SeparationConfig)
    stratify: StratifyConfig = field(default_factory=StratifyConfig)
    score_floor: float = 0.0
    dilate_px: int = 4
    scale_divisor: float = 256.0
    seed: int = 0
    sensor_frame: bool = False  # convert output clouds to the sensor frame

    # io directories (batch mode)
    depth_dir: str = ""
    calib_dir: str = ""
    image_dir: str = ""    # optional grayscale/RGB source for keypoints
    regions_dir: str = ""  # detections for the supervised path
    output_dir: str = ""


def frame_seed(seed: int, frame_id: str) -> int:
    """Deterministic per-frame seed: low 8 bytes of sha256(seed:frame_id).
    Batch order and worker count therefore never affect results."""
    digest = hashlib.sha256(f"{seed}:{frame_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class StageReport:
    frames: list = field(default_factory=list)  # per-frame dicts
    skipped: list = field(default_factory=list)

    def add(self, frame_id: str, counts: dict, wall_time: float) -> None:
        row = {"frame": frame_id, **counts, "wall_time": wall_time}
        raw = counts.get("raw", 0)
        row["reduction_ratio"] = counts.get("final", 0) / raw if raw else 0.0
        self.frames.append(row)

    @property
    def aggregate(self) -> dict:
        total_raw = sum(f.get("raw", 0) for f in self.frames)
        total_final = sum(f.get("final", 0) for f in self.frames)
        return {
            "n_frames": len(self.frames),
            "n_skipped": len(self.skipped),
            "raw": total_raw,
            "final": total_final,
            "reduction_ratio": total_final / total_raw if total_raw else 0.0,
            "wall_time": sum(f["wall_time"] for f in self.frames),
        }

    def to_text(self) -> str:
        keys = ["frame", "raw", "keypoints", "foreground", "blended", "final",
                "reduction_ratio", "wall_time"]
        lines = ["  ".join(f"{k:>12}" for k in keys)]
        for f in self.frames:
            cells = []
            for k in keys:
                v = f.get(k, "-")
                if isinstance(v, float):
                    v = f"{v:.4f}"
                cells.append(f"{v!s:>12}")
            lines.append("  ".join(cells))
        agg = self.aggregate
        lines.append(
            f"total: {agg['n_frames']} frames ({agg['n_skipped']} skipped), "
            f"{agg['raw']} -> {agg['final']} points "
            f"(ratio {agg['reduction_ratio']:.4f}) in {agg['wall_time']:.2f}s"
        )
        return "\n".join(lines)


def _keypoint_image(depth: DepthMap, image: np.ndarray | None) -> np.ndarray:
    """Grayscale source for keypoints: the provided image, else the depth grid itself
    (invalid pixels read as 0, which keeps discontinuities sharp)."""
    if image is not None:
        return image
    return np.where(depth.valid, depth.depth, 0.0)


def run_unsupervised_frame(depth: DepthMap, calib: CameraCalib,
                           cfg: PipelineConfig, seed: int,
                           image: np.ndarray | None = None):
    """backproject -> keypoints -> foreground separation -> stratified
    sampling for one frame.

    Returns (final cloud, stage counts dict)."""
    sep_cfg = replace(cfg.separation, seed=seed)
    dss_cfg = replace(cfg.stratify, seed=seed)
    raw = backproject(depth, calib, cfg.crop)
    kps, kp_stats = select_points_of_interest(
        _keypoint_image(depth, image), depth, calib, cfg.keypoint
    )
    tagged = separate(raw, anchors_array(kps), sep_cfg)
    blended = blend_background(tagged, sep_cfg)
    final = sample(blended, dss_cfg)
    counts = {
        "raw": len(raw),
        "keypoints": len(kps),
        "foreground": int((tagged.tag == TAG_FOREGROUND).sum()),
        "blended": len(blended),
        "final": len(final),
    }
    return final, counts


def run_supervised_frame(depth: DepthMap, calib: CameraCalib,
                         regions: list[Region2D], cfg: PipelineConfig,
                         seed: int):
    """backproject -> frustum extract -> background blend -> stratified
    sampling."""
    sep_cfg = replace(cfg.separation, seed=seed)
    dss_cfg = replace(cfg.stratify, seed=seed)
    raw = backproject(depth, calib, cfg.crop)
    tagged, _, _ = extract(raw, regions, calib, (depth.width, depth.height),
                           score_floor=cfg.score_floor, dilate_px=cfg.dilate_px)
    blended = blend_background(tagged, sep_cfg)
    final = sample(blended, dss_cfg)
    counts = {
        "raw": len(raw),
        "foreground": int((tagged.tag == TAG_FOREGROUND).sum()),
        "blended": len(blended),
        "final": len(final),
    }
    return final, counts


def discover_frames(depth_dir: str) -> list[str]:
    return sorted(os.path.splitext(f)[0] for f in os.listdir(depth_dir)
                  if f.endswith(".png"))


def _load_image(cfg: PipelineConfig, frame_id: str) -> np.ndarray | None:
    if not cfg.image_dir:
        return None
    for ext in (".png", ".jpg"):
        path = os.path.join(cfg.image_dir, frame_id + ext)
        if os.path.exists(path):
            from PIL import Image
            return np.asarray(Image.open(path), dtype=np.float64)
    return None


def process_frame(frame_id: str, cfg: PipelineConfig, mode: str) -> dict:
    """Load, sparsify, and write one frame; returns its stage counts."""
    start = time.perf_counter()
    depth = read_depth_png(os.path.join(cfg.depth_dir, frame_id + ".png"),
                           cfg.scale_divisor)
    calib = read_calib(os.path.join(cfg.calib_dir, frame_id + ".txt"))
    seed = frame_seed(cfg.seed, frame_id)
    if mode == "unsupervised":
        image = _load_image(cfg, frame_id)
        cloud, counts = run_unsupervised_frame(depth, calib, cfg, seed, image)
    elif mode == "supervised":
        regions_path = os.path.join(cfg.regions_dir, frame_id + ".txt")
        if not os.path.exists(regions_path):
            raise ToolkitError(f"missing regions file for frame {frame_id}")
        regions = regions_from_labels(read_labels(regions_path))
        cloud, counts = run_supervised_frame(depth, calib, regions, cfg, seed)
    else:
        raise ToolkitError(f"unknown mode {mode!r}")
    if cfg.sensor_frame:
        cloud = camera_to_sensor(cloud, calib)
    write_point_bin(cloud, os.path.join(cfg.output_dir, frame_id + ".bin"))
    counts["wall_time"] = time.perf_counter() - start
    return counts


def run_batch(frame_ids: list[str], cfg: PipelineConfig, mode: str,
              workers: int = 1) -> StageReport:
    """Batch sparsification; per-frame failures are recorded and skipped."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    report = StageReport()
    if workers <= 1:
        results = []
        for fid in frame_ids:
            try:
                results.append((fid, process_frame(fid, cfg, mode)))
            except ToolkitError as exc:
                report.skipped.append((fid, str(exc)))
    else:
        results = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {fid: pool.submit(process_frame, fid, cfg, mode)
                       for fid in frame_ids}
            for fid, fut in futures.items():
                try:
                    results.append((fid, fut.result()))
                except ToolkitError as exc:
                    report.skipped.append((fid, str(exc)))
    for fid, counts in sorted(results):
        wall = counts.pop("wall_time")
        report.add(fid, counts, wall)
    return report


def compute_stats(frame_ids: list[str], cfg: PipelineConfig,
                  real_dir: str = "") -> list[dict]:
    """Per-frame point accounting: raw PseudoLiDAR, keypoints, foreground,
    post-sampling counts, and optional real-scan comparison."""
    rows = []
    for fid in frame_ids:
        depth = read_depth_png(os.path.join(cfg.depth_dir, fid + ".png"),
                               cfg.scale_divisor)
        calib = read_calib(os.path.join(cfg.calib_dir, fid + ".txt"))
        seed = frame_seed(cfg.seed, fid)
        _, counts = run_unsupervised_frame(depth, calib, cfg, seed,
                                           _load_image(cfg, fid))
        row = {"frame": fid, **counts}
        if real_dir:
            real_path = os.path.join(real_dir, fid + ".bin")
            row["real_scan"] = (len(read_point_bin(real_path))
                                if os.path.exists(real_path) else None)
        rows.append(row)
    return rows


def stats_table(rows: list[dict]) -> str:
    if not rows:
        return "(no frames)"
    keys = list(rows[0].keys())
    lines = ["  ".join(f"{k:>12}" for k in keys)]
    for row in rows:
        lines.append("  ".join(f"{row.get(k, '-')!s:>12}" for k in keys))
    return "\n".join(lines)
