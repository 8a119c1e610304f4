"""Readers/writers for the KITTI-style interchange formats.

Binary point clouds are 16-byte little-endian (x, y, z, intensity) float32
quadruplets, depth maps are single-channel 16-bit PNGs (value / divisor =
meters, 0 = invalid), calibration and label files are whitespace text.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .core import CameraCalib, DepthMap, PointCloud, SENSOR
from .errors import DataError, FormatError, ParseError

POINT_RECORD_BYTES = 16

DONT_CARE = "DontCare"

_CALIB_KEYS = {
    "P2": ("projection", 12),
    "R0_rect": ("rect_rotation", 9),
    "Tr_velo_to_cam": ("sensor_to_camera", 12),
}


def read_point_bin(path: str | os.PathLike) -> PointCloud:
    """Decode a binary point file into a sensor-frame cloud."""
    raw = np.fromfile(path, dtype="<f4")
    nbytes = raw.size * 4
    if nbytes % POINT_RECORD_BYTES != 0:
        offset = nbytes - nbytes % POINT_RECORD_BYTES
        raise FormatError(
            f"{path}: truncated record at byte offset {offset} "
            f"(file length {nbytes} not a multiple of {POINT_RECORD_BYTES})"
        )
    records = raw.reshape(-1, 4)
    finite = np.isfinite(records).all(axis=1)
    if not finite.all():
        raise DataError(f"{path}: non-finite value in record {int(np.argmin(finite))}")
    return PointCloud(
        points=records[:, :3].astype(np.float64),
        frame=SENSOR,
        intensity=records[:, 3].astype(np.float64),
    )


def write_point_bin(cloud: PointCloud, path: str | os.PathLike) -> None:
    """Inverse of read_point_bin. Missing intensity is written as 1.0
    (PseudoLiDAR carries no reflectance)."""
    if not np.all(np.isfinite(cloud.points)):
        raise DataError("cloud contains non-finite coordinates")
    n = len(cloud)
    records = np.empty((n, 4), dtype="<f4")
    records[:, :3] = cloud.points
    if cloud.intensity is None:
        records[:, 3] = 1.0
    else:
        if not np.all(np.isfinite(cloud.intensity)):
            raise DataError("cloud contains non-finite intensity")
        records[:, 3] = cloud.intensity
    records.tofile(path)


def read_depth_png(path: str | os.PathLike, scale_divisor: float = 256.0) -> DepthMap:
    """Read a 16-bit single-channel depth PNG; stored 0 marks invalid pixels."""
    img = Image.open(path)
    if img.mode not in ("I;16", "I;16B", "I"):
        raise FormatError(f"{path}: expected single-channel 16-bit image, got mode {img.mode}")
    stored = np.asarray(img, dtype=np.int64)
    if stored.ndim != 2:
        raise FormatError(f"{path}: expected single-channel image")
    if stored.min() < 0 or stored.max() > 0xFFFF:
        raise FormatError(f"{path}: values outside 16-bit range")
    valid = stored > 0
    depth = stored.astype(np.float64) / float(scale_divisor)
    return DepthMap(depth=depth, valid=valid)


def write_depth_png(depth_map: DepthMap, path: str | os.PathLike,
                    scale_divisor: float = 256.0) -> None:
    """Write a DepthMap as a 16-bit PNG; invalid pixels become stored 0."""
    stored = np.rint(depth_map.depth * float(scale_divisor)).astype(np.int64)
    stored[~depth_map.valid] = 0
    if stored.min() < 0 or stored.max() > 0xFFFF:
        raise DataError("depth out of 16-bit storage range at this divisor")
    img = Image.fromarray(stored.astype(np.uint16))
    img.save(path)


def read_calib(path: str | os.PathLike) -> CameraCalib:
    """Parse a `KEY: v0 v1 ...` calibration file.

    Recognized keys: P2 (3x4 projection), R0_rect (3x3), Tr_velo_to_cam
    (3x4). Duplicated keys: last occurrence wins. Missing R0_rect or
    Tr_velo_to_cam default to identity and are listed in defaulted_keys.
    """
    found: dict[str, np.ndarray] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or ":" not in line:
                continue
            key, _, rest = line.partition(":")
            key = key.strip()
            if key not in _CALIB_KEYS:
                continue
            _, want = _CALIB_KEYS[key]
            tokens = rest.split()
            if len(tokens) != want:
                raise ParseError(
                    f"{path}:{lineno}: key {key} expects {want} values, got {len(tokens)}"
                )
            try:
                values = np.array([float(t) for t in tokens], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: malformed numeric token ({exc})") from exc
            found[key] = values
    if "P2" not in found:
        raise ParseError(f"{path}: missing projection key P2")
    defaulted = tuple(k for k in ("R0_rect", "Tr_velo_to_cam") if k not in found)
    kwargs = {"projection": found["P2"].reshape(3, 4), "defaulted_keys": defaulted}
    if "R0_rect" in found:
        kwargs["rect_rotation"] = found["R0_rect"].reshape(3, 3)
    if "Tr_velo_to_cam" in found:
        kwargs["sensor_to_camera"] = found["Tr_velo_to_cam"].reshape(3, 4)
    return CameraCalib(**kwargs)


def write_calib(calib: CameraCalib, path: str | os.PathLike) -> None:
    with open(path, "w") as f:
        for key, attr in (("P2", "projection"),
                          ("R0_rect", "rect_rotation"),
                          ("Tr_velo_to_cam", "sensor_to_camera")):
            values = " ".join(repr(float(v)) for v in getattr(calib, attr).reshape(-1))
            f.write(f"{key}: {values}\n")


@dataclass
class LabelRecord:
    """One object annotation / detection in KITTI label format.

    bbox2d is (left, top, right, bottom) pixels; dims is (h, w, l) meters;
    location is (x, y, z) meters in the rectified camera frame with y at the
    box bottom; yaw rotates about the vertical axis. score is present only
    for detections (16-field lines).
    """

    class_name: str
    truncation: float = 0.0
    occlusion: int = 0
    alpha: float = 0.0
    bbox2d: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
    dims: tuple[float, float, float] = (1.0, 1.0, 1.0)
    location: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    score: float | None = None

    def __post_init__(self):
        left, top, right, bottom = self.bbox2d
        if not (right > left and bottom > top):
            raise DataError(f"degenerate 2D box {self.bbox2d}")
        if self.class_name != DONT_CARE and min(self.dims) <= 0:
            raise DataError(f"non-positive dimensions {self.dims} for {self.class_name}")

    @property
    def ignorable(self) -> bool:
        return self.class_name == DONT_CARE

    @property
    def bbox_height(self) -> float:
        return self.bbox2d[3] - self.bbox2d[1]


def _parse_label_line(tokens: list[str]) -> LabelRecord:
    vals = [float(t) for t in tokens[1:]]
    return LabelRecord(
        class_name=tokens[0],
        truncation=vals[0],
        occlusion=int(vals[1]),
        alpha=vals[2],
        bbox2d=tuple(vals[3:7]),
        dims=tuple(vals[7:10]),
        location=tuple(vals[10:13]),
        yaw=vals[13],
        score=vals[14] if len(vals) > 14 else None,
    )


def read_labels(path: str | os.PathLike) -> list[LabelRecord]:
    """Parse a label/detection file: 15 fields per line, 16 with score."""
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) not in (15, 16):
                raise ParseError(
                    f"{path}:{lineno}: expected 15 or 16 fields, got {len(tokens)}"
                )
            try:
                records.append(_parse_label_line(tokens))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: malformed numeric token ({exc})") from exc
    return records


def format_label(rec: LabelRecord) -> str:
    parts = [rec.class_name,
             f"{rec.truncation:.2f}", str(rec.occlusion), f"{rec.alpha:.2f}",
             *(f"{v:.2f}" for v in rec.bbox2d),
             *(f"{v:.2f}" for v in rec.dims),
             *(f"{v:.2f}" for v in rec.location),
             f"{rec.yaw:.2f}"]
    if rec.score is not None:
        parts.append(f"{rec.score:.2f}")
    return " ".join(parts)


def write_labels(records: list[LabelRecord], path: str | os.PathLike) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(format_label(rec) + "\n")
