"""Core data carriers shared by every module: point clouds, depth maps, calibration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError

# Coordinate frames
CAMERA_RECT = "camera_rect"
SENSOR = "sensor"

# Per-point provenance tags
TAG_BACKGROUND = 0
TAG_FOREGROUND = 1
TAG_UNASSIGNED = -1


def round_half_up(x: float) -> int:
    """Deterministic half-up rounding used for all sample-count arithmetic."""
    return int(math.floor(x + 0.5))


@dataclass
class PointCloud:
    """Flat collection of 3D points with optional intensity and provenance tags.

    points is (N, 3) float64; intensity (N,) in [0, 1]; tag (N,) int8 with the
    TAG_* codes above.
    """

    points: np.ndarray
    frame: str = CAMERA_RECT
    intensity: np.ndarray | None = None
    tag: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            bad = int(np.argwhere(~np.isfinite(self.points))[0, 0])
            raise DataError(f"non-finite coordinate at point {bad}")
        if self.intensity is not None:
            self.intensity = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
            if len(self.intensity) != len(self.points):
                raise UsageError("intensity length does not match point count")
        if self.tag is not None:
            self.tag = np.asarray(self.tag, dtype=np.int8).reshape(-1)
            if len(self.tag) != len(self.points):
                raise UsageError("tag length does not match point count")

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, indices: np.ndarray) -> "PointCloud":
        """New cloud keeping only the given indices (order preserved)."""
        indices = np.asarray(indices, dtype=np.intp)
        return PointCloud(
            points=self.points[indices],
            frame=self.frame,
            intensity=None if self.intensity is None else self.intensity[indices],
            tag=None if self.tag is None else self.tag[indices],
        )

    def with_tags(self, tag: np.ndarray) -> "PointCloud":
        return PointCloud(self.points, self.frame, self.intensity, tag)


@dataclass
class DepthMap:
    """Dense grid of metric depths plus a validity mask; (H, W) arrays."""

    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.depth.ndim != 2 or self.depth.shape != self.valid.shape:
            raise UsageError("depth and valid must be matching 2D grids")
        if np.any(self.depth[self.valid] <= 0):
            raise DataError("valid pixel with non-positive depth")

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


@dataclass
class CameraCalib:
    """Pinhole intrinsics plus rectification and sensor-extrinsic transforms.

    projection is the 3x4 rectified-camera projection, rect_rotation the 3x3
    rectifying rotation, sensor_to_camera the 3x4 rigid sensor->camera
    transform. defaulted_keys lists keys that were missing from the source
    file and fell back to identity.
    """

    projection: np.ndarray
    rect_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    sensor_to_camera: np.ndarray = field(
        default_factory=lambda: np.eye(4)[:3, :]
    )
    defaulted_keys: tuple = ()

    def __post_init__(self):
        self.projection = np.asarray(self.projection, dtype=np.float64).reshape(3, 4)
        self.rect_rotation = np.asarray(self.rect_rotation, dtype=np.float64).reshape(3, 3)
        self.sensor_to_camera = np.asarray(
            self.sensor_to_camera, dtype=np.float64
        ).reshape(3, 4)
        if self.projection[0, 0] <= 0 or self.projection[1, 1] <= 0:
            raise DataError("focal lengths must be positive")
        err = np.abs(self.rect_rotation @ self.rect_rotation.T - np.eye(3)).max()
        if err > 1e-6:
            raise DataError(f"rect_rotation not orthonormal (deviation {err:.2e})")

    @property
    def fx(self) -> float:
        return float(self.projection[0, 0])

    @property
    def fy(self) -> float:
        return float(self.projection[1, 1])

    @property
    def cx(self) -> float:
        return float(self.projection[0, 2])

    @property
    def cy(self) -> float:
        return float(self.projection[1, 2])

    @classmethod
    def identity(cls, fx: float = 700.0, fy: float = 700.0,
                 cx: float = 600.0, cy: float = 180.0) -> "CameraCalib":
        """Pure pinhole calibration with identity extrinsics; handy for tests."""
        proj = np.array([[fx, 0.0, cx, 0.0],
                         [0.0, fy, cy, 0.0],
                         [0.0, 0.0, 1.0, 0.0]])
        return cls(projection=proj)
