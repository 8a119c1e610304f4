"""Pinhole back-projection of depth maps and frame transforms.

Back-projection turns a depth map into a PseudoLiDAR cloud in the rectified
camera frame (x right, y down, z forward); the sensor-frame conversion is an
explicit separate step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CAMERA_RECT, SENSOR, CameraCalib, DepthMap, PointCloud
from .errors import ConfigError, UsageError


@dataclass
class RangeCropConfig:
    """Axis crops applied after back-projection.

    Defaults keep 0 < z <= 70 m and |x| <= 40 m; y is not cropped unless a
    (y_min, y_max) band is given.
    """

    max_depth: float = 70.0
    max_abs_x: float = 40.0
    y_range: tuple[float, float] | None = None


def _crop_mask(x: np.ndarray, y: np.ndarray, z: np.ndarray,
               crop: RangeCropConfig | None) -> np.ndarray:
    keep = z > 0
    if crop is None:
        return keep
    keep &= z <= crop.max_depth
    keep &= np.abs(x) <= crop.max_abs_x
    if crop.y_range is not None:
        lo, hi = crop.y_range
        keep &= (y >= lo) & (y <= hi)
    return keep


def backproject(depth: DepthMap, calib: CameraCalib,
                range_crop: RangeCropConfig | None = RangeCropConfig()) -> PointCloud:
    """Lift every valid, in-crop pixel to a 3D point in the camera_rect frame.

    Output order is row-major pixel order. Pass range_crop=None to disable
    cropping entirely.
    """
    if calib.fx == 0 or calib.fy == 0:
        raise ConfigError("zero focal length")
    h, w = depth.depth.shape
    v, u = np.mgrid[0:h, 0:w]
    z = depth.depth.reshape(-1)
    u = u.reshape(-1).astype(np.float64)
    v = v.reshape(-1).astype(np.float64)
    x = (u - calib.cx) * z / calib.fx
    y = (v - calib.cy) * z / calib.fy
    keep = depth.valid.reshape(-1) & _crop_mask(x, y, z, range_crop)
    pts = np.stack([x[keep], y[keep], z[keep]], axis=1)
    return PointCloud(points=pts, frame=CAMERA_RECT)


def backproject_pixels(u: np.ndarray, v: np.ndarray, z: np.ndarray,
                       calib: CameraCalib) -> np.ndarray:
    """Pinhole lift of explicit (u, v, z) triples; returns (N, 3) camera_rect."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    x = (u - calib.cx) * z / calib.fx
    y = (v - calib.cy) * z / calib.fy
    return np.stack([x, y, z], axis=-1)


def project_to_pixels(cloud: PointCloud, calib: CameraCalib):
    """Forward projection; returns ((M, 3) array of (u, v, z), n_behind).

    Points with z <= 0 are behind the camera and are excluded; their count is
    the second return value.
    """
    if cloud.frame != CAMERA_RECT:
        raise UsageError(f"cloud must be in {CAMERA_RECT} frame, got {cloud.frame}")
    x, y, z = cloud.points.T
    front = z > 0
    n_behind = int(len(z) - front.sum())
    u = calib.fx * x[front] / z[front] + calib.cx
    v = calib.fy * y[front] / z[front] + calib.cy
    return np.stack([u, v, z[front]], axis=1), n_behind


def _sensor_to_camera_matrix(calib: CameraCalib) -> np.ndarray:
    """4x4 matrix for rect_rotation composed with the sensor->camera rigid
    transform."""
    t = np.eye(4)
    t[:3, :] = calib.sensor_to_camera
    r = np.eye(4)
    r[:3, :3] = calib.rect_rotation
    return r @ t


def sensor_to_camera_frame(cloud: PointCloud, calib: CameraCalib) -> PointCloud:
    """Apply rect_rotation ∘ sensor_to_camera; relabels the frame."""
    if cloud.frame != SENSOR:
        raise UsageError(f"expected {SENSOR}-frame cloud, got {cloud.frame}")
    m = _sensor_to_camera_matrix(calib)
    pts = cloud.points @ m[:3, :3].T + m[:3, 3]
    return PointCloud(pts, frame=CAMERA_RECT, intensity=cloud.intensity, tag=cloud.tag)


def camera_to_sensor(cloud: PointCloud, calib: CameraCalib) -> PointCloud:
    """Inverse of sensor_to_camera_frame."""
    if cloud.frame != CAMERA_RECT:
        raise UsageError(f"expected {CAMERA_RECT}-frame cloud, got {cloud.frame}")
    m = np.linalg.inv(_sensor_to_camera_matrix(calib))
    pts = cloud.points @ m[:3, :3].T + m[:3, 3]
    return PointCloud(pts, frame=SENSOR, intensity=cloud.intensity, tag=cloud.tag)
