"""plsparse: PseudoLiDAR generation, sparsification, and 3D detection
evaluation toolkit."""

from .core import (CAMERA_RECT, SENSOR, TAG_BACKGROUND, TAG_FOREGROUND,
                   TAG_UNASSIGNED, CameraCalib, DepthMap, PointCloud)
from .projection import RangeCropConfig, backproject, project_to_pixels

__version__ = "0.1.0"

__all__ = [
    "CAMERA_RECT", "SENSOR", "TAG_BACKGROUND", "TAG_FOREGROUND",
    "TAG_UNASSIGNED", "CameraCalib", "DepthMap", "PointCloud",
    "RangeCropConfig", "backproject", "project_to_pixels", "__version__",
]
