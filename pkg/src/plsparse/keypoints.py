"""Points-of-interest selection: forward differences, LoG scale-space
extrema, lifting to 3D, and radius-based 3D suppression."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import CameraCalib, DepthMap
from .errors import UsageError
from .projection import backproject_pixels

DEFAULT_SIGMAS = (1.6, 2.26, 3.2, 4.53, 6.4)  # geometric ladder, ratio ~sqrt(2)


@dataclass
class Keypoint:
    u: int
    v: int
    sigma: float
    response: float
    point3d: np.ndarray | None = None


@dataclass
class KeypointConfig:
    step: int = 2
    sigmas: tuple = DEFAULT_SIGMAS
    threshold: float | None = None  # absolute |response|; None -> mean + 2*std
    axis: str = "horizontal"        # "horizontal", "vertical", or "both"
    suppress_radius: float = 0.5    # meters


def grayscale(image: np.ndarray) -> np.ndarray:
    """Luma conversion (0.299/0.587/0.114) for RGB input; pass-through for 2D."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[2] == 3:
        return image @ np.array([0.299, 0.587, 0.114])
    raise UsageError(f"expected 2D or HxWx3 image, got shape {image.shape}")


def forward_difference(image: np.ndarray, step: int, axis: str = "horizontal") -> np.ndarray:
    """Signed finite difference with the given step; output shrinks by step
    along the differenced axis."""
    image = np.asarray(image, dtype=np.float64)
    if step < 1:
        raise UsageError("step must be >= 1")
    if axis == "horizontal":
        if step >= image.shape[1]:
            raise UsageError(f"step {step} >= image width {image.shape[1]}")
        return image[:, step:] - image[:, :-step]
    if axis == "vertical":
        if step >= image.shape[0]:
            raise UsageError(f"step {step} >= image height {image.shape[0]}")
        return image[step:, :] - image[:-step, :]
    raise UsageError(f"unknown axis {axis!r}")


def log_responses(image: np.ndarray, sigmas) -> np.ndarray:
    """Scale-normalized LoG stack (sigma^2 * laplacian-of-gaussian), shape
    (n_sigmas, H, W)."""
    image = np.asarray(image, dtype=np.float64)
    return np.stack([s * s * ndimage.gaussian_laplace(image, s) for s in sigmas])


def _strict_extrema(abs_resp: np.ndarray) -> np.ndarray:
    """Mask of strict local maxima of a (n_sigmas, H, W) stack over the
    3x3x3 neighborhood (3x3 when a single scale is present)."""
    if abs_resp.shape[0] == 1:
        footprint = np.ones((1, 3, 3), dtype=bool)
        footprint[0, 1, 1] = False
    else:
        footprint = np.ones((3, 3, 3), dtype=bool)
        footprint[1, 1, 1] = False
    neighbor_max = ndimage.maximum_filter(
        abs_resp, footprint=footprint, mode="constant", cval=-np.inf
    )
    return abs_resp > neighbor_max


def log_extrema(image: np.ndarray, sigmas, threshold: float) -> list[Keypoint]:
    """Strict scale-space extrema of |scale-normalized LoG| above threshold,
    sorted by descending |response| (ties by row-major pixel, then scale)."""
    sigmas = list(sigmas)
    if not sigmas:
        raise UsageError("sigma list must not be empty")
    if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise UsageError("sigmas must be strictly ascending")
    if threshold <= 0:
        raise UsageError("threshold must be positive")
    resp = log_responses(image, sigmas)
    a = np.abs(resp)
    mask = _strict_extrema(a) & (a >= threshold)
    s_idx, v_idx, u_idx = np.nonzero(mask)
    order = np.lexsort((s_idx, u_idx, v_idx, -a[s_idx, v_idx, u_idx]))
    return [
        Keypoint(u=int(u_idx[i]), v=int(v_idx[i]),
                 sigma=float(sigmas[s_idx[i]]),
                 response=float(resp[s_idx[i], v_idx[i], u_idx[i]]))
        for i in order
    ]


def adaptive_threshold(image: np.ndarray, sigmas) -> float:
    """Exposure-invariant default detection threshold: mean + 2*std of
    |response| over the whole scale stack."""
    a = np.abs(log_responses(image, sigmas))
    return float(a.mean() + 2.0 * a.std())


def lift_to_3d(keypoints: list[Keypoint], depth: DepthMap, calib: CameraCalib,
               step: int = 0, axis: str = "horizontal"):
    """Attach 3D positions via the depth map; returns (lifted, n_dropped).

    Keypoints come from a forward-difference image, so the differenced pixel
    coordinate is shifted back by step/2 (rounded down) before the depth
    lookup. Keypoints on invalid depth or out of bounds are dropped.
    """
    du = step // 2 if axis in ("horizontal", "both") else 0
    dv = step // 2 if axis in ("vertical", "both") else 0
    lifted, dropped = [], 0
    for kp in keypoints:
        u, v = kp.u + du, kp.v + dv
        if not (0 <= v < depth.height and 0 <= u < depth.width) or not depth.valid[v, u]:
            dropped += 1
            continue
        p = backproject_pixels(u, v, depth.depth[v, u], calib)
        lifted.append(Keypoint(kp.u, kp.v, kp.sigma, kp.response, point3d=p))
    return lifted, dropped


def suppress_3d(keypoints: list[Keypoint], radius: float) -> list[Keypoint]:
    """Greedy 3D non-max suppression: walk keypoints by descending |response|
    (ties by row-major pixel), keep one iff no kept keypoint lies within
    radius."""
    if radius <= 0:
        raise UsageError("radius must be positive")
    order = sorted(range(len(keypoints)),
                   key=lambda i: (-abs(keypoints[i].response),
                                  keypoints[i].v, keypoints[i].u))
    kept: list[Keypoint] = []
    kept_pts = np.empty((0, 3))
    for i in order:
        kp = keypoints[i]
        if kp.point3d is None:
            raise UsageError("suppress_3d requires lifted keypoints")
        if len(kept) == 0 or np.min(
            np.linalg.norm(kept_pts - kp.point3d, axis=1)
        ) > radius:
            kept.append(kp)
            kept_pts = np.vstack([kept_pts, np.asarray(kp.point3d).reshape(1, 3)])
    return kept


def select_points_of_interest(image: np.ndarray, depth: DepthMap,
                              calib: CameraCalib, cfg: KeypointConfig):
    """Full keypoint chain on a grayscale image: forward difference, LoG extrema,
    3D lifting, radius suppression. Returns (keypoints, stats dict)."""
    gray = grayscale(image)
    if cfg.axis == "both":
        dh = forward_difference(gray, cfg.step, "horizontal")
        dv = forward_difference(gray, cfg.step, "vertical")
        h = min(dh.shape[0], dv.shape[0])
        w = min(dh.shape[1], dv.shape[1])
        dh, dv = dh[:h, :w], dv[:h, :w]
        diff = np.where(np.abs(dh) >= np.abs(dv), dh, dv)
    else:
        diff = forward_difference(gray, cfg.step, cfg.axis)
    threshold = cfg.threshold
    if threshold is None:
        threshold = adaptive_threshold(diff, cfg.sigmas)
    # A flat difference image yields threshold 0; nothing to detect there.
    raw = log_extrema(diff, cfg.sigmas, threshold) if threshold > 0 else []
    lifted, dropped = lift_to_3d(raw, depth, calib, step=cfg.step, axis=cfg.axis)
    kept = suppress_3d(lifted, cfg.suppress_radius)
    stats = {"n_extrema": len(raw), "n_lift_dropped": dropped,
             "n_lifted": len(lifted), "n_kept": len(kept),
             "threshold": threshold}
    return kept, stats


def anchors_array(keypoints: list[Keypoint]) -> np.ndarray:
    """(K, 3) array of lifted keypoint positions."""
    if not keypoints:
        return np.empty((0, 3))
    return np.stack([np.asarray(kp.point3d).reshape(3) for kp in keypoints])
