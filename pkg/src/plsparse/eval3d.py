"""KITTI-style 3D/BEV evaluator: rotated-rectangle IoU via convex clipping,
greedy score-ordered matching with difficulty pools and ignore semantics,
and N-point interpolated average precision on the R11/R40 recall grids."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .kitti_io import DONT_CARE, LabelRecord, read_labels

AREA_EPS = 1e-9

DIFFICULTIES = ("easy", "moderate", "hard")
# (min 2D box height px, max occlusion, max truncation) per tier
_TIER_GATES = {
    "easy": (40.0, 0, 0.15),
    "moderate": (25.0, 1, 0.30),
    "hard": (25.0, 2, 0.50),
}

DEFAULT_IOU_THRESHOLDS = {"Car": 0.7, "Pedestrian": 0.5, "Cyclist": 0.5}

R11 = tuple(i / 10.0 for i in range(11))         # includes recall 0
R40 = tuple(i / 40.0 for i in range(1, 41))      # excludes recall 0
RECALL_GRIDS = {"R11": R11, "R40": R40}


@dataclass
class OrientedBox:
    """3D box in camera_rect: center (x, y, z) with y at the box bottom,
    dims (h, w, l), yaw about the vertical axis."""

    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float

    def __post_init__(self):
        if min(self.dims) <= 0:
            raise UsageError(f"degenerate box dims {self.dims}")

    @classmethod
    def from_label(cls, rec: LabelRecord) -> "OrientedBox":
        return cls(center=rec.location, dims=rec.dims, yaw=rec.yaw)

    def footprint(self) -> np.ndarray:
        """(4, 2) BEV corners in the (x, z) ground plane, counter-ordered
        consistently for clipping."""
        h, w, l = self.dims
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        local = np.array([[l / 2, w / 2], [l / 2, -w / 2],
                          [-l / 2, -w / 2], [-l / 2, w / 2]])
        rot = np.array([[c, s], [-s, c]])
        return local @ rot.T + np.array([self.center[0], self.center[2]])

    def y_interval(self) -> tuple[float, float]:
        """Vertical extent (top, bottom) with y pointing down."""
        return self.center[1] - self.dims[0], self.center[1]

    @property
    def footprint_area(self) -> float:
        return self.dims[1] * self.dims[2]

    @property
    def volume(self) -> float:
        return self.dims[0] * self.dims[1] * self.dims[2]


def polygon_area(poly: np.ndarray) -> float:
    """Shoelace area (absolute)."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def clip_convex(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex subject polygon by a convex
    clipper. Works for either vertex winding of the clipper."""
    clipper = np.asarray(clipper, dtype=np.float64)
    # Signed area fixes the inside test for either winding.
    x, y = clipper[:, 0], clipper[:, 1]
    signed = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    sign = 1.0 if signed >= 0 else -1.0
    output = [tuple(p) for p in np.asarray(subject, dtype=np.float64)]
    for k in range(len(clipper)):
        if not output:
            break
        a, b = clipper[k], clipper[(k + 1) % len(clipper)]
        edge = (b[0] - a[0], b[1] - a[1])

        def side(p):
            return sign * (edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0]))

        current, output = output, []
        prev = current[-1]
        prev_side = side(prev)
        for point in current:
            cur_side = side(point)
            if cur_side >= 0:  # inside, with the sign normalizing the winding
                if prev_side < 0:
                    output.append(_intersect(prev, point, a, b))
                output.append(point)
            elif prev_side >= 0:
                output.append(_intersect(prev, point, a, b))
            prev, prev_side = point, cur_side
    return np.array(output) if output else np.empty((0, 2))


def _intersect(p, q, a, b):
    """Intersection of segment p-q with the infinite line a-b."""
    dpx, dpy = q[0] - p[0], q[1] - p[1]
    dcx, dcy = b[0] - a[0], b[1] - a[1]
    denom = dpx * dcy - dpy * dcx
    t = ((a[0] - p[0]) * dcy - (a[1] - p[1]) * dcx) / denom
    return (p[0] + t * dpx, p[1] + t * dpy)


def bev_intersection_area(a: OrientedBox, b: OrientedBox) -> float:
    inter = clip_convex(a.footprint(), b.footprint())
    area = polygon_area(inter)
    return 0.0 if area < AREA_EPS else area


def bev_iou(a: OrientedBox, b: OrientedBox) -> float:
    """IoU of the yaw-rotated ground-plane footprints."""
    inter = bev_intersection_area(a, b)
    union = a.footprint_area + b.footprint_area - inter
    return inter / union if union > 0 else 0.0


def iou_3d(a: OrientedBox, b: OrientedBox) -> float:
    """Volumetric IoU: BEV intersection times vertical overlap."""
    inter_bev = bev_intersection_area(a, b)
    ta, ba = a.y_interval()
    tb, bb = b.y_interval()
    dy = max(0.0, min(ba, bb) - max(ta, tb))
    inter = inter_bev * dy
    union = a.volume + b.volume - inter
    return inter / union if union > 0 else 0.0


def box_iou_2d(a, b) -> float:
    """Plain axis-aligned IoU of (left, top, right, bottom) pixel boxes."""
    il = max(a[0], b[0])
    it = max(a[1], b[1])
    ir = min(a[2], b[2])
    ib = min(a[3], b[3])
    if ir <= il or ib <= it:
        return 0.0
    inter = (ir - il) * (ib - it)
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def assign_difficulty(gt: LabelRecord) -> set[str]:
    """Cumulative tier membership from 2D height, occlusion, truncation.
    Boxes passing no gate return the empty set and are ignored everywhere."""
    tiers = set()
    for tier, (min_h, max_occ, max_trunc) in _TIER_GATES.items():
        if (gt.bbox_height >= min_h and gt.occlusion <= max_occ
                and gt.truncation <= max_trunc):
            tiers.add(tier)
    return tiers


@dataclass
class EvalConfig:
    iou_thresholds: dict = field(default_factory=lambda: dict(DEFAULT_IOU_THRESHOLDS))
    recall_positions: str = "R40"
    difficulty: str = "moderate"


@dataclass
class PrecisionRecallCurve:
    recalls: np.ndarray
    precisions: np.ndarray
    tp: int
    fp: int
    matched_gt: int
    n_gt: int


@dataclass
class APResult:
    ap: float
    pr_curve: PrecisionRecallCurve
    counts: tuple[int, int, int, int]  # (tp, fp, matched_gt, n_gt)


def _match_frame(dets: list[LabelRecord], gts: list[LabelRecord],
                 class_name: str, difficulty: str, iou_threshold: float,
                 metric: str):
    """Greedy per-frame matching in descending score order.

    Returns (outcomes, n_gt) where outcomes is a list of (score, kind) with
    kind in {"tp", "fp", "ignored"} for each same-class detection.
    """
    iou_fn = iou_3d if metric == "3d" else bev_iou
    gt_active, gt_ignored, dont_care = [], [], []
    for gt in gts:
        if gt.class_name == DONT_CARE:
            dont_care.append(gt)
        elif gt.class_name == class_name:
            tiers = assign_difficulty(gt)
            if difficulty in tiers:
                gt_active.append(gt)
            else:
                gt_ignored.append(gt)  # harder-only or no tier at all

    active_boxes = [OrientedBox.from_label(g) for g in gt_active]
    ignored_boxes = [OrientedBox.from_label(g) for g in gt_ignored]
    matched = [False] * len(gt_active)

    cls_dets = [d for d in dets if d.class_name == class_name]
    order = sorted(range(len(cls_dets)),
                   key=lambda i: (-(cls_dets[i].score or 0.0), i))
    outcomes = []
    for i in order:
        det = cls_dets[i]
        det_box = OrientedBox.from_label(det)
        best_j, best_iou = -1, iou_threshold
        for j, gt_box in enumerate(active_boxes):
            if matched[j]:
                continue
            iou = iou_fn(det_box, gt_box)
            if iou >= best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0:
            matched[best_j] = True
            outcomes.append((det.score or 0.0, "tp"))
            continue
        ignored = any(iou_fn(det_box, g) >= iou_threshold for g in ignored_boxes)
        if not ignored:
            ignored = any(box_iou_2d(det.bbox2d, dc.bbox2d) >= 0.5
                          for dc in dont_care)
        outcomes.append((det.score or 0.0, "ignored" if ignored else "fp"))
    return outcomes, len(gt_active)


def _sweep(outcomes, n_gt: int) -> PrecisionRecallCurve:
    """Global descending-score sweep over matching outcomes."""
    outcomes = sorted(outcomes, key=lambda o: -o[0])
    recalls, precisions = [], []
    tp = fp = 0
    for _, kind in outcomes:
        if kind == "ignored":
            continue
        if kind == "tp":
            tp += 1
        else:
            fp += 1
        recalls.append(tp / n_gt if n_gt else 0.0)
        precisions.append(tp / (tp + fp))
    return PrecisionRecallCurve(
        recalls=np.array(recalls), precisions=np.array(precisions),
        tp=tp, fp=fp, matched_gt=tp, n_gt=n_gt,
    )


def match_and_sweep(dets: list[LabelRecord], gts: list[LabelRecord],
                    cfg: EvalConfig, class_name: str = "Car",
                    metric: str = "3d") -> PrecisionRecallCurve:
    """Single-frame matching plus precision/recall sweep."""
    threshold = cfg.iou_thresholds.get(class_name, 0.5)
    outcomes, n_gt = _match_frame(dets, gts, class_name, cfg.difficulty,
                                  threshold, metric)
    return _sweep(outcomes, n_gt)


def match_frames(frames, cfg: EvalConfig, class_name: str,
                 metric: str) -> PrecisionRecallCurve:
    """Multi-frame evaluation: per-frame greedy matching, global sweep.
    frames is an iterable of (dets, gts) pairs."""
    threshold = cfg.iou_thresholds.get(class_name, 0.5)
    all_outcomes, total_gt = [], 0
    for dets, gts in frames:
        outcomes, n_gt = _match_frame(dets, gts, class_name, cfg.difficulty,
                                      threshold, metric)
        all_outcomes.extend(outcomes)
        total_gt += n_gt
    return _sweep(all_outcomes, total_gt)


def interpolated_ap(curve: PrecisionRecallCurve,
                    recall_positions: str = "R40") -> APResult:
    """Mean over the recall grid of the max precision at recall >= r
    (0 when no curve point reaches r)."""
    grid = RECALL_GRIDS[recall_positions]
    total = 0.0
    for r in grid:
        reachable = curve.precisions[curve.recalls >= r]
        total += float(reachable.max()) if len(reachable) else 0.0
    ap = total / len(grid)
    return APResult(ap=ap, pr_curve=curve,
                    counts=(curve.tp, curve.fp, curve.matched_gt, curve.n_gt))


def evaluate_directories(det_dir: str | os.PathLike, gt_dir: str | os.PathLike,
                         classes=("Car", "Pedestrian", "Cyclist"),
                         iou_thresholds: dict | None = None) -> dict:
    """Evaluate a directory of detection files against ground-truth files.

    Frames are paired by file name; missing detection files count as empty.
    Returns {class: {difficulty: {metric: {grid: APResult}}}}.
    """
    gt_files = sorted(f for f in os.listdir(gt_dir) if f.endswith(".txt"))
    frames = []
    for name in gt_files:
        gts = read_labels(os.path.join(gt_dir, name))
        det_path = os.path.join(det_dir, name)
        dets = read_labels(det_path) if os.path.exists(det_path) else []
        frames.append((dets, gts))
    thresholds = dict(DEFAULT_IOU_THRESHOLDS)
    if iou_thresholds:
        thresholds.update(iou_thresholds)
    results: dict = {}
    for cls in classes:
        results[cls] = {}
        for difficulty in DIFFICULTIES:
            cfg = EvalConfig(iou_thresholds=thresholds, difficulty=difficulty)
            results[cls][difficulty] = {}
            for metric in ("bev", "3d"):
                curve = match_frames(frames, cfg, cls, metric)
                results[cls][difficulty][metric] = {
                    grid: interpolated_ap(curve, grid) for grid in RECALL_GRIDS
                }
    return results
