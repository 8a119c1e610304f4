"""Rotated IoU, difficulty gating, greedy matching, interpolated AP."""

import json
import os

import numpy as np
import pytest

from plsparse.errors import UsageError
from plsparse.eval3d import (R11, R40, APResult, EvalConfig, OrientedBox,
                             PrecisionRecallCurve, assign_difficulty, bev_iou,
                             box_iou_2d, clip_convex, evaluate_directories,
                             interpolated_ap, iou_3d, match_and_sweep,
                             match_frames, polygon_area)
from plsparse.kitti_io import LabelRecord, write_labels

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def car(x, z=20.0, yaw=0.0, y=1.0, dims=(1.5, 2.0, 4.0)):
    return OrientedBox(center=(x, y, z), dims=dims, yaw=yaw)


class TestGeometryPrimitives:
    def test_polygon_area_square(self):
        square = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], float)
        assert polygon_area(square) == 4.0
        assert polygon_area(square[::-1]) == 4.0  # winding-independent

    def test_clip_overlapping_squares(self):
        a = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], float)
        b = np.array([[1, 1], [3, 1], [3, 3], [1, 3]], float)
        for clipper in (b, b[::-1]):
            inter = clip_convex(a, clipper)
            assert polygon_area(inter) == pytest.approx(1.0, abs=1e-12)

    def test_clip_disjoint_is_empty(self):
        a = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        b = a + 10.0
        assert polygon_area(clip_convex(a, b)) == 0.0

    def test_box_iou_2d(self):
        a = (0, 0, 10, 10)
        assert box_iou_2d(a, a) == 1.0
        assert box_iou_2d(a, (20, 20, 30, 30)) == 0.0
        assert box_iou_2d(a, (5, 0, 15, 10)) == pytest.approx(50 / 150)


class TestBevIou:
    def test_identical_boxes(self):
        b = car(3.0, yaw=0.7)
        assert bev_iou(b, b) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_boxes(self):
        assert bev_iou(car(0.0), car(50.0)) == 0.0

    def test_quarter_turn_closed_form(self):
        # same-center w x l footprint vs its 90-degree rotation:
        # intersection is min(w, l)^2
        for w, l in ((2.0, 4.0), (1.3, 3.7), (2.5, 2.5)):
            a = OrientedBox((0, 0, 0), (1.0, w, l), 0.0)
            b = OrientedBox((0, 0, 0), (1.0, w, l), np.pi / 2)
            m = min(w, l)
            expect = m * m / (2 * w * l - m * m)
            assert abs(bev_iou(a, b) - expect) < 1e-9

    def test_symmetry_identity_and_range(self, rng):
        for _ in range(100):
            a = OrientedBox(tuple(rng.uniform(-3, 3, 3)),
                            tuple(rng.uniform(0.5, 4, 3)),
                            float(rng.uniform(-np.pi, np.pi)))
            b = OrientedBox(tuple(rng.uniform(-3, 3, 3)),
                            tuple(rng.uniform(0.5, 4, 3)),
                            float(rng.uniform(-np.pi, np.pi)))
            ab, ba = bev_iou(a, b), bev_iou(b, a)
            assert abs(ab - ba) < 1e-12
            assert 0.0 <= ab <= 1.0
            assert bev_iou(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_common_rotation_invariance(self, rng):
        for _ in range(30):
            a = OrientedBox((float(rng.uniform(-3, 3)), 0.0,
                             float(rng.uniform(-3, 3))),
                            tuple(rng.uniform(0.5, 4, 3)),
                            float(rng.uniform(-np.pi, np.pi)))
            b = OrientedBox((float(rng.uniform(-3, 3)), 0.0,
                             float(rng.uniform(-3, 3))),
                            tuple(rng.uniform(0.5, 4, 3)),
                            float(rng.uniform(-np.pi, np.pi)))
            base = bev_iou(a, b)
            phi = float(rng.uniform(-np.pi, np.pi))
            c, s = np.cos(phi), np.sin(phi)

            def spin(box):
                x, y, z = box.center
                return OrientedBox((x * c + z * s, y, -x * s + z * c),
                                   box.dims, box.yaw + phi)

            assert abs(bev_iou(spin(a), spin(b)) - base) < 1e-9

    def test_degenerate_dims_rejected(self):
        with pytest.raises(UsageError):
            OrientedBox((0, 0, 0), (0.0, 1, 1), 0.0)

    def test_monte_carlo_oracle(self):
        with open(os.path.join(DATA_DIR, "iou_mc_oracle.json")) as f:
            data = json.load(f)
        assert len(data["pairs"]) == 500
        for pair in data["pairs"]:
            a = OrientedBox(tuple(pair["box_a"]["center"]),
                            tuple(pair["box_a"]["dims"]), pair["box_a"]["yaw"])
            b = OrientedBox(tuple(pair["box_b"]["center"]),
                            tuple(pair["box_b"]["dims"]), pair["box_b"]["yaw"])
            assert abs(bev_iou(a, b) - pair["bev_iou"]) < 1e-3
            assert abs(iou_3d(a, b) - pair["iou_3d"]) < 1e-3


class TestIou3d:
    def test_identical(self):
        b = car(1.0, yaw=-0.4)
        assert iou_3d(b, b) == pytest.approx(1.0, abs=1e-12)

    def test_same_footprint_vertically_disjoint(self):
        a = OrientedBox((0, 0.0, 10), (1.5, 2, 4), 0.0)
        b = OrientedBox((0, 5.0, 10), (1.5, 2, 4), 0.0)
        assert iou_3d(a, b) == 0.0

    def test_half_height_overlap(self):
        a = OrientedBox((0, 0.0, 10), (2.0, 2, 4), 0.0)
        b = OrientedBox((0, 1.0, 10), (2.0, 2, 4), 0.0)
        # footprints equal, vertical overlap 1 of 2 -> inter 8, union 24
        assert iou_3d(a, b) == pytest.approx(8 / 24)


class TestAssignDifficulty:
    def test_gate_examples(self):
        easy = LabelRecord("Car", bbox2d=(0, 0, 10, 50))
        assert assign_difficulty(easy) == {"easy", "moderate", "hard"}
        mid = LabelRecord("Car", bbox2d=(0, 0, 10, 30), occlusion=1,
                          truncation=0.2)
        assert assign_difficulty(mid) == {"moderate", "hard"}
        tiny = LabelRecord("Car", bbox2d=(0, 0, 10, 20))
        assert assign_difficulty(tiny) == set()

    def test_boundaries_inclusive(self):
        assert "easy" in assign_difficulty(
            LabelRecord("Car", bbox2d=(0, 0, 10, 40), truncation=0.15))
        assert "easy" not in assign_difficulty(
            LabelRecord("Car", bbox2d=(0, 0, 10, 39.9)))
        hard_only = LabelRecord("Car", bbox2d=(0, 0, 10, 30), occlusion=2,
                                truncation=0.5)
        assert assign_difficulty(hard_only) == {"hard"}


def _label(class_name, x, score=None, occlusion=0, bbox2d=None, z=20.0):
    return LabelRecord(
        class_name, occlusion=occlusion,
        bbox2d=bbox2d or (x * 10 + 500, 50.0, x * 10 + 560, 100.0),
        dims=(1.5, 2.0, 4.0), location=(x, 1.0, z), yaw=0.0, score=score)


class TestMatchAndSweep:
    def test_exact_copies_reach_recall_one(self):
        gts = [_label("Car", x) for x in (0.0, 10.0, 20.0)]
        dets = [_label("Car", x, score=0.9 - 0.1 * i)
                for i, x in enumerate((0.0, 10.0, 20.0))]
        curve = match_and_sweep(dets, gts, EvalConfig(), metric="bev")
        assert curve.recalls[-1] == 1.0
        assert curve.precisions[-1] == 1.0
        assert curve.tp == 3 and curve.fp == 0

    def test_zero_detections(self):
        gts = [_label("Car", 0.0)]
        curve = match_and_sweep([], gts, EvalConfig(), metric="bev")
        assert len(curve.recalls) == 0
        assert interpolated_ap(curve, "R11").ap == 0.0
        assert interpolated_ap(curve, "R40").ap == 0.0

    def test_hand_traced_five_gt_seven_det_scenario(self):
        # Ground truth: four moderate-pool cars, one hard-only car (occluded),
        # one DontCare strip. Detections exercise every outcome kind.
        gts = [
            _label("Car", 0.0),
            _label("Car", 10.0),
            _label("Car", 20.0),
            _label("Car", 30.0),                      # never detected
            _label("Car", 40.0, occlusion=2),         # hard-only: ignored pool
            LabelRecord("DontCare", bbox2d=(600.0, 100.0, 700.0, 200.0),
                        dims=(-1.0, -1.0, -1.0)),
        ]
        dets = [
            _label("Car", 0.0, score=0.95),           # tp (exact copy)
            _label("Car", 10.2, score=0.90),          # tp (IoU 7.6/8.4)
            _label("Car", 22.0, score=0.85),          # fp (IoU 1/3 < 0.7)
            _label("Car", 40.0, score=0.80),          # ignored (hard-only gt)
            _label("Car", 20.0, score=0.75),          # tp
            _label("Car", -20.0, score=0.70,          # ignored (DontCare 2D)
                   bbox2d=(610.0, 110.0, 690.0, 190.0)),
            _label("Car", 0.0, score=0.65),           # fp (gt already matched)
        ]
        cfg = EvalConfig(difficulty="moderate")
        curve = match_and_sweep(dets, gts, cfg, metric="bev")
        assert curve.n_gt == 4
        assert curve.tp == 3 and curve.fp == 2
        assert curve.recalls.tolist() == [0.25, 0.5, 0.5, 0.75, 0.75]
        assert curve.precisions.tolist() == [1.0, 1.0, 2 / 3, 0.75, 0.6]
        assert interpolated_ap(curve, "R11").ap == pytest.approx(7.5 / 11)

    def test_recall_is_non_decreasing(self, rng):
        for _ in range(10):
            gts = [_label("Car", float(x))
                   for x in rng.uniform(-50, 50, rng.integers(1, 8))]
            dets = [_label("Car", float(x), score=float(rng.uniform(0, 1)))
                    for x in rng.uniform(-50, 50, rng.integers(0, 15))]
            curve = match_and_sweep(dets, gts, EvalConfig(), metric="bev")
            assert np.all(np.diff(curve.recalls) >= 0)

    def test_multi_frame_aggregation(self):
        frame1 = ([_label("Car", 0.0, score=0.9)], [_label("Car", 0.0)])
        frame2 = ([_label("Car", 5.0, score=0.8)], [_label("Car", 30.0)])
        curve = match_frames([frame1, frame2], EvalConfig(), "Car", "bev")
        assert curve.n_gt == 2
        assert curve.tp == 1 and curve.fp == 1


def direct_eq1(recalls, precisions, grid):
    total = 0.0
    for r in grid:
        vals = [p for rr, p in zip(recalls, precisions) if rr >= r]
        total += max(vals) if vals else 0.0
    return total / len(grid)


class TestInterpolatedAp:
    def make_curve(self, recalls, precisions, n_gt=10):
        return PrecisionRecallCurve(np.asarray(recalls, float),
                                    np.asarray(precisions, float),
                                    tp=0, fp=0, matched_gt=0, n_gt=n_gt)

    def test_perfect_curve(self):
        curve = self.make_curve([0.5, 1.0], [1.0, 1.0])
        assert interpolated_ap(curve, "R11").ap == 1.0
        assert interpolated_ap(curve, "R40").ap == 1.0

    def test_grids(self):
        assert R11 == tuple(i / 10 for i in range(11))
        assert len(R40) == 40 and R40[0] == 0.025 and 0.0 not in R40

    def test_single_tangential_match_inflates_r11_only(self):
        # one true positive at rank 1 among many detections, large n_gt
        n_fp = 60
        recalls = [0.01] * (n_fp + 1)
        precisions = [1.0 / (k + 1) for k in range(n_fp + 1)]
        curve = self.make_curve(recalls, precisions, n_gt=100)
        assert interpolated_ap(curve, "R11").ap >= 0.0909
        assert interpolated_ap(curve, "R40").ap <= 0.03

    def test_matches_direct_formula_on_random_curves(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 40))
            recalls = np.sort(rng.uniform(0, 1, n))
            precisions = rng.uniform(0, 1, n)
            curve = self.make_curve(recalls, precisions)
            for grid_name, grid in (("R11", R11), ("R40", R40)):
                got = interpolated_ap(curve, grid_name).ap
                assert abs(got - direct_eq1(recalls, precisions, grid)) < 1e-12

    def test_monotone_in_precision(self, rng):
        recalls = np.sort(rng.uniform(0, 1, 20))
        p1 = rng.uniform(0, 1, 20)
        p2 = np.minimum(1.0, p1 + rng.uniform(0, 0.3, 20))
        ap1 = interpolated_ap(self.make_curve(recalls, p1), "R40").ap
        ap2 = interpolated_ap(self.make_curve(recalls, p2), "R40").ap
        assert ap2 >= ap1

    def test_r11_at_least_zeroless_mean(self, rng):
        recalls = np.sort(rng.uniform(0, 1, 15))
        precisions = rng.uniform(0, 1, 15)
        curve = self.make_curve(recalls, precisions)
        with_zero = interpolated_ap(curve, "R11").ap
        without = direct_eq1(recalls, precisions, R11[1:])
        assert with_zero * 11 >= without * 10 - 1e-12


class TestEvaluateDirectories:
    def test_perfect_detections_score_one(self, tmp_path):
        gt_dir = tmp_path / "gt"
        det_dir = tmp_path / "det"
        gt_dir.mkdir(), det_dir.mkdir()
        for fid, xs in (("000000", (0.0, 12.0)), ("000001", (-8.0,))):
            gts = [_label("Car", x) for x in xs]
            dets = [_label("Car", x, score=0.9) for x in xs]
            write_labels(gts, gt_dir / f"{fid}.txt")
            write_labels(dets, det_dir / f"{fid}.txt")
        results = evaluate_directories(det_dir, gt_dir, classes=("Car",))
        for difficulty in ("easy", "moderate", "hard"):
            for metric in ("bev", "3d"):
                for grid in ("R11", "R40"):
                    res = results["Car"][difficulty][metric][grid]
                    assert isinstance(res, APResult)
                    assert res.ap == pytest.approx(1.0)

    def test_missing_detection_file_counts_as_empty(self, tmp_path):
        gt_dir = tmp_path / "gt"
        det_dir = tmp_path / "det"
        gt_dir.mkdir(), det_dir.mkdir()
        write_labels([_label("Car", 0.0)], gt_dir / "000000.txt")
        results = evaluate_directories(det_dir, gt_dir, classes=("Car",))
        assert results["Car"]["moderate"]["3d"]["R40"].ap == 0.0
