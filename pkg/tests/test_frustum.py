"""Frustum extraction from 2D regions and the supervised pipeline wrapper."""

import numpy as np
import pytest

from plsparse.core import (CameraCalib, DepthMap, PointCloud, TAG_BACKGROUND,
                           TAG_FOREGROUND)
from plsparse.errors import DataError, UsageError
from plsparse.frustum import (Region2D, extract, pipeline_supervised,
                              rasterize_box, regions_from_labels)
from plsparse.kitti_io import LabelRecord
from plsparse.projection import project_to_pixels
from plsparse.sampler import StratifyConfig
from plsparse.foreground import SeparationConfig


CAL = CameraCalib.identity(fx=100.0, fy=100.0, cx=50.0, cy=40.0)
IMG = (100, 80)  # (width, height)


def cloud_on_grid(rng, n=400):
    pts = np.stack([rng.uniform(-0.5, 0.5, n),
                    rng.uniform(-0.4, 0.4, n),
                    np.ones(n)], axis=1) * rng.uniform(2, 30, (n, 1))
    return PointCloud(pts)


class TestRegion2D:
    def test_score_out_of_range_rejected(self):
        with pytest.raises(DataError):
            Region2D(score=1.2, bbox=(0, 0, 10, 10))

    def test_needs_exactly_one_geometry(self):
        with pytest.raises(UsageError):
            Region2D(score=0.5)
        with pytest.raises(UsageError):
            Region2D(score=0.5, bbox=(0, 0, 1, 1), mask=np.ones((2, 2), bool))

    def test_degenerate_box_rejected(self):
        with pytest.raises(DataError):
            Region2D(bbox=(10, 0, 10, 5))

    def test_regions_from_labels_skips_dont_care(self):
        labels = [
            LabelRecord("Car", bbox2d=(0, 0, 10, 10), score=0.9),
            LabelRecord("DontCare", bbox2d=(5, 5, 9, 9), dims=(-1, -1, -1)),
            LabelRecord("Pedestrian", bbox2d=(20, 20, 30, 40)),
        ]
        regions = regions_from_labels(labels)
        assert [r.class_name for r in regions] == ["Car", "Pedestrian"]
        assert regions[0].score == 0.9
        assert regions[1].score == 1.0  # no score column -> full confidence


class TestRasterizeBox:
    def test_integer_pixel_membership(self):
        mask = rasterize_box((1.2, 0.8, 3.9, 2.0), 6, 4)
        cols = np.nonzero(mask.any(axis=0))[0]
        rows = np.nonzero(mask.any(axis=1))[0]
        assert cols.tolist() == [2, 3]  # ceil(1.2)..floor(3.9)
        assert rows.tolist() == [1, 2]  # ceil(0.8)..floor(2.0)

    def test_clipped_to_image(self):
        mask = rasterize_box((-5, -5, 100, 100), 6, 4)
        assert mask.all()

    def test_fully_outside_is_empty(self):
        assert not rasterize_box((10, 10, 20, 20), 6, 4).any()


class TestExtract:
    def test_full_image_region_tags_everything(self, rng):
        cloud = cloud_on_grid(rng)
        region = Region2D(bbox=(0, 0, IMG[0] - 1, IMG[1] - 1), score=1.0)
        tagged, counts, n_behind = extract(cloud, [region], CAL, IMG,
                                           dilate_px=0)
        assert n_behind == 0
        assert np.all(tagged.tag == TAG_FOREGROUND)
        assert counts == [len(cloud)]

    def test_empty_regions_all_background(self, rng):
        cloud = cloud_on_grid(rng)
        tagged, counts, _ = extract(cloud, [], CAL, IMG)
        assert np.all(tagged.tag == TAG_BACKGROUND)
        assert counts == []

    def test_membership_matches_brute_force_projection(self, rng):
        cloud = cloud_on_grid(rng, 1000)
        bbox = (30.0, 25.0, 60.0, 55.0)
        tagged, _, _ = extract(cloud, [Region2D(bbox=bbox)], CAL, IMG,
                               dilate_px=0)
        uvz, _ = project_to_pixels(cloud, CAL)
        for i, (u, v, _) in enumerate(uvz):
            iu, iv = int(np.floor(u)), int(np.floor(v))
            inside = (np.ceil(bbox[0]) <= iu <= np.floor(bbox[2])
                      and np.ceil(bbox[1]) <= iv <= np.floor(bbox[3])
                      and 0 <= iu < IMG[0] and 0 <= iv < IMG[1])
            assert (tagged.tag[i] == TAG_FOREGROUND) == inside

    def test_box_and_rasterized_mask_agree(self, rng):
        cloud = cloud_on_grid(rng, 600)
        bbox = (20.3, 10.7, 70.9, 60.1)
        by_box, _, _ = extract(cloud, [Region2D(bbox=bbox)], CAL, IMG,
                               dilate_px=0)
        mask = rasterize_box(bbox, *IMG)
        by_mask, _, _ = extract(cloud, [Region2D(mask=mask)], CAL, IMG,
                                dilate_px=0)
        assert np.array_equal(by_box.tag, by_mask.tag)

    def test_dilation_is_monotone(self, rng):
        cloud = cloud_on_grid(rng, 600)
        bbox = (40.0, 30.0, 55.0, 45.0)
        previous = None
        for d in (0, 2, 4, 8):
            tagged, _, _ = extract(cloud, [Region2D(bbox=bbox)], CAL, IMG,
                                   dilate_px=d)
            fg = set(np.flatnonzero(tagged.tag == TAG_FOREGROUND).tolist())
            if previous is not None:
                assert previous <= fg
            previous = fg

    def test_mask_dilation_matches_box_dilation(self, rng):
        cloud = cloud_on_grid(rng, 600)
        bbox = (20.0, 10.0, 70.0, 60.0)  # integer corners: exact raster
        by_box, _, _ = extract(cloud, [Region2D(bbox=bbox)], CAL, IMG,
                               dilate_px=3)
        by_mask, _, _ = extract(cloud, [Region2D(mask=rasterize_box(bbox, *IMG))],
                                CAL, IMG, dilate_px=3)
        assert np.array_equal(by_box.tag, by_mask.tag)

    def test_score_floor_filters_regions(self, rng):
        cloud = cloud_on_grid(rng)
        full = (0, 0, IMG[0] - 1, IMG[1] - 1)
        weak = Region2D(bbox=full, score=0.3)
        tagged, counts, _ = extract(cloud, [weak], CAL, IMG, score_floor=0.5)
        assert np.all(tagged.tag == TAG_BACKGROUND)
        assert counts == [0]
        # boundary is inclusive: score == floor passes
        tagged, _, _ = extract(cloud, [Region2D(bbox=full, score=0.5)], CAL,
                               IMG, score_floor=0.5)
        assert np.all(tagged.tag == TAG_FOREGROUND)

    def test_behind_camera_points_are_background(self):
        cloud = PointCloud([[0.0, 0.0, 5.0], [0.0, 0.0, -5.0]])
        region = Region2D(bbox=(0, 0, IMG[0] - 1, IMG[1] - 1))
        tagged, _, n_behind = extract(cloud, [region], CAL, IMG)
        assert n_behind == 1
        assert tagged.tag.tolist() == [TAG_FOREGROUND, TAG_BACKGROUND]

    def test_wrong_mask_shape_rejected(self, rng):
        cloud = cloud_on_grid(rng, 10)
        with pytest.raises(UsageError):
            extract(cloud, [Region2D(mask=np.ones((4, 4), bool))], CAL, IMG)


class TestPipelineSupervised:
    def make_scene(self):
        depth = np.full((IMG[1], IMG[0]), 10.0)
        return DepthMap(depth=depth, valid=depth > 0)

    def test_identity_configuration(self):
        dm = self.make_scene()
        region = Region2D(bbox=(0, 0, IMG[0] - 1, IMG[1] - 1))
        final, counts = pipeline_supervised(
            dm, CAL, [region],
            StratifyConfig(rate=1.0),
            SeparationConfig(bg_keep_ratio=0.0),
            range_crop=None, dilate_px=0)
        assert counts["raw"] == IMG[0] * IMG[1]
        assert len(final) == counts["raw"]

    def test_partial_region_count_composition(self):
        # region covering ~28% of a uniform-depth frame, bg off, rate 0.10:
        # final count tracks 0.1 * fg within per-bin rounding
        dm = self.make_scene()
        region = Region2D(bbox=(0.0, 0.0, 52.0, 41.0))  # 53x42 px = 27.8%
        final, counts = pipeline_supervised(
            dm, CAL, [region],
            StratifyConfig(rate=0.10, seed=4),
            SeparationConfig(bg_keep_ratio=0.0),
            range_crop=None, dilate_px=0)
        assert counts["foreground"] == 53 * 42
        assert counts["blended"] == counts["foreground"]
        expect = 0.1 * counts["foreground"]
        assert abs(counts["final"] - expect) <= 16  # one rounding per bin
        assert len(final) == counts["final"]
