"""Shared test helpers: deterministic RNG and on-disk frame writers."""

import os

import numpy as np
import pytest

from plsparse.fixtures import RenderedScene, SceneSpec, render
from plsparse.kitti_io import write_calib, write_depth_png, write_labels


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_scene_spec(seed: int = 0, **overrides) -> SceneSpec:
    """A compact scene (fast to render and sparsify) with one box per range."""
    from plsparse.fixtures import BoxObject

    defaults = dict(
        width=400, height=160, fx=240.0, fy=240.0, cx=200.0, cy=70.0,
        camera_height=1.65, max_ground_depth=60.0, noise_sigma=0.02,
        seed=seed,
        objects=[
            BoxObject("Car", center_x=-1.0, range_z=8.0, width=2.0, height=1.6),
            BoxObject("Car", center_x=4.0, range_z=15.0, width=2.0, height=1.6),
            BoxObject("Pedestrian", center_x=-4.0, range_z=12.0,
                      width=1.0, height=1.8),
        ],
    )
    defaults.update(overrides)
    return SceneSpec(**defaults)


def write_frame_dirs(root, frame_ids, specs, scale_divisor: float = 256.0):
    """Write depth/calib/regions directories for the given scene specs.

    Returns (depth_dir, calib_dir, regions_dir, rendered scenes by frame id).
    """
    depth_dir = os.path.join(root, "depth")
    calib_dir = os.path.join(root, "calib")
    regions_dir = os.path.join(root, "regions")
    for d in (depth_dir, calib_dir, regions_dir):
        os.makedirs(d, exist_ok=True)
    scenes: dict[str, RenderedScene] = {}
    for fid, spec in zip(frame_ids, specs):
        scene = render(spec)
        scenes[fid] = scene
        write_depth_png(scene.depth, os.path.join(depth_dir, fid + ".png"),
                        scale_divisor)
        write_calib(scene.calib, os.path.join(calib_dir, fid + ".txt"))
        write_labels(scene.gt_boxes, os.path.join(regions_dir, fid + ".txt"))
    return depth_dir, calib_dir, regions_dir, scenes
