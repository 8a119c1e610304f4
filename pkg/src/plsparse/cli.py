"""Command-line entry points: project, keypoints, separate, dss,
sparsify-unsup, sparsify-sup, eval, stats.

Configuration comes from an optional INI file (--config); command-line flags
always win. Exit codes: 0 success, 1 fatal config/IO error, 2 partial batch
failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import eval3d, kitti_io
from .errors import ToolkitError
from .foreground import SeparationConfig, blend_background, separate
from .keypoints import KeypointConfig, anchors_array, select_points_of_interest
from .pipeline import (PipelineConfig, StageReport, compute_stats,
                       discover_frames, frame_seed, run_batch, stats_table)
from .projection import RangeCropConfig, backproject, camera_to_sensor
from .sampler import StratifyConfig, sample

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


def load_config(path: str | None) -> PipelineConfig:
    """Build a PipelineConfig from an INI file; absent sections keep their
    defaults."""
    cfg = PipelineConfig()
    if not path:
        return cfg
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ToolkitError(f"cannot read config file {path}")

    def get(section, key, cast, default):
        if parser.has_option(section, key):
            return cast(parser.get(section, key))
        return default

    crop = cfg.crop
    if get("projection", "no_crop", lambda s: s.lower() == "true", False):
        crop = None
    elif parser.has_section("projection"):
        crop = RangeCropConfig(
            max_depth=get("projection", "max_depth", float, crop.max_depth),
            max_abs_x=get("projection", "max_abs_x", float, crop.max_abs_x),
        )
    kp = KeypointConfig(
        step=get("keypoints", "step", int, cfg.keypoint.step),
        sigmas=get("keypoints", "sigmas",
                   lambda s: tuple(float(t) for t in s.split(",")),
                   cfg.keypoint.sigmas),
        threshold=get("keypoints", "threshold",
                      lambda s: None if s == "auto" else float(s),
                      cfg.keypoint.threshold),
        axis=get("keypoints", "axis", str, cfg.keypoint.axis),
        suppress_radius=get("keypoints", "suppress_radius", float,
                            cfg.keypoint.suppress_radius),
    )
    sep = SeparationConfig(
        fg_radius=get("foreground", "fg_radius", float, cfg.separation.fg_radius),
        bg_keep_ratio=get("foreground", "bg_keep_ratio", float,
                          cfg.separation.bg_keep_ratio),
    )
    dss = StratifyConfig(
        bin_width=get("sampler", "bin_width", float, cfg.stratify.bin_width),
        max_range=get("sampler", "max_range", float, cfg.stratify.max_range),
        rate=get("sampler", "rate", float, cfg.stratify.rate),
        min_keep_per_bin=get("sampler", "min_keep_per_bin", int,
                             cfg.stratify.min_keep_per_bin),
        use_depth=get("sampler", "use_depth", lambda s: s.lower() == "true",
                      cfg.stratify.use_depth),
    )
    return PipelineConfig(
        crop=crop, keypoint=kp, separation=sep, stratify=dss,
        score_floor=get("frustum", "score_floor", float, cfg.score_floor),
        dilate_px=get("frustum", "dilate_px", int, cfg.dilate_px),
        scale_divisor=get("io", "scale_divisor", float, cfg.scale_divisor),
        seed=get("pipeline", "seed", int, cfg.seed),
        sensor_frame=get("pipeline", "sensor_frame",
                         lambda s: s.lower() == "true", cfg.sensor_frame),
        depth_dir=get("io", "depth_dir", str, ""),
        calib_dir=get("io", "calib_dir", str, ""),
        image_dir=get("io", "image_dir", str, ""),
        regions_dir=get("io", "regions_dir", str, ""),
        output_dir=get("io", "output_dir", str, ""),
    )


def _apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    """Command-line flags win over the config file."""
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "scale_divisor", None) is not None:
        cfg = replace(cfg, scale_divisor=args.scale_divisor)
    if getattr(args, "rate", None) is not None:
        cfg = replace(cfg, stratify=replace(cfg.stratify, rate=args.rate))
    if getattr(args, "bin_width", None) is not None:
        cfg = replace(cfg, stratify=replace(cfg.stratify, bin_width=args.bin_width))
    if getattr(args, "fg_radius", None) is not None:
        cfg = replace(cfg, separation=replace(cfg.separation, fg_radius=args.fg_radius))
    if getattr(args, "bg_keep_ratio", None) is not None:
        cfg = replace(cfg, separation=replace(cfg.separation,
                                              bg_keep_ratio=args.bg_keep_ratio))
    if getattr(args, "dilate_px", None) is not None:
        cfg = replace(cfg, dilate_px=args.dilate_px)
    if getattr(args, "score_floor", None) is not None:
        cfg = replace(cfg, score_floor=args.score_floor)
    if getattr(args, "no_crop", False):
        cfg = replace(cfg, crop=None)
    if getattr(args, "sensor_frame", False):
        cfg = replace(cfg, sensor_frame=True)
    for attr in ("depth_dir", "calib_dir", "image_dir", "regions_dir",
                 "output_dir"):
        value = getattr(args, attr, None)
        if value:
            cfg = replace(cfg, **{attr: value})
    return cfg


def _frames(args, cfg: PipelineConfig) -> list[str]:
    if getattr(args, "frames", None):
        return args.frames.split(",")
    return discover_frames(cfg.depth_dir)


def cmd_project(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    depth = kitti_io.read_depth_png(args.depth, cfg.scale_divisor)
    calib = kitti_io.read_calib(args.calib)
    cloud = backproject(depth, calib, cfg.crop)
    if cfg.sensor_frame:
        cloud = camera_to_sensor(cloud, calib)
    kitti_io.write_point_bin(cloud, args.output)
    print(f"{args.output}: {len(cloud)} points")
    return EXIT_OK


def cmd_keypoints(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    depth = kitti_io.read_depth_png(args.depth, cfg.scale_divisor)
    calib = kitti_io.read_calib(args.calib)
    image = None
    if args.image:
        from PIL import Image
        image = np.asarray(Image.open(args.image), dtype=np.float64)
    source = image if image is not None else np.where(depth.valid, depth.depth, 0.0)
    kps, stats = select_points_of_interest(source, depth, calib, cfg.keypoint)
    with open(args.output, "w") as f:
        for kp in kps:
            x, y, z = np.asarray(kp.point3d).reshape(3)
            f.write(f"{kp.u} {kp.v} {kp.sigma:.4f} {kp.response:.6f} "
                    f"{x:.4f} {y:.4f} {z:.4f}\n")
    print(f"{args.output}: {len(kps)} keypoints "
          f"({stats['n_extrema']} extrema, {stats['n_lift_dropped']} dropped)")
    return EXIT_OK


def _read_keypoints_txt(path: str) -> np.ndarray:
    rows = np.loadtxt(path, ndmin=2)
    return rows[:, 4:7] if rows.size else np.empty((0, 3))


def cmd_separate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    cloud = kitti_io.read_point_bin(args.cloud)
    cloud = replace(cloud, frame=args.frame)
    anchors = _read_keypoints_txt(args.keypoints)
    sep_cfg = replace(cfg.separation, seed=cfg.seed)
    tagged = separate(cloud, anchors, sep_cfg)
    if args.blend:
        tagged = blend_background(tagged, sep_cfg)
    # fg/bg tag rides in the intensity channel of the written cloud
    out = replace(tagged, intensity=tagged.tag.astype(np.float64))
    kitti_io.write_point_bin(out, args.output)
    n_fg = int((tagged.tag == 1).sum())
    print(f"{args.output}: {len(tagged)} points, {n_fg} foreground")
    return EXIT_OK


def cmd_dss(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    cloud = kitti_io.read_point_bin(args.input)
    if args.sweep:
        rates = [float(r) for r in args.sweep.split(",")]
        base, ext = os.path.splitext(args.output)
        for rate in rates:
            dss_cfg = replace(cfg.stratify, rate=rate, seed=cfg.seed)
            out = sample(cloud, dss_cfg)
            path = f"{base}_rate{int(round(rate * 100)):03d}{ext}"
            kitti_io.write_point_bin(out, path)
            print(f"{path}: {len(out)} / {len(cloud)} points (rate {rate})")
        return EXIT_OK
    dss_cfg = replace(cfg.stratify, seed=cfg.seed)
    out = sample(cloud, dss_cfg)
    kitti_io.write_point_bin(out, args.output)
    print(f"{args.output}: {len(out)} / {len(cloud)} points")
    return EXIT_OK


def _cmd_sparsify(args, mode: str) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    frames = _frames(args, cfg)
    if len(frames) == 1 and not args.batch:
        # single-frame mode: errors are fatal
        os.makedirs(cfg.output_dir, exist_ok=True)
        from .pipeline import process_frame
        counts = process_frame(frames[0], cfg, mode)
        report = StageReport()
        wall = counts.pop("wall_time")
        report.add(frames[0], counts, wall)
        print(report.to_text())
        return EXIT_OK
    report = run_batch(frames, cfg, mode, workers=args.workers)
    print(report.to_text())
    for fid, reason in report.skipped:
        print(f"skipped {fid}: {reason}", file=sys.stderr)
    return EXIT_PARTIAL if report.skipped else EXIT_OK


def cmd_eval(args) -> int:
    thresholds = None
    if args.iou_thresholds:
        thresholds = {}
        for part in args.iou_thresholds.split(","):
            cls, _, val = part.partition("=")
            thresholds[cls] = float(val)
    results = eval3d.evaluate_directories(
        args.det_dir, args.gt_dir,
        classes=tuple(args.classes.split(",")),
        iou_thresholds=thresholds,
    )
    payload = {
        cls: {
            diff: {
                metric: {grid: round(res.ap, 6)
                         for grid, res in grids.items()}
                for metric, grids in metrics.items()
            }
            for diff, metrics in diffs.items()
        }
        for cls, diffs in results.items()
    }
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        for cls, diffs in payload.items():
            for diff, metrics in diffs.items():
                cells = "  ".join(
                    f"{metric}/{grid}={ap:.4f}"
                    for metric, grids in metrics.items()
                    for grid, ap in grids.items()
                )
                print(f"{cls:<12} {diff:<9} {cells}")
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    frames = _frames(args, cfg)
    rows = compute_stats(frames, cfg, real_dir=args.real_dir or "")
    print(stats_table(rows))
    if args.json:
        print(json.dumps(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plsparse",
        description="PseudoLiDAR generation, sparsification, and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="INI config file; flags override it")
        p.add_argument("--seed", type=int, help="global seed")
        p.add_argument("--scale-divisor", dest="scale_divisor", type=float,
                       help="depth PNG divisor (default 256)")

    p = sub.add_parser("project", help="back-project a depth map to a cloud")
    add_common(p)
    p.add_argument("--depth", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--no-crop", action="store_true")
    p.add_argument("--sensor-frame", action="store_true")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("keypoints", help="detect and lift points of interest")
    add_common(p)
    p.add_argument("--depth", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--image", help="grayscale/RGB source (default: depth map)")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_keypoints)

    p = sub.add_parser("separate", help="tag foreground around keypoints")
    add_common(p)
    p.add_argument("--cloud", required=True)
    p.add_argument("--keypoints", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--frame", default="camera_rect",
                   choices=["camera_rect", "sensor"])
    p.add_argument("--fg-radius", dest="fg_radius", type=float)
    p.add_argument("--bg-keep-ratio", dest="bg_keep_ratio", type=float)
    p.add_argument("--blend", action="store_true",
                   help="also apply the background blend")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("dss", help="distance-stratified sampling")
    add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--rate", type=float)
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--sweep", help="comma list of rates, e.g. 0.8,0.6,0.4,0.2,0.1")
    p.set_defaults(func=cmd_dss)

    for name, mode in (("sparsify-unsup", "unsupervised"),
                       ("sparsify-sup", "supervised")):
        p = sub.add_parser(name, help=f"{mode} sparsification pipeline")
        add_common(p)
        p.add_argument("--depth-dir", dest="depth_dir")
        p.add_argument("--calib-dir", dest="calib_dir")
        p.add_argument("--image-dir", dest="image_dir")
        p.add_argument("--regions-dir", dest="regions_dir")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--frames", help="comma list of frame ids (default: all)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--batch", action="store_true",
                       help="treat a single frame as batch (skip on error)")
        p.add_argument("--rate", type=float)
        p.add_argument("--fg-radius", dest="fg_radius", type=float)
        p.add_argument("--bg-keep-ratio", dest="bg_keep_ratio", type=float)
        p.add_argument("--dilate-px", dest="dilate_px", type=int)
        p.add_argument("--score-floor", dest="score_floor", type=float)
        p.add_argument("--no-crop", action="store_true")
        p.add_argument("--sensor-frame", action="store_true")
        p.set_defaults(func=lambda a, m=mode: _cmd_sparsify(a, m))

    p = sub.add_parser("eval", help="3D/BEV interpolated-AP evaluation")
    p.add_argument("--det-dir", dest="det_dir", required=True)
    p.add_argument("--gt-dir", dest="gt_dir", required=True)
    p.add_argument("--classes", default="Car,Pedestrian,Cyclist")
    p.add_argument("--iou-thresholds", dest="iou_thresholds",
                   help="per-class overrides, e.g. Car=0.7,Pedestrian=0.5")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="per-frame point accounting")
    add_common(p)
    p.add_argument("--depth-dir", dest="depth_dir")
    p.add_argument("--calib-dir", dest="calib_dir")
    p.add_argument("--image-dir", dest="image_dir")
    p.add_argument("--frames")
    p.add_argument("--real-dir", dest="real_dir",
                   help="directory of real-scan .bin files to compare against")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
