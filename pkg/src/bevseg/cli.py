"""Command-line pipeline: scene generation, projection, rasterization,
void filling, and evaluation, runnable stage by stage or end to end.

All outputs are deterministic for a fixed seed and config, independent of
--workers. Set BEVSEG_LOG=DEBUG|INFO|WARNING to control log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bevraster import BevGrid, one_hot, rasterize, resample_nearest
from .errors import BevSegError, InvalidInputError
from .io import (
    read_bev,
    read_cloud,
    read_depth,
    read_labels,
    write_bev,
    write_cloud,
    write_color_png,
    write_depth,
    write_labels,
    write_tensor,
)
from .metrics import confuse, format_report, report_data
from .parserfill import FillStrategy, apply_strategy
from .rig import RigConfig, default_rig, load_rig, save_rig
from .synthscene import SceneSpec, generate_scene, render_bev_gt, render_scene, save_scene
from .unproject import DEFAULT_MAX_RANGE, ViewFrame, unproject_rig

log = logging.getLogger("bevseg")


def _load_rig_arg(path) -> RigConfig:
    return load_rig(path) if path else default_rig()


def _frame_paths(directory: Path, view_name: str):
    return directory / f"{view_name}.depth.bin", directory / f"{view_name}.labels.png"


def _write_frames(directory: Path, rig: RigConfig, frames) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for frame in frames:
        depth_path, label_path = _frame_paths(directory, rig.views[frame.view_index].name)
        write_depth(depth_path, frame.depth)
        write_labels(label_path, frame.labels, rig.class_table, rig.void_id)


def _read_frames(directory: Path, rig: RigConfig) -> list:
    frames = []
    for i, view in enumerate(rig.views):
        depth_path, label_path = _frame_paths(directory, view.name)
        depth = read_depth(depth_path)
        labels, _, void_id = read_labels(label_path)
        if void_id != rig.void_id:
            raise InvalidInputError(
                f"{label_path}: void_id {void_id} does not match the rig's {rig.void_id}"
            )
        frames.append(ViewFrame(view_index=i, depth=depth, labels=labels))
    return frames


def _timed_rasterize(cloud, grid, rig, workers):
    t0 = time.perf_counter()
    bev = rasterize(cloud, grid, void_id=rig.void_id, workers=workers)
    dt = time.perf_counter() - t0
    rate = cloud.num_points / dt if dt > 0 else float("inf")
    print(
        f"rasterize: {cloud.num_points} points in {dt:.3f} s "
        f"({rate / 1e6:.2f} M points/s, workers={workers})"
    )
    return bev


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rig = _load_rig_arg(args.rig)
    scene = generate_scene(args.seed, SceneSpec(extent=args.extent))
    save_rig(rig, out / "rig.yaml")
    save_scene(scene, out / "scene.yaml")
    frames = render_scene(scene, rig, workers=args.workers)
    _write_frames(out / "frames", rig, frames)
    grid = BevGrid(width_px=args.grid_size, extent=args.extent)
    gt = render_bev_gt(scene, grid, void_id=rig.void_id)
    write_bev(out / "gt_bev.png", gt, rig.class_table)
    write_color_png(out / "gt_bev_color.png", gt.cells, rig.class_table, rig.void_id)
    log.info("generated scene %d into %s", args.seed, out)
    return 0


def cmd_project(args) -> int:
    rig = _load_rig_arg(args.rig)
    frames = _read_frames(Path(args.frames), rig)
    cloud = unproject_rig(frames, rig, max_range=args.max_range, workers=args.workers)
    write_cloud(args.out, cloud)
    log.info("fused %d points into %s", cloud.num_points, args.out)
    return 0


def cmd_rasterize(args) -> int:
    rig = _load_rig_arg(args.rig)
    cloud = read_cloud(args.cloud)
    grid = BevGrid(width_px=args.grid_size, extent=args.extent)
    bev = _timed_rasterize(cloud, grid, rig, args.workers)
    write_bev(args.out, bev, rig.class_table, with_heights=args.heights)
    if args.tensor:
        write_tensor(args.tensor, one_hot(bev, rig.num_classes))
    return 0


def _strategy_from_args(args) -> FillStrategy:
    kind = {"nearest": "nearest_neighbor", "none": "none"}[args.fill]
    return FillStrategy(
        kind=kind,
        max_radius=args.max_radius,
        default_class=args.fill_class,
        smooth=args.smooth,
    )


def cmd_fill(args) -> int:
    bev, table = read_bev(args.bev)
    filled = apply_strategy(bev, _strategy_from_args(args))
    write_bev(args.out, filled, table)
    return 0


def cmd_eval(args) -> int:
    pred, table = read_bev(args.pred)
    gt, _ = read_bev(args.gt)
    if pred.cells.shape != gt.cells.shape:
        if not args.resample:
            raise InvalidInputError(
                f"pred {pred.cells.shape} and gt {gt.cells.shape} differ; "
                "pass --resample for nearest-neighbor resampling"
            )
        pred = resample_nearest(pred, gt.grid.width_px)
    cm = confuse(pred, gt, num_classes=len(table))
    data = report_data(cm, [c.name for c in table], strict=args.strict_mean)
    print(format_report(data))
    if args.report:
        Path(args.report).write_text(yaml.safe_dump(data, sort_keys=False),
                                     encoding="utf-8")
    return 0


def cmd_run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rig = _load_rig_arg(args.rig)
    grid = BevGrid(width_px=args.grid_size, extent=args.extent)

    scene = generate_scene(args.seed, SceneSpec(extent=args.extent))
    save_rig(rig, out / "rig.yaml")
    save_scene(scene, out / "scene.yaml")
    frames = render_scene(scene, rig, workers=args.workers)
    _write_frames(out / "frames", rig, frames)
    gt = render_bev_gt(scene, grid, void_id=rig.void_id)
    write_bev(out / "gt_bev.png", gt, rig.class_table)

    frames = _read_frames(out / "frames", rig)
    cloud = unproject_rig(frames, rig, max_range=args.max_range, workers=args.workers)
    write_cloud(out / "cloud.ply", cloud)

    cloud = read_cloud(out / "cloud.ply")
    bev = _timed_rasterize(cloud, grid, rig, args.workers)
    write_bev(out / "bev_incomplete.png", bev, rig.class_table)
    write_tensor(out / "bev_tensor.bin", one_hot(bev, rig.num_classes))

    filled = apply_strategy(bev, _strategy_from_args(args))
    write_bev(out / "bev_filled.png", filled, rig.class_table)

    for name, cells in (
        ("gt_bev_color.png", gt.cells),
        ("bev_incomplete_color.png", bev.cells),
        ("bev_filled_color.png", filled.cells),
    ):
        write_color_png(out / name, cells, rig.class_table, rig.void_id)

    cm = confuse(filled, gt, num_classes=rig.num_classes)
    data = report_data(cm, [c.name for c in rig.class_table], strict=args.strict_mean)
    print(format_report(data))
    (out / "report.yaml").write_text(yaml.safe_dump(data, sort_keys=False),
                                     encoding="utf-8")
    return 0


def _add_common(parser, *names):
    if "rig" in names:
        parser.add_argument("--rig", default=None, help="rig YAML (default: bundled 4-view rig)")
    if "grid" in names:
        parser.add_argument("--extent", type=float, default=15.0,
                            help="BEV side length in meters")
    if "workers" in names:
        parser.add_argument("--workers", type=int, default=1)
    if "fill" in names:
        parser.add_argument("--fill", choices=("nearest", "none"), default="nearest")
        parser.add_argument("--max-radius", type=float, default=float("inf"),
                            help="cells; farther voids get --fill-class")
        parser.add_argument("--fill-class", type=int, default=5)
        parser.add_argument("--smooth", type=int, default=None,
                            help="odd kernel size for majority smoothing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bevseg",
        description="Depth + segmentation maps to fused semantic point clouds "
                    "and completed BEV rasters.",
    )
    parser.add_argument("--version", action="version", version=f"bevseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic scene and render all views")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-size", type=int, default=256, help="GT raster width in px")
    _add_common(p, "rig", "grid", "workers")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("project", help="depth+label frames to a fused cloud")
    p.add_argument("--frames", required=True, help="directory with <view>.depth.bin/.labels.png")
    p.add_argument("--out", required=True, help="output .ply")
    p.add_argument("--max-range", type=float, default=DEFAULT_MAX_RANGE)
    _add_common(p, "rig", "workers")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("rasterize", help="cloud to incomplete BEV raster")
    p.add_argument("--cloud", required=True)
    p.add_argument("--out", required=True, help="output .png (sidecar written alongside)")
    p.add_argument("--grid-size", type=int, default=512)
    p.add_argument("--tensor", default=None, help="also dump the one-hot tensor here")
    p.add_argument("--heights", action="store_true", help="serialize winner heights")
    _add_common(p, "rig", "grid", "workers")
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("fill", help="complete the void cells of a BEV raster")
    p.add_argument("--bev", required=True)
    p.add_argument("--out", required=True)
    _add_common(p, "fill")
    p.set_defaults(func=cmd_fill)

    p = sub.add_parser("eval", help="IoU report of a predicted BEV against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", default=None, help="also write a YAML report here")
    p.add_argument("--strict-mean", action="store_true",
                   help="average over all classes, counting absent ones as 0")
    p.add_argument("--resample", action="store_true",
                   help="nearest-neighbor resample pred onto the gt grid")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="full chain: gen, project, rasterize, fill, eval")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-size", type=int, default=256)
    p.add_argument("--max-range", type=float, default=DEFAULT_MAX_RANGE)
    p.add_argument("--strict-mean", action="store_true")
    _add_common(p, "rig", "grid", "workers", "fill")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("BEVSEG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BevSegError, OSError) as exc:
        print(
            f"error: {type(exc).__module__}.{type(exc).__name__}: {exc}",
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
