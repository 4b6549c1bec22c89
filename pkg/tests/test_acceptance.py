"""Acceptance gate: one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
"""

import hashlib
import os
import time
from pathlib import Path

import numpy as np
import pytest

from bevseg.bevraster import BevGrid, BevMap, rasterize
from bevseg.cli import main
from bevseg.errors import BevSegError
from bevseg.io import (
    read_bev,
    read_cloud,
    read_depth,
    read_depth_png,
    read_labels,
    read_tensor,
    write_cloud,
    write_depth,
    write_labels,
)
from bevseg.metrics import confuse, mean_iou
from bevseg.parserfill import FillStrategy, apply_strategy, fill
from bevseg.rig import default_class_table, default_rig, load_rig, save_rig
from bevseg.synthscene import (
    SceneSpec,
    generate_scene,
    load_scene,
    render_bev_gt,
    render_scene,
    save_scene,
)
from bevseg.unproject import (
    ViewFrame,
    project_point,
    unproject_pixel,
    unproject_rig,
)

from oracles import brute_fill, brute_rasterize, gt_boundary_mask, random_cloud

# Floor for the boundary-included mIoU of criterion A2, calibrated against
# the analytic footprint oracle over these exact 20 seeds (observed minimum
# 0.6732 at seed 2) and then frozen with margin.
A2_SEEDS = tuple(range(20))
A2_MIOU_FLOOR = 0.60
A2_INTERIOR_MATCH = 0.99


def _verdict(name: str, passed: bool, detail: str):
    print(f"{name}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"{name}: {detail}"


def test_a1_round_trip_projection():
    rig = default_rig()
    rng = np.random.default_rng(20260809)
    worst_px = 0.0
    worst_rel = 0.0
    t0 = time.perf_counter()
    for view in rig.views:
        intr = view.intrinsics
        us = rng.uniform(0.0, intr.width, 10_000)
        vs = rng.uniform(0.0, intr.height, 10_000)
        ds = rng.uniform(0.1, 500.0, 10_000)
        for u, v, d in zip(us, vs, ds):
            x, y, z = unproject_pixel(u, v, d, intr)
            u2, v2 = project_point(x, y, z, intr)
            worst_px = max(worst_px, abs(u2 - u), abs(v2 - v))
            worst_rel = max(worst_rel, abs(z - d) / d)
    elapsed = time.perf_counter() - t0
    _verdict(
        "A1",
        worst_px < 1e-4 and worst_rel < 1e-9 and elapsed < 1.0,
        f"{4 * 10_000} samples, max pixel err {worst_px:.2e} (<1e-4), "
        f"max depth rel err {worst_rel:.2e} (<1e-9), {elapsed:.2f} s (<1 s)",
    )


def test_a2_end_to_end_oracle_equivalence():
    rig = default_rig()
    grid = BevGrid(256, 15.0)
    t0 = time.perf_counter()
    min_match = 1.0
    min_miou = 1.0
    for seed in A2_SEEDS:
        scene = generate_scene(seed, SceneSpec())
        frames = render_scene(scene, rig)
        cloud = unproject_rig(frames, rig)
        bev = rasterize(cloud, grid, void_id=rig.void_id)
        filled = apply_strategy(bev, FillStrategy())
        gt = render_bev_gt(scene, grid, void_id=rig.void_id)

        interior = ~gt_boundary_mask(gt.cells)
        match = float((filled.cells == gt.cells)[interior].mean())
        miou = mean_iou(confuse(filled, gt, rig.num_classes))
        min_match = min(min_match, match)
        min_miou = min(min_miou, miou)
        assert match >= A2_INTERIOR_MATCH, f"seed {seed}: interior match {match:.5f}"
        assert miou > A2_MIOU_FLOOR, f"seed {seed}: mIoU {miou:.4f}"
    elapsed = time.perf_counter() - t0
    _verdict(
        "A2",
        elapsed < 60.0,
        f"{len(A2_SEEDS)} scenes, min interior match {min_match:.4f} "
        f"(>={A2_INTERIOR_MATCH}), min mIoU {min_miou:.4f} (>{A2_MIOU_FLOOR}), "
        f"{elapsed:.1f} s (<60 s)",
    )


def test_a3_rasterizer_oracle():
    rng = np.random.default_rng(33)
    grid = BevGrid(8, 8.0)
    for trial in range(1000):
        cloud = random_cloud(rng, int(rng.integers(0, 201)))
        bev = rasterize(cloud, grid)
        cells, heights = brute_rasterize(cloud, grid)
        assert np.array_equal(bev.cells, cells), f"trial {trial}: cells differ"
        assert np.array_equal(
            np.nan_to_num(bev.heights, nan=-1.0), np.nan_to_num(heights, nan=-1.0)
        ), f"trial {trial}: heights differ"
    _verdict("A3", True, "1000 random clouds match the brute-force scan bitwise")


def test_a4_fill_oracle():
    rng = np.random.default_rng(44)
    for trial in range(500):
        cells = rng.integers(0, 9, (16, 16)).astype(np.uint8)
        cells[rng.random((16, 16)) < rng.uniform(0.2, 0.98)] = 255
        radius = float(rng.choice([np.inf, 5.0, 2.0]))
        bev = BevMap(BevGrid(16, 16.0), cells, void_id=255)
        strategy = FillStrategy(max_radius=radius)
        filled = fill(bev, strategy)
        want = brute_fill(cells, 255, radius, strategy.default_class)
        assert np.array_equal(filled.cells, want), f"trial {trial}: fill differs"
        assert (filled.cells != 255).all(), f"trial {trial}: void left behind"
        again = fill(filled, strategy)
        assert np.array_equal(again.cells, filled.cells), f"trial {trial}: not idempotent"
    _verdict("A4", True, "500 random maps match the brute-force scan bitwise, "
                         "idempotent, zero void cells")


def test_a5_metric_oracle():
    table = default_class_table()
    grid = BevGrid(2, 2.0)
    gt = BevMap(grid, np.array([[0, 0], [1, 1]], np.uint8))
    pred = BevMap(grid, np.array([[0, 1], [1, 1]], np.uint8))
    cm = confuse(pred, gt, len(table))
    hand_counts = np.zeros((10, 10), np.int64)
    hand_counts[0, 0] = 1
    hand_counts[0, 1] = 1
    hand_counts[1, 1] = 2
    assert np.array_equal(cm.counts, hand_counts)
    from bevseg.metrics import class_iou
    assert class_iou(cm, 0) == 0.5
    assert class_iou(cm, 1) == 2 / 3

    rng = np.random.default_rng(55)
    for _ in range(100):
        cells = rng.integers(0, 9, (12, 12)).astype(np.uint8)
        m = BevMap(BevGrid(12, 12.0), cells)
        assert mean_iou(confuse(m, m, 9)) == 1.0
    _verdict("A5", True, "hand-computed toy matrix exact; 100 self-comparisons "
                         "give mIoU 1.0")


def test_a6_cli_determinism(tmp_path):
    rig_path = tmp_path / "rig.yaml"
    save_rig(default_rig(), rig_path)

    def run(out: Path, workers: int):
        rc = main([
            "run", "--seed", "17", "--out", str(out), "--rig", str(rig_path),
            "--grid-size", "256", "--workers", str(workers),
        ])
        assert rc == 0
        return {
            str(p.relative_to(out)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(out.rglob("*")) if p.is_file()
        }

    digests = {
        "workers=1 run A": run(tmp_path / "w1a", 1),
        "workers=1 run B": run(tmp_path / "w1b", 1),
        "workers=4": run(tmp_path / "w4", 4),
        "workers=8": run(tmp_path / "w8", 8),
    }
    baseline = digests["workers=1 run A"]
    mismatched = [name for name, d in digests.items() if d != baseline]
    _verdict(
        "A6",
        not mismatched,
        f"{len(baseline)} artifacts byte-identical across workers 1/4/8 and reruns"
        if not mismatched else f"differing runs: {mismatched}",
    )


def test_a7_throughput_and_scaling():
    rig = default_rig()
    rng = np.random.default_rng(77)
    frames = []
    for i, view in enumerate(rig.views):
        shape = (view.intrinsics.height, view.intrinsics.width)
        frames.append(ViewFrame(
            view_index=i,
            depth=rng.uniform(0.5, 12.0, shape),
            labels=rng.integers(0, 9, shape).astype(np.uint8),
        ))
    cloud = unproject_rig(frames, rig, workers=1)
    assert cloud.num_points == 4 * 1024 * 576  # ~2.36 M, every pixel valid
    grid = BevGrid(512, 15.0)

    def best_time(workers: int):
        times = []
        result = None
        for _ in range(3):
            t0 = time.perf_counter()
            result = rasterize(cloud, grid, void_id=rig.void_id, workers=workers)
            times.append(time.perf_counter() - t0)
        return min(times), result

    t1, bev1 = best_time(1)
    t4, bev4 = best_time(4)
    identical = np.array_equal(bev1.cells, bev4.cells) and np.array_equal(
        np.nan_to_num(bev1.heights, nan=-1), np.nan_to_num(bev4.heights, nan=-1)
    )
    rate1 = cloud.num_points / t1
    rate4 = cloud.num_points / t4
    speedup = t1 / t4
    cores = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
    print(
        f"A7 throughput: {cloud.num_points} points; "
        f"1 worker {rate1 / 1e6:.1f} M points/s, 4 workers {rate4 / 1e6:.1f} M points/s, "
        f"speedup {speedup:.2f}x on {cores} core(s)"
    )
    scaling_ok = speedup >= 1.8 if cores >= 4 else True
    if cores < 4:
        print(f"A7 note: speedup floor applies on a 4-core machine; "
              f"this host exposes {cores} core(s), so only determinism is asserted")
    _verdict(
        "A7",
        identical and scaling_ok,
        f"completed at {rate1 / 1e6:.1f} M points/s; 4-worker output bitwise identical"
        + (f"; speedup {speedup:.2f}x >= 1.8x" if cores >= 4
           else f"; speedup gate skipped ({cores} core(s) < 4)"),
    )


def test_a8_reader_totality(tmp_path):
    rig_path = tmp_path / "rig.yaml"
    save_rig(default_rig(width=8, height=6), rig_path)
    scene_path = tmp_path / "scene.yaml"
    save_scene(generate_scene(0, SceneSpec(boxes=(), regions=())), scene_path)
    depth_path = tmp_path / "d.bin"
    write_depth(depth_path, np.ones((4, 4), np.float32))
    labels_path = tmp_path / "l.png"
    write_labels(labels_path, np.zeros((4, 4), np.uint8), default_class_table(), 255)
    cloud_path = tmp_path / "c.ply"
    write_cloud(cloud_path, random_cloud(np.random.default_rng(0), 5))

    seeds = [p.read_bytes() for p in (rig_path, scene_path, depth_path,
                                      labels_path, cloud_path)]
    seeds += [b"", b"DEP1", b"BVT1", b"ply\n", b"\x89PNG\r\n\x1a\n"]

    readers = (read_depth, read_depth_png, read_labels, read_cloud,
               read_bev, read_tensor, load_rig, load_scene)
    rng = np.random.default_rng(88)
    path = tmp_path / "fuzz.bin"
    sidecar = tmp_path / "fuzz.bin.yaml"
    crashes = 0
    for i in range(10_000):
        mode = i % 4
        if mode == 0:
            blob = bytes(rng.integers(0, 256, int(rng.integers(0, 150)), dtype=np.uint8))
        elif mode == 1:
            base = seeds[int(rng.integers(0, len(seeds)))]
            blob = base[: int(rng.integers(0, len(base) + 1))]  # truncation
        elif mode == 2:
            base = bytearray(seeds[int(rng.integers(0, len(seeds)))])
            for _ in range(int(rng.integers(1, 8))):  # bit flips
                if base:
                    base[int(rng.integers(0, len(base)))] ^= int(rng.integers(1, 256))
            blob = bytes(base)
        else:
            prefix = seeds[int(rng.integers(0, len(seeds)))][:4]
            blob = prefix + bytes(rng.integers(0, 256, int(rng.integers(0, 100)),
                                               dtype=np.uint8))
        path.write_bytes(blob)
        if i % 3 == 0:
            sidecar.write_bytes(bytes(rng.integers(0, 256, 40, dtype=np.uint8)))
        elif sidecar.exists() and i % 3 == 1:
            sidecar.unlink()
        for reader in readers:
            try:
                reader(path)
            except (BevSegError, FileNotFoundError):
                pass
            except Exception as exc:  # any other escape is a totality failure
                crashes += 1
                print(f"A8 escape: {reader.__name__} raised {type(exc).__name__}: {exc}")
    _verdict(
        "A8",
        crashes == 0,
        "10000 adversarial byte strings produced only structured errors "
        f"across {len(readers)} readers" if crashes == 0 else f"{crashes} escapes",
    )
