"""Brute-force reference implementations used by the tests.

These deliberately share no code with the package: plain per-cell and
per-point scans that are slow but obviously correct.
"""

import numpy as np


def brute_rasterize(cloud, grid, void_id=255):
    """Per-point scan keeping the (min z, min index) winner of every cell."""
    width = grid.width_px
    res = grid.resolution
    half = grid.extent / 2.0
    cells = np.full((width, width), void_id, np.uint8)
    heights = np.full((width, width), np.nan)
    best = {}
    for i in range(cloud.num_points):
        x, y, z = cloud.xyz[i]
        row = int(np.floor((half - x) / res))
        col = int(np.floor((y + half) / res))
        if not (0 <= row < width and 0 <= col < width):
            continue
        key = (row, col)
        if key not in best or (z, i) < best[key]:
            best[key] = (z, i)
    for (row, col), (z, i) in best.items():
        cells[row, col] = cloud.class_ids[i]
        heights[row, col] = z
    return cells, heights


def brute_fill(cells, void_id, max_radius, default_class):
    """Per-void-cell scan over every non-void cell."""
    h, w = cells.shape
    out = cells.copy()
    non_void = [(r, c) for r in range(h) for c in range(w) if cells[r, c] != void_id]
    for r in range(h):
        for c in range(w):
            if cells[r, c] != void_id:
                continue
            if not non_void:
                out[r, c] = default_class
                continue
            best_d2 = None
            best_cls = None
            for rr, cc in non_void:
                d2 = (rr - r) ** 2 + (cc - c) ** 2
                cls = int(cells[rr, cc])
                if best_d2 is None or d2 < best_d2 or (d2 == best_d2 and cls < best_cls):
                    best_d2, best_cls = d2, cls
            out[r, c] = best_cls if best_d2 <= max_radius * max_radius else default_class
    return out


def brute_majority_smooth(cells, kernel):
    """Per-cell histogram recount over the truncated window."""
    h, w = cells.shape
    half = kernel // 2
    out = cells.copy()
    for r in range(h):
        for c in range(w):
            window = cells[max(0, r - half):r + half + 1,
                           max(0, c - half):c + half + 1].ravel()
            values, counts = np.unique(window, return_counts=True)
            modes = values[counts == counts.max()]
            out[r, c] = cells[r, c] if cells[r, c] in modes else modes.min()
    return out


def gt_boundary_mask(cells):
    """Cells within Chebyshev distance 1 of a class change."""
    h, w = cells.shape
    near_change = np.zeros((h, w), bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            shifted = np.full((h, w), -1, np.int32)
            rs = slice(max(0, dr), h + min(0, dr))
            cs = slice(max(0, dc), w + min(0, dc))
            rs_src = slice(max(0, -dr), h + min(0, -dr))
            cs_src = slice(max(0, -dc), w + min(0, -dc))
            shifted[rs, cs] = cells[rs_src, cs_src]
            near_change |= (shifted >= 0) & (shifted != cells)
    return near_change


def random_cloud(rng, count, span=5.0, heights=(0.0, 0.5, 1.0, 2.0), num_classes=9):
    """Random vehicle-frame cloud with deliberately colliding heights."""
    from bevseg.unproject import SemanticPointCloud

    xyz = np.stack(
        [
            rng.uniform(-span, span, count),
            rng.uniform(-span, span, count),
            rng.choice(np.asarray(heights, dtype=np.float64), count),
        ],
        axis=1,
    )
    return SemanticPointCloud(
        frame="vehicle",
        xyz=xyz,
        class_ids=rng.integers(0, num_classes, count).astype(np.uint8),
        view_indices=np.zeros(count, np.uint16),
        pixel_uv=np.zeros((count, 2), np.int32),
    )
