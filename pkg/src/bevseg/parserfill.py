"""Void completion and smoothing of BEV rasters.

fill() guarantees the output contains no void cells (the completed map's
contract): every void cell takes the class of its nearest non-void cell by
Euclidean cell-center distance, with distance ties going to the smaller
class id. Cells farther than max_radius, and entirely-void inputs, fall
back to a configurable default class.

Distances are compared as exact squared integers, so the result is
identical to a brute-force scan over all non-void cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .bevraster import BevMap
from .errors import InvalidConfigError, InvalidInputError

__all__ = ["FillStrategy", "fill", "majority_smooth", "apply_strategy"]

DEFAULT_FILL_CLASS = 5  # Roads in the bundled class table


@dataclass(frozen=True)
class FillStrategy:
    kind: str = "nearest_neighbor"
    max_radius: float = np.inf
    default_class: int = DEFAULT_FILL_CLASS
    smooth: int | None = None

    def __post_init__(self):
        if self.kind not in ("nearest_neighbor", "none"):
            raise InvalidConfigError(f"unknown fill kind {self.kind!r}")
        if not self.max_radius >= 0:
            raise InvalidConfigError(f"max_radius must be >= 0, got {self.max_radius}")
        if self.smooth is not None and (self.smooth < 1 or self.smooth % 2 == 0):
            raise InvalidConfigError(
                f"smooth kernel must be odd and positive, got {self.smooth}"
            )


def _nearest_fill(bev: BevMap, max_radius: float, default_class: int) -> BevMap:
    cells = bev.cells
    void = cells == bev.void_id
    if not void.any():
        return bev
    out = cells.copy()
    if void.all():
        out[:] = default_class
        return BevMap(grid=bev.grid, cells=out, void_id=bev.void_id)

    # Per class: exact squared Euclidean distance from every cell to the
    # nearest cell of that class. Taking the per-cell argmin over classes in
    # ascending id order realizes the smaller-id tie rule exactly.
    max_d2 = max_radius * max_radius
    best_d2 = np.full(cells.shape, np.inf)
    best_class = np.full(cells.shape, default_class, dtype=np.uint8)
    for class_id in np.unique(cells[~void]):
        dist = ndimage.distance_transform_edt(cells != class_id)
        d2 = np.rint(dist * dist)
        closer = void & (d2 < best_d2)
        best_d2[closer] = d2[closer]
        best_class[closer] = class_id
    reachable = void & (best_d2 <= max_d2)
    out[reachable] = best_class[reachable]
    out[void & ~reachable] = default_class
    return BevMap(grid=bev.grid, cells=out, void_id=bev.void_id)


def fill(bev: BevMap, strategy: FillStrategy) -> BevMap:
    """Complete a BEV raster according to the strategy; non-void cells never change."""
    if strategy.kind == "none":
        return bev
    return _nearest_fill(bev, strategy.max_radius, strategy.default_class)


def majority_smooth(bev: BevMap, kernel: int) -> BevMap:
    """Replace each cell with the modal class of its kernel x kernel window.

    Windows truncate at the borders. Mode ties keep the cell's own class
    when it is among the modes, otherwise take the smallest tied class id.
    The input must already be void-free (run fill first).
    """
    if kernel < 1 or kernel % 2 == 0:
        raise InvalidConfigError(f"kernel must be odd and positive, got {kernel}")
    cells = bev.cells
    if (cells == bev.void_id).any():
        raise InvalidInputError("majority_smooth requires a void-free map")
    if kernel == 1:
        return bev

    half = kernel // 2
    h, w = cells.shape
    present = np.unique(cells)
    counts = np.empty((h, w, present.size), dtype=np.int64)
    for i, class_id in enumerate(present):
        # Windowed count via a zero-padded 2-D prefix sum (exact integers).
        ones = (cells == class_id).astype(np.int64)
        acc = np.zeros((h + 1, w + 1), dtype=np.int64)
        np.cumsum(np.cumsum(ones, axis=0), axis=1, out=acc[1:, 1:])
        r0 = np.clip(np.arange(h) - half, 0, h)
        r1 = np.clip(np.arange(h) + half + 1, 0, h)
        c0 = np.clip(np.arange(w) - half, 0, w)
        c1 = np.clip(np.arange(w) + half + 1, 0, w)
        counts[:, :, i] = (
            acc[np.ix_(r1, c1)] - acc[np.ix_(r0, c1)]
            - acc[np.ix_(r1, c0)] + acc[np.ix_(r0, c0)]
        )

    top = counts.max(axis=2)
    is_mode = counts == top[:, :, None]
    # Channel order is ascending class id, so argmax picks the smallest mode.
    smallest_mode = present[np.argmax(is_mode, axis=2)].astype(np.uint8)
    own_channel = np.searchsorted(present, cells)
    own_is_mode = np.take_along_axis(is_mode, own_channel[:, :, None], axis=2)[:, :, 0]
    out = np.where(own_is_mode, cells, smallest_mode)
    return BevMap(grid=bev.grid, cells=out, void_id=bev.void_id)


def apply_strategy(bev: BevMap, strategy: FillStrategy) -> BevMap:
    """fill(), then the optional majority smooth, as one pipeline stage."""
    out = fill(bev, strategy)
    if strategy.smooth is not None:
        out = majority_smooth(out, strategy.smooth)
    return out
