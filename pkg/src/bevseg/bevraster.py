"""Orthographic projection of fused clouds onto the BEV raster.

Grid orientation: vehicle +x maps to image up (decreasing row), vehicle +y
to image right (increasing column), ego at the raster center:

    row = floor((extent/2 - x) / resolution)
    col = floor((y + extent/2) / resolution)

Projection conflicts resolve to the point of lowest vehicle-frame height z;
equal heights resolve to the smallest fused-cloud index. Cells that receive
no point hold the void id. The same winner is found regardless of how the
points are chunked across workers, so rasterization is bitwise
deterministic for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, InvalidStateError
from .parallel import chunk_ranges, map_workers
from .rig import DEFAULT_VOID_ID
from .unproject import SemanticPointCloud

__all__ = [
    "BevGrid",
    "BevMap",
    "BevTensor",
    "world_to_cell",
    "rasterize",
    "one_hot",
    "map_from_one_hot",
    "resample_nearest",
]

_NO_POINT = np.iinfo(np.int64).max


@dataclass(frozen=True)
class BevGrid:
    """Square, ego-centered metric grid: width_px cells spanning extent meters."""

    width_px: int
    extent: float

    def __post_init__(self):
        if self.width_px < 1:
            raise InvalidConfigError(f"width_px must be >= 1, got {self.width_px}")
        if not self.extent > 0:
            raise InvalidConfigError(f"extent must be positive, got {self.extent}")

    @property
    def resolution(self) -> float:
        """Meters per pixel."""
        return self.extent / self.width_px

    def cell_centers(self):
        """Vehicle-frame (x, y) of every cell center, as two (H, W) arrays."""
        half = self.extent / 2.0
        res = self.resolution
        rows = np.arange(self.width_px)
        cols = np.arange(self.width_px)
        x = half - (rows + 0.5) * res
        y = (cols + 0.5) * res - half
        return np.broadcast_to(x[:, None], (self.width_px, self.width_px)), \
            np.broadcast_to(y[None, :], (self.width_px, self.width_px))


@dataclass(frozen=True)
class BevMap:
    """H x W raster of class ids; void_id marks cells no point reached.

    heights holds the winning point's vehicle z per cell (NaN where void);
    it is diagnostic and may be None for maps that were not rasterized.
    """

    grid: BevGrid
    cells: np.ndarray
    void_id: int = DEFAULT_VOID_ID
    heights: np.ndarray | None = None

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        expected = (self.grid.width_px, self.grid.width_px)
        if cells.shape != expected:
            raise InvalidInputError(f"cells shape {cells.shape} != grid {expected}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        if self.heights is not None:
            heights = np.ascontiguousarray(self.heights, dtype=np.float64)
            if heights.shape != expected:
                raise InvalidInputError(
                    f"heights shape {heights.shape} != grid {expected}"
                )
            heights.setflags(write=False)
            object.__setattr__(self, "heights", heights)


@dataclass(frozen=True)
class BevTensor:
    """One-hot expansion of a BevMap: (H, W, C+1) with void as channel C."""

    data: np.ndarray
    num_classes: int

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if data.ndim != 3 or data.shape[2] != self.num_classes + 1:
            raise InvalidInputError(
                f"tensor shape {data.shape} does not match C={self.num_classes}"
            )
        if data.max(initial=0) > 1 or not np.all(data.sum(axis=2, dtype=np.int64) == 1):
            raise InvalidInputError("tensor fibers must be one-hot")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)


def world_to_cell(x: float, y: float, grid: BevGrid):
    """Vehicle ground coordinates to (row, col), or None when off-grid."""
    res = grid.resolution
    half = grid.extent / 2.0
    row = int(np.floor((half - x) / res))
    col = int(np.floor((y + half) / res))
    if 0 <= row < grid.width_px and 0 <= col < grid.width_px:
        return row, col
    return None


def _cells_for_points(x: np.ndarray, y: np.ndarray, grid: BevGrid):
    """Vectorized world_to_cell: flat cell index per point, -1 when off-grid."""
    res = grid.resolution
    half = grid.extent / 2.0
    rows = np.floor((half - x) / res)
    cols = np.floor((y + half) / res)
    inside = (rows >= 0) & (rows < grid.width_px) & (cols >= 0) & (cols < grid.width_px)
    flat = np.where(inside, rows * grid.width_px + cols, -1.0)
    return flat.astype(np.int64), inside


def _rasterize_chunk(xyz, grid, start, stop):
    """Per-cell (min z, min index) winners over points[start:stop].

    Returns dense (H*W,) arrays: winning z (inf where empty) and winning
    fused-cloud index (_NO_POINT where empty).
    """
    n_cells = grid.width_px * grid.width_px
    x = xyz[start:stop, 0]
    y = xyz[start:stop, 1]
    z = xyz[start:stop, 2]
    cell, inside = _cells_for_points(x, y, grid)
    cell = cell[inside]
    z = z[inside]
    idx = (np.flatnonzero(inside) + start).astype(np.int64)

    best_z = np.full(n_cells, np.inf)
    np.minimum.at(best_z, cell, z)
    on_min = z == best_z[cell]
    best_idx = np.full(n_cells, _NO_POINT, dtype=np.int64)
    np.minimum.at(best_idx, cell[on_min], idx[on_min])
    return best_z, best_idx


def _merge_partials(partials):
    best_z, best_idx = partials[0]
    for z, idx in partials[1:]:
        take = (z < best_z) | ((z == best_z) & (idx < best_idx))
        best_z = np.where(take, z, best_z)
        best_idx = np.where(take, idx, best_idx)
    return best_z, best_idx


def rasterize(
    cloud: SemanticPointCloud,
    grid: BevGrid,
    void_id: int = DEFAULT_VOID_ID,
    workers: int = 1,
) -> BevMap:
    """Project a vehicle-frame cloud down onto the grid.

    Each in-range point lands in the cell under its (x, y); the cell takes
    the class of its lowest point (ties to the smallest fused index).
    """
    if cloud.frame != "vehicle":
        raise InvalidStateError("rasterize expects a vehicle-frame cloud")
    if workers < 1:
        raise InvalidConfigError(f"worker count must be >= 1, got {workers}")

    shape = (grid.width_px, grid.width_px)
    n_cells = grid.width_px * grid.width_px
    spans = chunk_ranges(cloud.num_points, workers)
    partials = map_workers(
        lambda span: _rasterize_chunk(cloud.xyz, grid, *span), spans, workers
    )
    if partials:
        best_z, best_idx = _merge_partials(partials)
    else:
        best_z = np.full(n_cells, np.inf)
        best_idx = np.full(n_cells, _NO_POINT, dtype=np.int64)

    occupied = best_idx != _NO_POINT
    cells = np.full(shape, void_id, dtype=np.uint8).ravel()
    cells[occupied] = cloud.class_ids[best_idx[occupied]]
    heights = np.full(shape, np.nan).ravel()
    heights[occupied] = best_z[occupied]
    return BevMap(
        grid=grid,
        cells=cells.reshape(shape),
        void_id=void_id,
        heights=heights.reshape(shape),
    )


def one_hot(bev: BevMap, num_classes: int) -> BevTensor:
    """Expand class ids to one-hot channels; void becomes channel num_classes."""
    cells = bev.cells
    bad = (cells >= num_classes) & (cells != bev.void_id)
    if bad.any():
        raise InvalidInputError(
            f"cells contain ids outside [0, {num_classes}) + void: "
            f"{np.unique(cells[bad]).tolist()}"
        )
    channel = np.where(cells == bev.void_id, num_classes, cells)
    data = np.zeros((*cells.shape, num_classes + 1), dtype=np.uint8)
    rows, cols = np.indices(cells.shape)
    data[rows, cols, channel] = 1
    return BevTensor(data=data, num_classes=num_classes)


def map_from_one_hot(tensor: BevTensor, grid: BevGrid, void_id: int = DEFAULT_VOID_ID) -> BevMap:
    """Inverse of one_hot: argmax over channels, channel C back to void_id."""
    channel = np.argmax(tensor.data, axis=2)
    cells = np.where(channel == tensor.num_classes, void_id, channel).astype(np.uint8)
    return BevMap(grid=grid, cells=cells, void_id=void_id)


def resample_nearest(bev: BevMap, width_px: int) -> BevMap:
    """Nearest-neighbor resample to a new raster size over the same extent."""
    if width_px < 1:
        raise InvalidConfigError(f"width_px must be >= 1, got {width_px}")
    src = np.floor((np.arange(width_px) + 0.5) * bev.grid.width_px / width_px)
    src = np.clip(src.astype(np.int64), 0, bev.grid.width_px - 1)
    grid = BevGrid(width_px=width_px, extent=bev.grid.extent)
    heights = None
    if bev.heights is not None:
        heights = bev.heights[np.ix_(src, src)]
    return BevMap(
        grid=grid, cells=bev.cells[np.ix_(src, src)], void_id=bev.void_id, heights=heights
    )
