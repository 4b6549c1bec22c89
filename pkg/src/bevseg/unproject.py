"""Depth + label maps to semantic point clouds in the vehicle frame.

The geometric core: each pixel (u, v) with depth d unprojects to camera
coordinates

    z = d
    x = (u - c_u) * z / f_u
    y = (v - c_v) * z / f_v

then rotates into the vehicle frame. Per-point provenance (view index and
source pixel) is kept so that downstream tie-breaking is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidStateError
from .rig import CameraIntrinsics, Extrinsics, RigConfig

__all__ = [
    "ViewFrame",
    "SemanticPointCloud",
    "unproject_pixel",
    "project_point",
    "unproject_view",
    "to_vehicle",
    "fuse",
    "DEFAULT_MAX_RANGE",
]

DEFAULT_MAX_RANGE = 1000.0


@dataclass(frozen=True)
class ViewFrame:
    """Depth map (meters) and label map (class ids) for one camera view.

    Depth 0 is the no-hit sentinel; depths outside (0, max_range) produce
    no points when unprojected.
    """

    view_index: int
    depth: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float64)
        labels = np.asarray(self.labels)
        if depth.ndim != 2 or depth.shape != labels.shape:
            raise InvalidInputError(
                f"depth {depth.shape} and labels {labels.shape} must be equal 2-D shapes"
            )
        if not np.issubdtype(labels.dtype, np.integer):
            raise InvalidInputError(f"labels must be integers, got {labels.dtype}")
        depth.setflags(write=False)
        labels = labels.astype(np.uint8, copy=True)
        labels.setflags(write=False)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class SemanticPointCloud:
    """Flat arrays of (x, y, z, class) points plus per-point provenance.

    frame is "camera" or "vehicle". Points are ordered by view, then
    row-major source pixel; that order is the tie-break key downstream.
    """

    frame: str
    xyz: np.ndarray          # (K, 3) float64, meters
    class_ids: np.ndarray    # (K,) uint8
    view_indices: np.ndarray  # (K,) uint16
    pixel_uv: np.ndarray     # (K, 2) int32, source (u, v)

    def __post_init__(self):
        if self.frame not in ("camera", "vehicle"):
            raise InvalidInputError(f"frame must be camera or vehicle, got {self.frame!r}")
        xyz = np.ascontiguousarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        k = xyz.shape[0]
        cls = np.ascontiguousarray(self.class_ids, dtype=np.uint8)
        views = np.ascontiguousarray(self.view_indices, dtype=np.uint16)
        uv = np.ascontiguousarray(self.pixel_uv, dtype=np.int32).reshape(-1, 2)
        if cls.shape != (k,) or views.shape != (k,) or uv.shape != (k, 2):
            raise InvalidInputError("point attribute arrays disagree on length")
        if not np.all(np.isfinite(xyz)):
            raise InvalidInputError("point coordinates must be finite")
        for arr in (xyz, cls, views, uv):
            arr.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "class_ids", cls)
        object.__setattr__(self, "view_indices", views)
        object.__setattr__(self, "pixel_uv", uv)

    @property
    def num_points(self) -> int:
        return self.xyz.shape[0]


def empty_cloud(frame: str = "vehicle") -> SemanticPointCloud:
    return SemanticPointCloud(
        frame=frame,
        xyz=np.zeros((0, 3)),
        class_ids=np.zeros(0, dtype=np.uint8),
        view_indices=np.zeros(0, dtype=np.uint16),
        pixel_uv=np.zeros((0, 2), dtype=np.int32),
    )


def unproject_pixel(u: float, v: float, d: float, intr: CameraIntrinsics):
    """Pixel + depth to camera-frame (x, y, z) in meters."""
    if not (math.isfinite(d) and d > 0):
        raise InvalidInputError(f"depth must be positive and finite, got {d}")
    x = (u - intr.c_u) * d / intr.f_u
    y = (v - intr.c_v) * d / intr.f_v
    return x, y, d


def project_point(x: float, y: float, z: float, intr: CameraIntrinsics):
    """Camera-frame point to pixel (u, v); the forward pinhole map."""
    if not (math.isfinite(z) and z > 0):
        raise InvalidInputError(f"point is behind the camera (z = {z})")
    u = intr.f_u * x / z + intr.c_u
    v = intr.f_v * y / z + intr.c_v
    return u, v


def unproject_view(
    frame: ViewFrame,
    rig: RigConfig,
    max_range: float = DEFAULT_MAX_RANGE,
    half_pixel: bool = False,
) -> SemanticPointCloud:
    """Unproject every valid pixel of one view into a camera-frame cloud.

    A pixel is valid when 0 < depth < max_range and its label is semantic
    (not void). Points come out in row-major pixel order. Integer (u, v)
    address pixel centers; half_pixel=True shifts the grid by +0.5 px for
    data whose convention puts centers between integer coordinates.
    """
    if not 0 <= frame.view_index < len(rig.views):
        raise InvalidInputError(
            f"view index {frame.view_index} not in rig with {len(rig.views)} views"
        )
    intr = rig.views[frame.view_index].intrinsics
    if frame.depth.shape != (intr.height, intr.width):
        raise InvalidInputError(
            f"frame is {frame.depth.shape}, intrinsics expect "
            f"({intr.height}, {intr.width})"
        )
    labels = frame.labels
    bad = (labels >= rig.num_classes) & (labels != rig.void_id)
    if bad.any():
        raise InvalidInputError(
            f"labels contain values outside the class table: "
            f"{np.unique(labels[bad]).tolist()}"
        )

    depth = frame.depth
    valid = (
        np.isfinite(depth)
        & (depth > 0)
        & (depth < max_range)
        & (labels != rig.void_id)
    )
    vs, us = np.nonzero(valid)
    d = depth[vs, us]
    shift = 0.5 if half_pixel else 0.0
    x = (us + shift - intr.c_u) * d / intr.f_u
    y = (vs + shift - intr.c_v) * d / intr.f_v
    return SemanticPointCloud(
        frame="camera",
        xyz=np.stack([x, y, d], axis=1),
        class_ids=labels[vs, us],
        view_indices=np.full(d.shape[0], frame.view_index, dtype=np.uint16),
        pixel_uv=np.stack([us, vs], axis=1).astype(np.int32),
    )


def to_vehicle(cloud: SemanticPointCloud, ext: Extrinsics) -> SemanticPointCloud:
    """Apply p -> R p + t to every point; classes and provenance unchanged."""
    if cloud.frame != "camera":
        raise InvalidStateError("to_vehicle expects a camera-frame cloud")
    return SemanticPointCloud(
        frame="vehicle",
        xyz=cloud.xyz @ ext.rotation.T + ext.translation,
        class_ids=cloud.class_ids,
        view_indices=cloud.view_indices,
        pixel_uv=cloud.pixel_uv,
    )


def fuse(clouds) -> SemanticPointCloud:
    """Concatenate vehicle-frame clouds, preserving input order."""
    clouds = list(clouds)
    for c in clouds:
        if c.frame != "vehicle":
            raise InvalidInputError("fuse expects vehicle-frame clouds only")
    if not clouds:
        return empty_cloud("vehicle")
    return SemanticPointCloud(
        frame="vehicle",
        xyz=np.concatenate([c.xyz for c in clouds]),
        class_ids=np.concatenate([c.class_ids for c in clouds]),
        view_indices=np.concatenate([c.view_indices for c in clouds]),
        pixel_uv=np.concatenate([c.pixel_uv for c in clouds]),
    )


def unproject_rig(
    frames, rig: RigConfig, max_range: float = DEFAULT_MAX_RANGE, workers: int = 1
) -> SemanticPointCloud:
    """Unproject a list of ViewFrames (one per rig view) and fuse them.

    Worker count changes only wall time, never the result.
    """
    from .parallel import map_workers

    def one(frame: ViewFrame) -> SemanticPointCloud:
        cam = unproject_view(frame, rig, max_range)
        return to_vehicle(cam, rig.views[frame.view_index].extrinsics)

    return fuse(map_workers(one, list(frames), workers))
