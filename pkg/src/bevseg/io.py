"""Bit-exact readers and writers for every stage boundary.

Formats (full byte layouts in docs/formats.md):

  depth raster   .bin   12-byte header (magic "DEP1", u32 width, u32 height,
                        little-endian) + row-major float32 meters
  depth ingest   .png   16-bit grayscale PNG, millimeters, units declared
                        in a YAML sidecar
  label raster   .png   8-bit grayscale PNG of class ids + YAML sidecar
                        naming the class table and void id
  point cloud    .ply   binary little-endian PLY, 19-byte records:
                        float x, y, z; uchar class; ushort view;
                        uint pixel_index (= v * 65536 + u)
  BEV map        .png   label raster whose sidecar adds the metric grid
  one-hot tensor .bin   header (magic "BVT1", u32 height, width, channels)
                        + row-major channel-last uint8

Readers are total: arbitrary input bytes produce FileNotFoundError or a
FileFormatError subclass, never a crash. Sidecars live at "<path>.yaml".
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import yaml
from PIL import Image

from .bevraster import BevGrid, BevMap, BevTensor
from .errors import (
    BevSegError,
    InvalidLabelError,
    MalformedFileError,
    TruncatedFileError,
)
from .rig import ClassDef
from .unproject import SemanticPointCloud

__all__ = [
    "read_depth", "write_depth",
    "read_depth_png", "write_depth_png",
    "read_labels", "write_labels",
    "read_cloud", "write_cloud",
    "read_bev", "write_bev",
    "read_tensor", "write_tensor",
    "colorize", "write_color_png",
]

DEPTH_MAGIC = b"DEP1"
TENSOR_MAGIC = b"BVT1"

_PLY_PROPERTIES = (
    "property float x",
    "property float y",
    "property float z",
    "property uchar class",
    "property ushort view",
    "property uint pixel_index",
)
_PLY_DTYPE = np.dtype(
    [
        ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
        ("cls", "u1"), ("view", "<u2"), ("pix", "<u4"),
    ]
)


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".yaml")


def _load_sidecar(path) -> dict:
    raw = _sidecar_path(path).read_bytes()
    try:
        data = yaml.safe_load(raw.decode("utf-8"))
    except (yaml.YAMLError, UnicodeDecodeError) as exc:
        raise MalformedFileError(f"sidecar of {path}: not valid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise MalformedFileError(f"sidecar of {path}: top level must be a mapping")
    return data


# ---------------------------------------------------------------- depth .bin

def write_depth(path, depth: np.ndarray) -> None:
    arr = np.ascontiguousarray(depth, dtype="<f4")
    if arr.ndim != 2:
        raise MalformedFileError(f"depth raster must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    header = DEPTH_MAGIC + struct.pack("<II", w, h)
    Path(path).write_bytes(header + arr.tobytes(order="C"))


def read_depth(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise TruncatedFileError(f"{path}: shorter than the 12-byte header")
    if blob[:4] != DEPTH_MAGIC:
        raise MalformedFileError(f"{path}: bad magic {blob[:4]!r}")
    w, h = struct.unpack("<II", blob[4:12])
    if w == 0 or h == 0:
        raise MalformedFileError(f"{path}: zero dimension {w}x{h}")
    expected = 12 + 4 * w * h
    if len(blob) < expected:
        raise TruncatedFileError(
            f"{path}: payload holds {len(blob) - 12} bytes, header declares {4 * w * h}"
        )
    if len(blob) > expected:
        raise MalformedFileError(f"{path}: {len(blob) - expected} trailing bytes")
    return np.frombuffer(blob, dtype="<f4", offset=12).reshape(h, w).copy()


# ---------------------------------------------------------------- depth .png

def write_depth_png(path, depth_m: np.ndarray) -> None:
    """16-bit millimeter PNG; quantizes to 1 mm and saturates at 65.535 m."""
    mm = np.rint(np.asarray(depth_m, dtype=np.float64) * 1000.0)
    mm = np.clip(mm, 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(Path(path), format="PNG")  # infers 16-bit grayscale
    _sidecar_path(path).write_text(
        yaml.safe_dump({"kind": "depth", "units": "millimeters"}, sort_keys=False),
        encoding="utf-8",
    )


def _open_png(path, expect_modes) -> np.ndarray:
    blob = Path(path).read_bytes()
    import io as _io

    try:
        with Image.open(_io.BytesIO(blob)) as img:
            img.load()
            mode = img.mode
            arr = np.asarray(img)
    except BevSegError:
        raise
    except Exception as exc:  # Pillow raises a zoo of types on corrupt bytes
        raise MalformedFileError(f"{path}: not a decodable PNG ({exc})") from exc
    if mode not in expect_modes:
        raise MalformedFileError(
            f"{path}: expected PNG mode in {expect_modes}, got {mode}"
        )
    return arr


def read_depth_png(path) -> np.ndarray:
    """Read a 16-bit millimeter PNG (with sidecar) into float64 meters."""
    meta = _load_sidecar(path)
    if meta.get("kind") != "depth" or meta.get("units") != "millimeters":
        raise MalformedFileError(f"sidecar of {path}: not a millimeter depth map")
    arr = _open_png(path, ("I;16", "I"))
    return arr.astype(np.float64) / 1000.0


# --------------------------------------------------------------- labels .png

def _classes_to_meta(class_table) -> list:
    return [
        {"id": c.class_id, "name": c.name, "color": list(c.color)}
        for c in class_table
    ]


def _classes_from_meta(meta, path) -> tuple:
    entries = meta.get("classes")
    if not isinstance(entries, list) or not entries:
        raise MalformedFileError(f"sidecar of {path}: missing class table")
    table = []
    for entry in entries:
        try:
            table.append(
                ClassDef(
                    class_id=int(entry["id"]),
                    name=str(entry["name"]),
                    color=tuple(int(c) for c in entry["color"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFileError(
                f"sidecar of {path}: bad class entry {entry!r}"
            ) from exc
    return tuple(table)


def write_labels(path, labels: np.ndarray, class_table, void_id: int) -> None:
    arr = np.ascontiguousarray(labels, dtype=np.uint8)
    if arr.ndim != 2:
        raise MalformedFileError(f"label raster must be 2-D, got shape {arr.shape}")
    Image.fromarray(arr, mode="L").save(Path(path), format="PNG")
    meta = {
        "kind": "labels",
        "void_id": int(void_id),
        "classes": _classes_to_meta(class_table),
    }
    _sidecar_path(path).write_text(yaml.safe_dump(meta, sort_keys=False), encoding="utf-8")


def _read_label_png(path):
    meta = _load_sidecar(path)
    if meta.get("kind") not in ("labels", "bev"):
        raise MalformedFileError(f"sidecar of {path}: kind is not labels/bev")
    void_id = meta.get("void_id")
    if not isinstance(void_id, int):
        raise MalformedFileError(f"sidecar of {path}: missing integer void_id")
    table = _classes_from_meta(meta, path)
    arr = _open_png(path, ("L",)).astype(np.uint8)
    valid = {c.class_id for c in table} | {void_id}
    values = set(np.unique(arr).tolist())
    if not values <= valid:
        raise InvalidLabelError(
            f"{path}: values {sorted(values - valid)} outside the class table"
        )
    return arr, table, void_id, meta


def read_labels(path):
    """Returns (labels, class_table, void_id)."""
    arr, table, void_id, _ = _read_label_png(path)
    return arr, table, void_id


# ---------------------------------------------------------------- cloud .ply

def write_cloud(path, cloud: SemanticPointCloud) -> None:
    uv = cloud.pixel_uv
    if uv.size and (uv.min() < 0 or uv.max() > 65535):
        raise MalformedFileError("pixel coordinates must fit in 16 bits for PLY export")
    k = cloud.num_points
    header = "\n".join(
        [
            "ply",
            "format binary_little_endian 1.0",
            f"comment frame {cloud.frame}",
            f"element vertex {k}",
            *_PLY_PROPERTIES,
            "end_header",
        ]
    ) + "\n"
    records = np.empty(k, dtype=_PLY_DTYPE)
    records["x"] = cloud.xyz[:, 0].astype("<f4")
    records["y"] = cloud.xyz[:, 1].astype("<f4")
    records["z"] = cloud.xyz[:, 2].astype("<f4")
    records["cls"] = cloud.class_ids
    records["view"] = cloud.view_indices
    records["pix"] = (
        uv[:, 1].astype(np.uint32) * np.uint32(65536) + uv[:, 0].astype(np.uint32)
    )
    Path(path).write_bytes(header.encode("ascii") + records.tobytes())


def read_cloud(path) -> SemanticPointCloud:
    blob = Path(path).read_bytes()
    end = blob.find(b"end_header\n")
    if end < 0:
        raise MalformedFileError(f"{path}: no PLY end_header")
    try:
        header_lines = blob[:end].decode("ascii").splitlines()
    except UnicodeDecodeError as exc:
        raise MalformedFileError(f"{path}: header is not ASCII") from exc
    payload = blob[end + len(b"end_header\n"):]

    if not header_lines or header_lines[0] != "ply":
        raise MalformedFileError(f"{path}: missing ply magic line")
    frame = None
    count = None
    properties = []
    for line in header_lines[1:]:
        if line.startswith("comment frame "):
            frame = line[len("comment frame "):].strip()
        elif line.startswith("comment") or line.startswith("obj_info"):
            continue
        elif line == "format binary_little_endian 1.0":
            continue
        elif line.startswith("element vertex "):
            try:
                count = int(line[len("element vertex "):])
            except ValueError as exc:
                raise MalformedFileError(f"{path}: bad vertex count line") from exc
        elif line.startswith("element "):
            raise MalformedFileError(f"{path}: unsupported element {line!r}")
        elif line.startswith("property "):
            properties.append(line)
        else:
            raise MalformedFileError(f"{path}: unrecognized header line {line!r}")
    if count is None or tuple(properties) != _PLY_PROPERTIES:
        raise MalformedFileError(f"{path}: header does not match the cloud schema")
    if frame not in ("camera", "vehicle"):
        raise MalformedFileError(f"{path}: header must declare frame camera|vehicle")
    if count < 0:
        raise MalformedFileError(f"{path}: negative vertex count")
    expected = count * _PLY_DTYPE.itemsize
    if len(payload) < expected:
        raise TruncatedFileError(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
        )
    if len(payload) > expected:
        raise MalformedFileError(f"{path}: {len(payload) - expected} trailing bytes")

    records = np.frombuffer(payload, dtype=_PLY_DTYPE)
    pix = records["pix"]
    u = (pix % 65536).astype(np.int32)
    v = (pix // 65536).astype(np.int32)
    try:
        return SemanticPointCloud(
            frame=frame,
            xyz=np.stack(
                [records["x"], records["y"], records["z"]], axis=1
            ).astype(np.float64),
            class_ids=records["cls"].copy(),
            view_indices=records["view"].copy(),
            pixel_uv=np.stack([u, v], axis=1),
        )
    except BevSegError as exc:
        raise MalformedFileError(f"{path}: {exc}") from exc


# ------------------------------------------------------------------ BEV .png

def write_bev(path, bev: BevMap, class_table, with_heights: bool = False) -> None:
    """Label PNG + sidecar with the metric grid; heights go to a sibling .bin."""
    arr = bev.cells
    Image.fromarray(arr, mode="L").save(Path(path), format="PNG")
    meta = {
        "kind": "bev",
        "void_id": int(bev.void_id),
        "grid": {"width_px": int(bev.grid.width_px), "extent": float(bev.grid.extent)},
        "classes": _classes_to_meta(class_table),
    }
    heights_path = Path(str(path) + ".heights.bin")
    if with_heights and bev.heights is not None:
        write_depth(heights_path, bev.heights)
        meta["heights"] = heights_path.name
    _sidecar_path(path).write_text(yaml.safe_dump(meta, sort_keys=False), encoding="utf-8")


def read_bev(path):
    """Returns (BevMap, class_table)."""
    arr, table, void_id, meta = _read_label_png(path)
    if meta.get("kind") != "bev":
        raise MalformedFileError(f"sidecar of {path}: kind is not bev")
    grid_meta = meta.get("grid")
    if (
        not isinstance(grid_meta, dict)
        or not isinstance(grid_meta.get("width_px"), int)
        or not isinstance(grid_meta.get("extent"), (int, float))
    ):
        raise MalformedFileError(f"sidecar of {path}: missing grid width_px/extent")
    if arr.shape != (grid_meta["width_px"], grid_meta["width_px"]):
        raise MalformedFileError(
            f"{path}: raster is {arr.shape}, sidecar declares {grid_meta['width_px']}"
        )
    heights = None
    if "heights" in meta:
        heights_path = Path(path).parent / str(meta["heights"])
        heights = read_depth(heights_path).astype(np.float64)
        if heights.shape != arr.shape:
            raise MalformedFileError(f"{path}: heights raster shape mismatch")
    try:
        grid = BevGrid(width_px=grid_meta["width_px"], extent=float(grid_meta["extent"]))
        bev = BevMap(grid=grid, cells=arr, void_id=void_id, heights=heights)
    except BevSegError as exc:
        raise MalformedFileError(f"{path}: {exc}") from exc
    return bev, table


# --------------------------------------------------------------- tensor .bin

def write_tensor(path, tensor: BevTensor) -> None:
    h, w, c1 = tensor.data.shape
    header = TENSOR_MAGIC + struct.pack("<III", h, w, c1)
    Path(path).write_bytes(header + tensor.data.tobytes(order="C"))


def read_tensor(path) -> BevTensor:
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise TruncatedFileError(f"{path}: shorter than the 16-byte header")
    if blob[:4] != TENSOR_MAGIC:
        raise MalformedFileError(f"{path}: bad magic {blob[:4]!r}")
    h, w, c1 = struct.unpack("<III", blob[4:16])
    if h == 0 or w == 0 or c1 < 2:
        raise MalformedFileError(f"{path}: bad dimensions {h}x{w}x{c1}")
    expected = 16 + h * w * c1
    if len(blob) < expected:
        raise TruncatedFileError(
            f"{path}: payload holds {len(blob) - 16} bytes, header declares {h * w * c1}"
        )
    if len(blob) > expected:
        raise MalformedFileError(f"{path}: {len(blob) - expected} trailing bytes")
    data = np.frombuffer(blob, dtype=np.uint8, offset=16).reshape(h, w, c1).copy()
    try:
        return BevTensor(data=data, num_classes=c1 - 1)
    except BevSegError as exc:
        raise MalformedFileError(f"{path}: {exc}") from exc


# ------------------------------------------------------------- visualization

def colorize(cells: np.ndarray, class_table, void_id: int,
             void_color=(0, 0, 0)) -> np.ndarray:
    """Map class ids to the table's diagnostic colors (void gets void_color)."""
    palette = np.zeros((256, 3), dtype=np.uint8)
    for c in class_table:
        palette[c.class_id] = c.color
    palette[void_id] = void_color
    return palette[cells]


def write_color_png(path, cells: np.ndarray, class_table, void_id: int) -> None:
    rgb = colorize(cells, class_table, void_id)
    Image.fromarray(rgb, mode="RGB").save(Path(path), format="PNG")
