"""Camera models, coordinate conventions, and rig configuration.

Coordinate conventions used everywhere in this package:

  Camera frame (standard pinhole): x right, y down, z forward along the
  optical axis. Pixel (u, v) addresses the pixel center at integer
  coordinates, u along columns, v along rows.

  Vehicle frame: right-handed, x forward, z up. Because the camera frame
  is right-handed, a proper rotation (det = +1) forces camera-right onto
  vehicle -y, so +y points to the vehicle's left. A camera at yaw 0 looks
  along +x; positive yaw turns it counterclockwise seen from above.

Heights (the z that the rasterizer's lowest-point rule compares) are
vehicle-frame z in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import InvalidConfigError, MalformedFileError

__all__ = [
    "CameraIntrinsics",
    "Extrinsics",
    "ClassDef",
    "RigView",
    "RigConfig",
    "intrinsics_from_fov",
    "fov_from_intrinsics",
    "yaw_rotation",
    "yaw_extrinsics",
    "default_class_table",
    "default_rig",
    "load_rig",
    "save_rig",
    "DEFAULT_VOID_ID",
    "DEFAULT_MOUNT_HEIGHT",
]

DEFAULT_VOID_ID = 255
DEFAULT_MOUNT_HEIGHT = 1.8

_ORTHO_TOL = 1e-9

# Camera axes expressed in the vehicle frame at yaw 0:
# columns are the images of camera x (right -> -y), y (down -> -z),
# z (forward -> +x). det = +1.
_BASE_CAM_TO_VEH = np.array(
    [
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)
_BASE_CAM_TO_VEH.setflags(write=False)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    f_u: float
    f_v: float
    c_u: float
    c_v: float
    width: int
    height: int

    def __post_init__(self):
        if not (math.isfinite(self.f_u) and self.f_u > 0):
            raise InvalidConfigError(f"f_u must be positive, got {self.f_u}")
        if not (math.isfinite(self.f_v) and self.f_v > 0):
            raise InvalidConfigError(f"f_v must be positive, got {self.f_v}")
        if self.width < 1 or self.height < 1:
            raise InvalidConfigError(
                f"image dimensions must be >= 1, got {self.width}x{self.height}"
            )
        if not 0 < self.c_u < self.width:
            raise InvalidConfigError(
                f"c_u must lie inside (0, {self.width}), got {self.c_u}"
            )
        if not 0 < self.c_v < self.height:
            raise InvalidConfigError(
                f"c_v must lie inside (0, {self.height}), got {self.c_v}"
            )


@dataclass(frozen=True)
class Extrinsics:
    """Rigid transform from camera frame to vehicle frame: p_veh = R @ p_cam + t."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        trans = np.asarray(self.translation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise InvalidConfigError(f"rotation must be 3x3, got shape {rot.shape}")
        if trans.shape != (3,):
            raise InvalidConfigError(
                f"translation must be a 3-vector, got shape {trans.shape}"
            )
        if not np.all(np.isfinite(rot)) or not np.all(np.isfinite(trans)):
            raise InvalidConfigError("extrinsics must be finite")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > _ORTHO_TOL:
            raise InvalidConfigError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
            raise InvalidConfigError("rotation must be proper (det = +1)")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)


@dataclass(frozen=True)
class ClassDef:
    """One semantic class: small integer id, display name, diagnostic color."""

    class_id: int
    name: str
    color: tuple[int, int, int]

    def __post_init__(self):
        if not 0 <= self.class_id <= 255:
            raise InvalidConfigError(
                f"class id must fit in 8 bits, got {self.class_id}"
            )
        if len(self.color) != 3 or any(not 0 <= c <= 255 for c in self.color):
            raise InvalidConfigError(f"bad rgb color {self.color!r}")


@dataclass(frozen=True)
class RigView:
    name: str
    intrinsics: CameraIntrinsics
    extrinsics: Extrinsics


@dataclass(frozen=True)
class RigConfig:
    """Ordered camera views plus the shared class table."""

    views: tuple[RigView, ...]
    class_table: tuple[ClassDef, ...]
    void_id: int = DEFAULT_VOID_ID

    def __post_init__(self):
        object.__setattr__(self, "views", tuple(self.views))
        object.__setattr__(self, "class_table", tuple(self.class_table))
        names = [v.name for v in self.views]
        if len(set(names)) != len(names):
            raise InvalidConfigError(f"duplicate view names: {names}")
        ids = [c.class_id for c in self.class_table]
        if ids != list(range(len(ids))):
            raise InvalidConfigError(
                f"class ids must be contiguous from 0, got {ids}"
            )
        if not 0 <= self.void_id <= 255:
            raise InvalidConfigError(f"void_id must fit in 8 bits, got {self.void_id}")
        if self.void_id in ids:
            raise InvalidConfigError(
                f"void_id {self.void_id} collides with a semantic class id"
            )

    @property
    def num_classes(self) -> int:
        return len(self.class_table)

    @property
    def view_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.views)

    def class_named(self, name: str) -> ClassDef:
        for c in self.class_table:
            if c.name == name:
                return c
        raise InvalidConfigError(f"no class named {name!r}")


def intrinsics_from_fov(width: int, height: int, horizontal_fov: float) -> CameraIntrinsics:
    """Build square-pixel intrinsics from a horizontal field of view in degrees.

    f = width / (2 * tan(fov / 2)), principal point at the image center.
    """
    if width < 1 or height < 1:
        raise InvalidConfigError(
            f"image dimensions must be >= 1, got {width}x{height}"
        )
    if not (math.isfinite(horizontal_fov) and 0.0 < horizontal_fov < 180.0):
        raise InvalidConfigError(
            f"horizontal fov must lie in (0, 180) degrees, got {horizontal_fov}"
        )
    f = width / (2.0 * math.tan(math.radians(horizontal_fov) / 2.0))
    return CameraIntrinsics(
        f_u=f, f_v=f, c_u=width / 2.0, c_v=height / 2.0, width=width, height=height
    )


def fov_from_intrinsics(intr: CameraIntrinsics) -> float:
    """Horizontal field of view in degrees implied by f_u and the image width."""
    return math.degrees(2.0 * math.atan(intr.width / (2.0 * intr.f_u)))


def yaw_rotation(yaw: float) -> np.ndarray:
    """Rotation about the vehicle up-axis by yaw degrees (counterclockwise from above)."""
    a = math.radians(yaw)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def yaw_extrinsics(yaw: float, translation=(0.0, 0.0, 0.0)) -> Extrinsics:
    """Extrinsics of a camera yawed about the vehicle up-axis.

    yaw=0 looks along vehicle +x with camera-up matching vehicle-up.
    """
    if not math.isfinite(yaw):
        raise InvalidConfigError(f"yaw must be finite, got {yaw}")
    return Extrinsics(
        rotation=yaw_rotation(yaw) @ _BASE_CAM_TO_VEH,
        translation=np.asarray(translation, dtype=np.float64),
    )


def default_class_table() -> tuple[ClassDef, ...]:
    """The 9 road-scene classes used by the bundled rig, ids 0..8."""
    return (
        ClassDef(0, "Buildings", (70, 70, 70)),
        ClassDef(1, "Fences", (100, 40, 40)),
        ClassDef(2, "Pedestrians", (220, 20, 60)),
        ClassDef(3, "Poles", (153, 153, 153)),
        ClassDef(4, "Road Lines", (157, 234, 50)),
        ClassDef(5, "Roads", (128, 64, 128)),
        ClassDef(6, "Sidewalks", (244, 35, 232)),
        ClassDef(7, "Vehicles", (0, 0, 142)),
        ClassDef(8, "Walls", (102, 102, 156)),
    )


def default_rig(
    width: int = 1024,
    height: int = 576,
    horizontal_fov: float = 90.0,
    mount_height: float = DEFAULT_MOUNT_HEIGHT,
) -> RigConfig:
    """Four co-located cameras at yaws 0/90/180/270 covering the full surround.

    All cameras sit mount_height meters above the vehicle ground plane.
    """
    intr = intrinsics_from_fov(width, height, horizontal_fov)
    mount = (0.0, 0.0, mount_height)
    views = tuple(
        RigView(name, intr, yaw_extrinsics(yaw, mount))
        for name, yaw in (("front", 0.0), ("left", 90.0), ("rear", 180.0), ("right", 270.0))
    )
    return RigConfig(views=views, class_table=default_class_table())


def _rig_to_dict(rig: RigConfig) -> dict:
    return {
        "void_id": rig.void_id,
        "classes": [
            {"id": c.class_id, "name": c.name, "color": list(c.color)}
            for c in rig.class_table
        ],
        "views": [
            {
                "name": v.name,
                "intrinsics": {
                    "width": v.intrinsics.width,
                    "height": v.intrinsics.height,
                    "f_u": float(v.intrinsics.f_u),
                    "f_v": float(v.intrinsics.f_v),
                    "c_u": float(v.intrinsics.c_u),
                    "c_v": float(v.intrinsics.c_v),
                },
                "rotation": [[float(x) for x in row] for row in v.extrinsics.rotation],
                "translation": [float(x) for x in v.extrinsics.translation],
            }
            for v in rig.views
        ],
    }


def save_rig(rig: RigConfig, path) -> None:
    """Write a rig config as human-readable YAML (schema in docs/formats.md)."""
    text = yaml.safe_dump(_rig_to_dict(rig), sort_keys=False)
    Path(path).write_text(text, encoding="utf-8")


def _require(mapping, key, kind, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise MalformedFileError(f"rig config: missing key {key!r} in {where}")
    value = mapping[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise MalformedFileError(f"rig config: {where}.{key} must be a number")
        return float(value)
    if not isinstance(value, kind):
        raise MalformedFileError(
            f"rig config: {where}.{key} must be {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _view_from_dict(entry: dict, index: int) -> RigView:
    where = f"views[{index}]"
    name = _require(entry, "name", str, where)
    inner = _require(entry, "intrinsics", dict, where)
    intr = CameraIntrinsics(
        f_u=_require(inner, "f_u", float, f"{where}.intrinsics"),
        f_v=_require(inner, "f_v", float, f"{where}.intrinsics"),
        c_u=_require(inner, "c_u", float, f"{where}.intrinsics"),
        c_v=_require(inner, "c_v", float, f"{where}.intrinsics"),
        width=int(_require(inner, "width", int, f"{where}.intrinsics")),
        height=int(_require(inner, "height", int, f"{where}.intrinsics")),
    )
    translation = entry.get("translation", [0.0, 0.0, 0.0])
    if "yaw" in entry and "rotation" in entry:
        raise MalformedFileError(f"rig config: {where} has both yaw and rotation")
    try:
        if "yaw" in entry:
            ext = yaw_extrinsics(_require(entry, "yaw", float, where), translation)
        else:
            rotation = _require(entry, "rotation", list, where)
            ext = Extrinsics(rotation=np.asarray(rotation, dtype=np.float64),
                             translation=np.asarray(translation, dtype=np.float64))
    except (ValueError, TypeError) as exc:
        raise MalformedFileError(f"rig config: {where}: {exc}") from exc
    return RigView(name=name, intrinsics=intr, extrinsics=ext)


def load_rig(path) -> RigConfig:
    """Load a rig config, raising distinct errors for missing, malformed, or invalid files."""
    raw = Path(path).read_bytes()
    try:
        data = yaml.safe_load(raw.decode("utf-8"))
    except (yaml.YAMLError, UnicodeDecodeError) as exc:
        raise MalformedFileError(f"rig config {path}: not valid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise MalformedFileError(f"rig config {path}: top level must be a mapping")

    classes = []
    for i, entry in enumerate(_require(data, "classes", list, "rig")):
        where = f"classes[{i}]"
        color = _require(entry, "color", list, where)
        if len(color) != 3 or not all(isinstance(c, int) for c in color):
            raise MalformedFileError(f"rig config: {where}.color must be 3 ints")
        classes.append(
            ClassDef(
                class_id=int(_require(entry, "id", int, where)),
                name=_require(entry, "name", str, where),
                color=tuple(color),
            )
        )
    views = [
        _view_from_dict(entry, i)
        for i, entry in enumerate(_require(data, "views", list, "rig"))
    ]
    return RigConfig(
        views=tuple(views),
        class_table=tuple(classes),
        void_id=int(_require(data, "void_id", int, "rig")),
    )
