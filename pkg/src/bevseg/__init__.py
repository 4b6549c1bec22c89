"""bevseg: per-camera depth + segmentation maps to fused semantic point
clouds and completed bird's-eye-view rasters."""

__version__ = "0.1.0"

from .bevraster import BevGrid, BevMap, BevTensor, one_hot, rasterize, world_to_cell
from .errors import BevSegError
from .metrics import ConfusionMatrix, class_iou, confuse, mean_iou
from .parserfill import FillStrategy, fill, majority_smooth
from .rig import (
    CameraIntrinsics,
    Extrinsics,
    RigConfig,
    default_rig,
    intrinsics_from_fov,
    load_rig,
    save_rig,
    yaw_extrinsics,
)
from .synthscene import Scene, SceneSpec, generate_scene, render_bev_gt, render_view
from .unproject import (
    SemanticPointCloud,
    ViewFrame,
    fuse,
    project_point,
    to_vehicle,
    unproject_pixel,
    unproject_view,
)

__all__ = [
    "__version__",
    "BevGrid", "BevMap", "BevTensor", "one_hot", "rasterize", "world_to_cell",
    "BevSegError",
    "ConfusionMatrix", "class_iou", "confuse", "mean_iou",
    "FillStrategy", "fill", "majority_smooth",
    "CameraIntrinsics", "Extrinsics", "RigConfig", "default_rig",
    "intrinsics_from_fov", "load_rig", "save_rig", "yaw_extrinsics",
    "Scene", "SceneSpec", "generate_scene", "render_bev_gt", "render_view",
    "SemanticPointCloud", "ViewFrame", "fuse", "project_point", "to_vehicle",
    "unproject_pixel", "unproject_view",
]
