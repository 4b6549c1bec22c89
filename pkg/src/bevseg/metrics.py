"""Per-class IoU and mean IoU over BEV maps.

The confusion matrix is (C+1) x (C+1) with rows as ground truth, columns
as prediction, and index C standing for void. Classes that never occur in
either prediction or ground truth have undefined IoU and are excluded from
the mean by default; strict averaging divides by all C classes instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bevraster import BevMap
from .errors import InvalidInputError, UndefinedMetricError

__all__ = [
    "ConfusionMatrix",
    "confuse",
    "class_iou",
    "per_class_iou",
    "mean_iou",
    "report_data",
    "format_report",
]


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray
    num_classes: int

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        side = self.num_classes + 1
        if counts.shape != (side, side):
            raise InvalidInputError(
                f"counts must be {side}x{side}, got {counts.shape}"
            )
        if (counts < 0).any():
            raise InvalidInputError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise InvalidInputError("cannot add matrices with different class counts")
        return ConfusionMatrix(self.counts + other.counts, self.num_classes)


def _to_index(cells: np.ndarray, num_classes: int, void_id: int) -> np.ndarray:
    bad = (cells >= num_classes) & (cells != void_id)
    if bad.any():
        raise InvalidInputError(
            f"map contains ids outside the class table: {np.unique(cells[bad]).tolist()}"
        )
    return np.where(cells == void_id, num_classes, cells).astype(np.int64)


def confuse(
    pred: BevMap, gt: BevMap, num_classes: int, ignore_gt_void: bool = True
) -> ConfusionMatrix:
    """Accumulate cell-wise (gt, pred) counts over two same-shaped maps."""
    if pred.cells.shape != gt.cells.shape:
        raise InvalidInputError(
            f"shape mismatch: pred {pred.cells.shape} vs gt {gt.cells.shape}"
        )
    if pred.void_id != gt.void_id:
        raise InvalidInputError("pred and gt disagree on void_id")
    side = num_classes + 1
    g = _to_index(gt.cells, num_classes, gt.void_id).ravel()
    p = _to_index(pred.cells, num_classes, pred.void_id).ravel()
    if ignore_gt_void:
        keep = g != num_classes
        g, p = g[keep], p[keep]
    counts = np.bincount(g * side + p, minlength=side * side).reshape(side, side)
    return ConfusionMatrix(counts=counts, num_classes=num_classes)


def class_iou(cm: ConfusionMatrix, k: int):
    """IoU of class k, or None when the class occurs nowhere (undefined)."""
    if not 0 <= k < cm.num_classes:
        raise InvalidInputError(
            f"class index {k} out of range [0, {cm.num_classes})"
        )
    tp = int(cm.counts[k, k])
    fp = int(cm.counts[:, k].sum()) - tp
    fn = int(cm.counts[k, :].sum()) - tp
    denom = tp + fp + fn
    if denom == 0:
        return None
    return tp / denom


def per_class_iou(cm: ConfusionMatrix) -> list:
    return [class_iou(cm, k) for k in range(cm.num_classes)]


def mean_iou(cm: ConfusionMatrix, strict: bool = False) -> float:
    """Mean IoU over defined classes; void never participates.

    strict=True divides by all C classes, counting undefined ones as 0.
    """
    ious = [v for v in per_class_iou(cm) if v is not None]
    if not ious:
        raise UndefinedMetricError("no class has a defined IoU")
    if strict:
        return sum(ious) / cm.num_classes
    return sum(ious) / len(ious)


def report_data(cm: ConfusionMatrix, class_names=None, strict: bool = False) -> dict:
    """Machine-readable metrics summary (the YAML report's payload)."""
    ious = per_class_iou(cm)
    names = list(class_names) if class_names is not None else [
        str(k) for k in range(cm.num_classes)
    ]
    per_class = []
    for k, iou in enumerate(ious):
        tp = int(cm.counts[k, k])
        per_class.append(
            {
                "id": k,
                "name": names[k],
                "iou": None if iou is None else float(iou),
                "tp": tp,
                "fp": int(cm.counts[:, k].sum()) - tp,
                "fn": int(cm.counts[k, :].sum()) - tp,
            }
        )
    return {
        "num_classes": cm.num_classes,
        "cells_compared": cm.total,
        "mean_iou": float(mean_iou(cm, strict=strict)),
        "mean_mode": "strict" if strict else "defined-only",
        "per_class": per_class,
    }


def format_report(data: dict) -> str:
    """Plain-text table for terminals."""
    lines = [f"{'class':<14} {'IoU':>8}   {'tp':>10} {'fp':>10} {'fn':>10}"]
    for row in data["per_class"]:
        iou = "   --  " if row["iou"] is None else f"{row['iou']:7.4f}"
        lines.append(
            f"{row['name']:<14} {iou:>8}   {row['tp']:>10} {row['fp']:>10} {row['fn']:>10}"
        )
    lines.append(
        f"mean IoU ({data['mean_mode']}): {data['mean_iou']:.4f} "
        f"over {data['cells_compared']} cells"
    )
    return "\n".join(lines)
