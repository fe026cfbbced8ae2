"""Confusion matrices and the segmentation scores derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .imagecore import IGNORE

# (S, T) normalisation constants for the shape-bias score
CDSB_CONSTANTS = {
    "cityscapes": (25.99, 36.43),
    "pascal-context": (38.38, 35.11),
}


@dataclass
class ConfusionMatrix:
    """``counts[g, p]`` = number of pixels with ground truth ``g`` predicted as ``p``."""

    num_classes: int
    counts: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.num_classes < 1:
            raise ValidationError("num_classes must be >= 1")
        if self.counts is None:
            self.counts = np.zeros((self.num_classes, self.num_classes), dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (self.num_classes, self.num_classes):
                raise ValidationError("counts must be num_classes x num_classes")

    def update(self, pred: np.ndarray, gt: np.ndarray) -> ConfusionMatrix:
        self.counts += confusion_accumulate(pred, gt, self.num_classes).counts
        return self

    def merge(self, other: ConfusionMatrix) -> ConfusionMatrix:
        if other.num_classes != self.num_classes:
            raise ValidationError("cannot merge matrices with different class counts")
        return ConfusionMatrix(self.num_classes, self.counts + other.counts)

    __add__ = merge

    def class_iou(self) -> np.ndarray:
        """Per-class IoU; NaN for classes absent from both ground truth and prediction."""
        diag = np.diag(self.counts).astype(np.float64)
        union = self.counts.sum(axis=0) + self.counts.sum(axis=1) - diag
        out = np.full(self.num_classes, np.nan)
        present = union > 0
        out[present] = diag[present] / union[present]
        return out


def confusion_accumulate(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> ConfusionMatrix:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    valid = gt != IGNORE
    g = gt[valid].astype(np.int64)
    p = pred[valid].astype(np.int64)
    if g.size and (g.min() < 0 or g.max() >= num_classes):
        raise ValidationError(f"ground-truth IDs must be < {num_classes} or {IGNORE}")
    if p.size and (p.min() < 0 or p.max() >= num_classes):
        raise ValidationError(f"prediction IDs must be < {num_classes} where ground truth is valid")
    counts = np.bincount(g * num_classes + p, minlength=num_classes * num_classes)
    return ConfusionMatrix(num_classes, counts.reshape(num_classes, num_classes))


def miou(cm: ConfusionMatrix) -> float:
    """Mean IoU in percent over classes present in ground truth or prediction."""
    iou = cm.class_iou()
    present = ~np.isnan(iou)
    if not present.any():
        raise ValidationError("no evaluable classes")
    # correctly rounded sum, independent of accumulation order
    return math.fsum(iou[present]) / int(present.sum()) * 100.0


def pixel_accuracy(cm: ConfusionMatrix) -> float:
    total = int(cm.counts.sum())
    if total == 0:
        raise ValidationError("empty confusion matrix")
    return float(np.trace(cm.counts) / total * 100.0)


@dataclass(frozen=True)
class CDSBInputs:
    iou_shape: float
    iou_texture: float
    S: float
    T: float


def cdsb(iou_shape: float | CDSBInputs, iou_texture: float | None = None,
         S: float | None = None, T: float | None = None) -> float:
    """Shape-bias score ``(shape/S) / (shape/S + texture/T)`` in [0, 1]."""
    if isinstance(iou_shape, CDSBInputs):
        iou_shape, iou_texture, S, T = (iou_shape.iou_shape, iou_shape.iou_texture,
                                        iou_shape.S, iou_shape.T)
    if iou_texture is None or S is None or T is None:
        raise ValidationError("cdsb needs iou_shape, iou_texture, S and T")
    if iou_shape < 0 or iou_texture < 0:
        raise ValidationError("IoU components must be >= 0")
    if not (S > 0 and T > 0):
        raise ValidationError("normalisation constants must be positive")
    shape = iou_shape / S
    texture = iou_texture / T
    if shape + texture == 0:
        raise ValidationError("undefined bias: both components are zero")
    return shape / (shape + texture)


@dataclass
class RobustnessTable:
    per_family: Mapping[str, Sequence[float]]
    miou_original: float

    @classmethod
    def from_json(cls, payload: Mapping, original: float | None = None) -> RobustnessTable:
        """Accept ``{"families": {...}, "original": x}`` or a bare family mapping."""
        families = payload.get("families", payload)
        if original is None:
            original = payload.get("original", payload.get("miou_original"))
        if original is None:
            raise ValidationError("missing mIoU on original data")
        rows = {str(k): [float(v) for v in vals] for k, vals in families.items()
                if k not in ("original", "miou_original")}
        return cls(rows, float(original))


def robustness_score(tbl: RobustnessTable) -> float:
    """Mean over families of the per-family mean mIoU, divided by clean mIoU."""
    if not tbl.per_family:
        raise ValidationError("empty robustness table")
    if not tbl.miou_original > 0:
        raise ValidationError("mIoU on original data must be positive")
    family_means = []
    for name, levels in tbl.per_family.items():
        if len(levels) == 0:
            raise ValidationError(f"family {name!r} has no levels")
        family_means.append(sum(levels) / len(levels))
    return (sum(family_means) / len(family_means)) / tbl.miou_original


def acc_rel(acc_aa: float, acc_cs: float) -> float:
    """Accuracy under attack relative to clean accuracy."""
    if acc_cs == 0:
        raise ValidationError("clean accuracy is zero; relative accuracy undefined")
    if acc_cs < 0 or acc_aa < 0:
        raise ValidationError("accuracies must be >= 0")
    return acc_aa / acc_cs
