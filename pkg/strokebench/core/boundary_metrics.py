"""Boundary F1 with a resolution-scaled tolerance, and Boundary IoU.

Contours come from the 3x3 morphological gradient. A contour pixel is
matched when a contour pixel of the other mask lies within Chebyshev
distance ``tau``; matching has set semantics, so one ground-truth pixel
may match many predicted pixels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .imgcore import BinaryMask, require_same_shape
from .morphology import StructuringElement, dilate, edt, morph_gradient

TOLERANCE_BASE = 1536
BAND_FRACTION = 0.02
MIN_BAND_WIDTH = 1.0

BAND_BOTH = "both"
BAND_GT_ONLY = "gt-only"
BAND_VARIANTS = (BAND_BOTH, BAND_GT_ONLY)


@dataclass(frozen=True)
class BoundaryScores:
    precision: float
    recall: float
    bf1: float
    tau: int
    b_iou: float
    band_width: float
    band_variant: str = BAND_BOTH


def _round_half_away(value: float) -> int:
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


def tolerance(height: int, width: int, base: int = TOLERANCE_BASE) -> int:
    """tau = max(1, round(2 * max(H, W) / base)), rounding half away from zero."""
    if height <= 0 or width <= 0:
        raise ValueError(f"Image dimensions must be positive, got {height}x{width}")
    return max(1, _round_half_away(2 * max(height, width) / base))


def band_width(height: int, width: int) -> float:
    """Two percent of the image diagonal, kept real-valued."""
    return BAND_FRACTION * math.hypot(height, width)


def _harmonic_mean(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def boundary_f1(pred: BinaryMask, gt: BinaryMask, tau: int) -> tuple[float, float, float]:
    """Return ``(precision, recall, bf1)`` of contour matching within ``tau``."""
    require_same_shape(pred, gt)
    if tau < 1:
        raise ValueError(f"Tolerance must be >= 1, got {tau}")

    pred_contour = morph_gradient(pred)
    gt_contour = morph_gradient(gt)
    n_pred = pred_contour.count()
    n_gt = gt_contour.count()
    if n_pred == 0 and n_gt == 0:
        return 1.0, 1.0, 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0, 0.0, 0.0

    # a box of side 2*tau+1 is the Chebyshev ball of radius tau
    reach = StructuringElement(2 * tau + 1)
    matched_pred = np.count_nonzero(pred_contour.data & dilate(gt_contour, reach).data)
    matched_gt = np.count_nonzero(gt_contour.data & dilate(pred_contour, reach).data)
    precision = matched_pred / n_pred
    recall = matched_gt / n_gt
    return precision, recall, _harmonic_mean(precision, recall)


def inner_band(mask: BinaryMask, width: float) -> BinaryMask:
    """Foreground pixels whose distance to the nearest background pixel is <= ``width``.

    Pixels outside the image count as background, and the band is never
    thinner than one pixel, so every nonempty mask has a nonempty band.
    """
    padded = np.pad(~mask.data, 1, constant_values=True)
    distance = edt(BinaryMask(padded)).data[1:-1, 1:-1]
    return BinaryMask(mask.data & (distance <= max(width, MIN_BAND_WIDTH)))


def _iou(first: np.ndarray, second: np.ndarray) -> float:
    union = np.count_nonzero(first | second)
    if union == 0:
        return 1.0
    return np.count_nonzero(first & second) / union


def boundary_iou(pred: BinaryMask, gt: BinaryMask) -> tuple[float, float]:
    """IoU of the inner bands of both masks; returns ``(b_iou, band_width)``."""
    require_same_shape(pred, gt)
    d = band_width(gt.height, gt.width)
    return _iou(inner_band(pred, d).data, inner_band(gt, d).data), d


def boundary_iou_gt_band(pred: BinaryMask, gt: BinaryMask) -> float:
    """IoU restricted to the ground-truth inner band; predictions outside it are ignored."""
    require_same_shape(pred, gt)
    band = inner_band(gt, band_width(gt.height, gt.width)).data
    return _iou(pred.data & band, gt.data & band)


def evaluate_boundaries(
    pred: BinaryMask,
    gt: BinaryMask,
    tau: Optional[int] = None,
    band_variant: str = BAND_BOTH,
    tolerance_base: int = TOLERANCE_BASE,
) -> BoundaryScores:
    """All boundary scores at once; ``tau`` defaults to the ground-truth resolution rule."""
    if band_variant not in BAND_VARIANTS:
        raise ValueError(f"Unknown band variant {band_variant!r}; expected one of {BAND_VARIANTS}")
    require_same_shape(pred, gt)
    if tau is None:
        tau = tolerance(gt.height, gt.width, tolerance_base)
    precision, recall, bf1 = boundary_f1(pred, gt, tau)
    if band_variant == BAND_BOTH:
        b_iou, d = boundary_iou(pred, gt)
    else:
        b_iou, d = boundary_iou_gt_band(pred, gt), band_width(gt.height, gt.width)
    return BoundaryScores(
        precision=precision,
        recall=recall,
        bf1=bf1,
        tau=tau,
        b_iou=b_iou,
        band_width=d,
        band_variant=band_variant,
    )


__all__ = [
    "BAND_BOTH",
    "BAND_GT_ONLY",
    "BAND_VARIANTS",
    "BoundaryScores",
    "MIN_BAND_WIDTH",
    "TOLERANCE_BASE",
    "band_width",
    "boundary_f1",
    "boundary_iou",
    "boundary_iou_gt_band",
    "evaluate_boundaries",
    "inner_band",
    "tolerance",
]
