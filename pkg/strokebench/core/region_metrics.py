"""Pixel confusion counts and the region scores F1 and IoU."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import BinaryMask, require_same_shape


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class RegionScores:
    f1: float
    iou: float


def confusion(pred: BinaryMask, gt: BinaryMask) -> ConfusionCounts:
    require_same_shape(pred, gt)
    p, g = pred.data, gt.data
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=int(p.size) - tp - fp - fn)


def region_scores(c: ConfusionCounts) -> RegionScores:
    """F1 = 2TP/(2TP+FP+FN), IoU = TP/(TP+FP+FN); two empty masks score 1."""
    errors = c.tp + c.fp + c.fn
    if errors == 0:
        return RegionScores(f1=1.0, iou=1.0)
    return RegionScores(f1=2 * c.tp / (2 * c.tp + c.fp + c.fn), iou=c.tp / errors)


__all__ = ["ConfusionCounts", "RegionScores", "confusion", "region_scores"]
