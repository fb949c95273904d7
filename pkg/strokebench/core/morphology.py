"""Binary morphology, exact Euclidean distance transform and skeletonization.

Pixels outside the image always count as background, for dilation and
erosion alike, so foreground touching the border erodes there.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.morphology import skeletonize as _zhang_thinning

from .imgcore import BinaryMask

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class StructuringElement:
    """Square footprint of odd side length centred on the anchor pixel."""

    size: int = 3
    shape: str = "square"

    def __post_init__(self) -> None:
        if self.shape != "square":
            raise ValueError(f"Unsupported structuring element shape {self.shape!r}")
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"Structuring element size must be odd and >= 1, got {self.size}")


SQUARE_3 = StructuringElement(3)


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Per-pixel Euclidean distance to the nearest seed pixel."""

    data: np.ndarray
    sentinel: float

    def __post_init__(self) -> None:
        array = np.ascontiguousarray(self.data, dtype=np.float64)
        array.flags.writeable = False
        object.__setattr__(self, "data", array)

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])


def dilate(mask: BinaryMask, se: StructuringElement = SQUARE_3) -> BinaryMask:
    """Set a pixel when any pixel under the square footprint is set."""
    if se.size == 1 or mask.data.size == 0:
        return mask
    grown = ndimage.maximum_filter(mask.data.view(np.uint8), size=se.size, mode="constant", cval=0)
    return BinaryMask(grown.astype(bool))


def erode(mask: BinaryMask, se: StructuringElement = SQUARE_3) -> BinaryMask:
    """Keep a pixel only when the whole square footprint is set."""
    if se.size == 1 or mask.data.size == 0:
        return mask
    shrunk = ndimage.minimum_filter(mask.data.view(np.uint8), size=se.size, mode="constant", cval=0)
    return BinaryMask(shrunk.astype(bool))


def morph_gradient(mask: BinaryMask) -> BinaryMask:
    """Contour pixels: 3x3 dilation minus 3x3 erosion."""
    return BinaryMask(dilate(mask, SQUARE_3).data & ~erode(mask, SQUARE_3).data)


def erode_rect(mask: BinaryMask, w: int = 2, h: int = 2) -> BinaryMask:
    """Erode with a ``w`` x ``h`` footprint anchored at its top-left pixel.

    Pixel ``(y, x)`` survives iff every pixel in rows ``y..y+h-1`` and
    columns ``x..x+w-1`` is set.
    """
    if w < 1 or h < 1:
        raise ValueError(f"Footprint must be at least 1x1, got {w}x{h}")
    padded = np.pad(mask.data, ((0, h - 1), (0, w - 1)), constant_values=False)
    result = np.ones(mask.shape, dtype=bool)
    for dy in range(h):
        for dx in range(w):
            result &= padded[dy : dy + mask.height, dx : dx + mask.width]
    return BinaryMask(result)


def edt(seeds: BinaryMask) -> DistanceField:
    """Exact Euclidean distance from every pixel to the nearest seed pixel.

    With no seeds at all, every pixel holds the sentinel ``width + height + 1``.
    """
    sentinel = float(seeds.width + seeds.height + 1)
    if not seeds.data.any():
        LOGGER.debug("Empty seed set; all distances set to sentinel %.0f", sentinel)
        return DistanceField(np.full(seeds.shape, sentinel), sentinel)
    # distance_transform_edt measures distance to the nearest zero element
    distances = ndimage.distance_transform_edt(~seeds.data)
    return DistanceField(distances, sentinel)


def skeletonize(mask: BinaryMask) -> BinaryMask:
    """Zhang-Suen thinning to a one-pixel-wide, 8-connected skeleton."""
    if not mask.data.any():
        return mask
    # skimage refuses the read-only buffer BinaryMask holds
    data = np.array(mask.data)
    return BinaryMask(_zhang_thinning(data, method="zhang") & data)


__all__ = [
    "DistanceField",
    "SQUARE_3",
    "StructuringElement",
    "dilate",
    "edt",
    "erode",
    "erode_rect",
    "morph_gradient",
    "skeletonize",
]
