"""Non-learning binarizers: Otsu, adaptive Gaussian and Sauvola.

Strokes are dark on a light board, so every method marks pixels *below*
its threshold as foreground.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import ndimage

from .imgcore import BinaryMask, GrayImage

LOGGER = logging.getLogger(__name__)

OTSU = "otsu"
ADAPTIVE = "adaptive"
SAUVOLA = "sauvola"
METHODS = (OTSU, ADAPTIVE, SAUVOLA)


@dataclass(frozen=True)
class AdaptiveParams:
    block: int = 51
    c: float = 15.0

    def __post_init__(self) -> None:
        if self.block < 3 or self.block % 2 == 0:
            raise ValueError(f"Adaptive block size must be odd and >= 3, got {self.block}")

    @property
    def sigma(self) -> float:
        return 0.3 * ((self.block - 1) * 0.5 - 1) + 0.8


@dataclass(frozen=True)
class SauvolaParams:
    window: int = 51
    k: float = 0.2
    r: float = 128.0

    def __post_init__(self) -> None:
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"Sauvola window must be odd and >= 3, got {self.window}")
        if self.r <= 0:
            raise ValueError(f"Sauvola dynamic range R must be positive, got {self.r}")


@dataclass(frozen=True)
class OtsuResult:
    threshold: int
    mask: BinaryMask
    degenerate: bool = False


@dataclass(frozen=True)
class BaselineResult:
    method: str
    mask: BinaryMask
    threshold: Optional[int] = None
    degenerate: bool = False


def gaussian_kernel1d(sigma: float, radius: int) -> np.ndarray:
    """Normalised 1-D Gaussian taps over ``[-radius, radius]``."""
    if sigma <= 0:
        raise ValueError(f"Gaussian sigma must be positive, got {sigma}")
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma**2))
    return kernel / kernel.sum()


def otsu(img: GrayImage) -> OtsuResult:
    """Global threshold maximising between-class variance over the 256-bin histogram."""
    if img.data.size == 0:
        raise ValueError("Otsu thresholding needs a non-empty image")

    histogram = np.bincount(img.data.ravel(), minlength=256).astype(np.float64)
    levels = np.arange(256, dtype=np.float64)
    weight_low = np.cumsum(histogram)
    sum_low = np.cumsum(histogram * levels)
    weight_high = weight_low[-1] - weight_low
    sum_high = sum_low[-1] - sum_low

    valid = (weight_low > 0) & (weight_high > 0)
    between = np.zeros(256, dtype=np.float64)
    mean_low = np.divide(sum_low, weight_low, out=np.zeros(256), where=valid)
    mean_high = np.divide(sum_high, weight_high, out=np.zeros(256), where=valid)
    between[valid] = weight_low[valid] * weight_high[valid] * (mean_low[valid] - mean_high[valid]) ** 2

    if not valid.any():
        value = int(img.data.flat[0])
        LOGGER.warning("Otsu input is constant (value %d); returning an empty stroke mask", value)
        return OtsuResult(threshold=value, mask=BinaryMask(np.zeros(img.data.shape, dtype=bool)), degenerate=True)

    # argmax returns the first maximiser, which is the smallest tied threshold
    threshold = int(np.argmax(between))
    return OtsuResult(threshold=threshold, mask=BinaryMask(img.data <= threshold))


def gaussian_local_mean(img: GrayImage, p: AdaptiveParams) -> np.ndarray:
    kernel = gaussian_kernel1d(p.sigma, p.block // 2)
    values = img.data.astype(np.float64)
    smoothed = ndimage.correlate1d(values, kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(smoothed, kernel, axis=1, mode="nearest")


def adaptive_gaussian(img: GrayImage, p: AdaptiveParams = AdaptiveParams()) -> BinaryMask:
    """Stroke iff value < Gaussian-weighted local mean - C (edge-replicated borders)."""
    threshold = gaussian_local_mean(img, p) - p.c
    return BinaryMask(img.data < threshold)


def _window_sums(integral: np.ndarray, half: int) -> tuple[np.ndarray, np.ndarray]:
    """Window sums from a zero-padded integral image plus the clipped window areas."""
    height, width = integral.shape[0] - 1, integral.shape[1] - 1
    rows = np.arange(height)
    cols = np.arange(width)
    top = np.maximum(rows - half, 0)
    bottom = np.minimum(rows + half + 1, height)
    left = np.maximum(cols - half, 0)
    right = np.minimum(cols + half + 1, width)
    sums = (
        integral[np.ix_(bottom, right)]
        - integral[np.ix_(top, right)]
        - integral[np.ix_(bottom, left)]
        + integral[np.ix_(top, left)]
    )
    areas = np.outer(bottom - top, right - left)
    return sums, areas


def _integral(values: np.ndarray) -> np.ndarray:
    integral = np.zeros((values.shape[0] + 1, values.shape[1] + 1), dtype=np.int64)
    integral[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)
    return integral


def local_mean_std(img: GrayImage, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Windowed mean and standard deviation from integral images, windows clipped at the border."""
    values = img.data.astype(np.int64)
    half = window // 2
    sums, areas = _window_sums(_integral(values), half)
    sums_sq, _ = _window_sums(_integral(values * values), half)
    mean = sums / areas
    variance = np.maximum(sums_sq / areas - mean * mean, 0.0)
    return mean, np.sqrt(variance)


def sauvola_threshold(img: GrayImage, p: SauvolaParams = SauvolaParams()) -> np.ndarray:
    """T(x, y) = mu * (1 + k * (sigma / R - 1))."""
    mean, std = local_mean_std(img, p.window)
    return mean * (1.0 + p.k * (std / p.r - 1.0))


def sauvola(img: GrayImage, p: SauvolaParams = SauvolaParams()) -> BinaryMask:
    return BinaryMask(img.data < sauvola_threshold(img, p))


def run_baseline(
    img: GrayImage,
    method: str,
    params: Union[AdaptiveParams, SauvolaParams, None] = None,
) -> BaselineResult:
    if method == OTSU:
        result = otsu(img)
        return BaselineResult(method, result.mask, result.threshold, result.degenerate)
    if method == ADAPTIVE:
        adaptive_params = params if isinstance(params, AdaptiveParams) else AdaptiveParams()
        return BaselineResult(method, adaptive_gaussian(img, adaptive_params))
    if method == SAUVOLA:
        sauvola_params = params if isinstance(params, SauvolaParams) else SauvolaParams()
        return BaselineResult(method, sauvola(img, sauvola_params))
    raise ValueError(f"Unknown baseline {method!r}; expected one of {METHODS}")


def kernel_radius(sigma: float, truncate: float = 3.0) -> int:
    return max(1, int(math.ceil(truncate * sigma)))


__all__ = [
    "ADAPTIVE",
    "AdaptiveParams",
    "BaselineResult",
    "METHODS",
    "OTSU",
    "OtsuResult",
    "SAUVOLA",
    "SauvolaParams",
    "adaptive_gaussian",
    "gaussian_kernel1d",
    "gaussian_local_mean",
    "kernel_radius",
    "local_mean_std",
    "otsu",
    "run_baseline",
    "sauvola",
    "sauvola_threshold",
]
