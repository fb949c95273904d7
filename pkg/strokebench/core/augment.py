"""Seeded offline augmentation profiles and the online training-time ops.

Randomness comes only from numpy's PCG64 bit generator seeded through
``SeedSequence``; each offline variant derives its own seed from
``(master_seed, image_id, variant_index)``, so outputs do not depend on the
order or the thread in which variants are produced.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy import ndimage

from .classical_baselines import gaussian_kernel1d, kernel_radius
from .imgcore import BinaryMask, RgbImage, save_png
from .morphology import erode_rect

LOGGER = logging.getLogger(__name__)

WEAK = "weak"
STRONG = "strong"
WEAK_PROBABILITY = 0.7
GLARE_ANGLES = tuple(range(0, 360, 45))
SMALL_STROKE_IDS = range(22, 38)
GENTLE_FACTOR = 0.5

# Declared sampling ranges; written into every provenance record.
SAMPLING_RANGES: Dict[str, Any] = {
    "brightness": [0.7, 1.3],
    "contrast": [0.8, 1.2],
    "gamma": [0.7, 1.4],
    "temperature": [-0.1, 0.1],
    "blur_sigma": [0.3, 1.5],
    "noise_sigma": [2.0, 8.0],
    "glare_angle": list(GLARE_ANGLES),
    "glare_strength": [0.15, 0.5],
    "shadow_width_fraction": [0.1, 0.4],
    "shadow_strength": [0.2, 0.6],
    "strong_mode": ["glare", "shadow", "glare+shadow"],
    "gentle_factor": GENTLE_FACTOR,
}


@dataclass(frozen=True)
class AugmentProfile:
    kind: str
    params: Dict[str, Any]
    rng_seed: int
    gentle: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "profile": self.kind,
            "gentle": self.gentle,
            "params": self.params,
            "seed": self.rng_seed,
            "ranges": SAMPLING_RANGES,
        }


@dataclass(frozen=True)
class AugmentedVariant:
    name: str
    image: RgbImage
    mask: BinaryMask
    profile: AugmentProfile


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _id_key(image_id: str) -> int:
    return int.from_bytes(hashlib.sha256(str(image_id).encode("utf-8")).digest()[:8], "big")


def variant_seed(master_seed: int, image_id: str, variant_index: int) -> int:
    """64-bit seed derived from the master seed, the image id and the variant index."""
    sequence = np.random.SeedSequence([master_seed & 0xFFFFFFFFFFFFFFFF, _id_key(image_id), variant_index])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def _check_range(name: str, value: float, low: float, high: float) -> None:
    if not low <= value <= high:
        raise ValueError(f"{name} factor {value} outside [{low}, {high}]")


def adjust_photometric(
    img: RgbImage,
    brightness: float = 1.0,
    contrast: float = 1.0,
    gamma: float = 1.0,
) -> RgbImage:
    """Gamma, then brightness, then contrast about mid-gray, per channel."""
    _check_range("brightness", brightness, 0.7, 1.3)
    _check_range("contrast", contrast, 0.8, 1.2)
    _check_range("gamma", gamma, 0.7, 1.4)
    values = img.data.astype(np.float64) / 255.0
    values = ((values**gamma) * brightness - 0.5) * contrast + 0.5
    return RgbImage(_to_uint8(values * 255.0))


def shift_temperature(img: RgbImage, shift: float) -> RgbImage:
    """Warm (positive) or cool (negative) the image with opposing R/B gains."""
    _check_range("temperature", shift, -0.1, 0.1)
    gains = np.array([1.0 + shift, 1.0, 1.0 - shift])
    return RgbImage(_to_uint8(img.data.astype(np.float64) * gains))


def gaussian_blur(img: RgbImage, sigma: float) -> RgbImage:
    """Separable Gaussian blur truncated at three sigma, edges replicated."""
    kernel = gaussian_kernel1d(sigma, kernel_radius(sigma))
    values = img.data.astype(np.float64)
    values = ndimage.correlate1d(values, kernel, axis=0, mode="nearest")
    values = ndimage.correlate1d(values, kernel, axis=1, mode="nearest")
    return RgbImage(_to_uint8(values))


def add_gaussian_noise(img: RgbImage, sigma: float, seed: int) -> RgbImage:
    if sigma <= 0:
        raise ValueError(f"Noise sigma must be positive, got {sigma}")
    noise = make_rng(seed).normal(0.0, sigma, size=img.data.shape)
    return RgbImage(_to_uint8(img.data.astype(np.float64) + noise))


def overlay_glare(img: RgbImage, angle: int, strength: float) -> RgbImage:
    """Add a linear brightness ramp rising along ``angle`` (0 = towards the right, counter-clockwise)."""
    if angle % 45 != 0:
        raise ValueError(f"Glare angle must be a multiple of 45 degrees, got {angle}")
    if not 0 < strength <= 1:
        raise ValueError(f"Glare strength must be in (0, 1], got {strength}")
    theta = math.radians(angle)
    ys, xs = np.mgrid[0 : img.height, 0 : img.width].astype(np.float64)
    projection = xs * math.cos(theta) - ys * math.sin(theta)
    span = projection.max() - projection.min()
    ramp = (projection - projection.min()) / span if span > 0 else np.zeros_like(projection)
    return RgbImage(_to_uint8(img.data.astype(np.float64) + (strength * 255.0 * ramp)[..., None]))


def overlay_shadow(
    img: RgbImage,
    width: int,
    strength: float,
    offset: Optional[int] = None,
    vertical: bool = True,
) -> RgbImage:
    """Multiply a band of ``width`` columns (or rows) by ``1 - strength``."""
    if not 0 < strength <= 1:
        raise ValueError(f"Shadow strength must be in (0, 1], got {strength}")
    extent = img.width if vertical else img.height
    width = max(1, min(int(width), extent))
    if offset is None:
        offset = (extent - width) // 2
    offset = max(0, min(int(offset), extent - width))
    values = img.data.astype(np.float64)
    if vertical:
        values[:, offset : offset + width] *= 1.0 - strength
    else:
        values[offset : offset + width, :] *= 1.0 - strength
    return RgbImage(_to_uint8(values))


def flip_h(img: RgbImage, mask: BinaryMask) -> tuple[RgbImage, BinaryMask]:
    return RgbImage(img.data[:, ::-1]), BinaryMask(mask.data[:, ::-1])


def rotate(img: RgbImage, mask: BinaryMask, degrees: float) -> tuple[RgbImage, BinaryMask]:
    """Rotate about the centre; bilinear image with white fill, nearest mask with background fill."""
    if not -10.0 <= degrees <= 10.0:
        raise ValueError(f"Rotation must be within +/-10 degrees, got {degrees}")
    if degrees == 0:
        return img, mask
    channels = [
        ndimage.rotate(img.data[..., c].astype(np.float64), degrees, reshape=False, order=1, mode="constant", cval=255.0)
        for c in range(3)
    ]
    rotated_mask = ndimage.rotate(mask.data.astype(np.uint8), degrees, reshape=False, order=0, mode="constant", cval=0)
    return RgbImage(_to_uint8(np.stack(channels, axis=-1))), BinaryMask(rotated_mask > 0)


def color_jitter(img: RgbImage, brightness: float, contrast: float, saturation: float) -> RgbImage:
    """Channel-gain jitter: brightness gain, contrast about the mean, saturation as a blend with gray."""
    values = img.data.astype(np.float64) * brightness
    values = (values - values.mean()) * contrast + values.mean()
    gray = values @ np.array([0.299, 0.587, 0.114])
    values = gray[..., None] + (values - gray[..., None]) * saturation
    return RgbImage(_to_uint8(values))


def sharpen(img: RgbImage, amount: float = 1.0, sigma: float = 1.0) -> RgbImage:
    """Unsharp mask: ``img + amount * (img - blur(img))``."""
    kernel = gaussian_kernel1d(sigma, kernel_radius(sigma))
    values = img.data.astype(np.float64)
    blurred = ndimage.correlate1d(values, kernel, axis=0, mode="nearest")
    blurred = ndimage.correlate1d(blurred, kernel, axis=1, mode="nearest")
    return RgbImage(_to_uint8(values + amount * (values - blurred)))


def is_small_stroke(image_id: str) -> bool:
    try:
        return int(image_id) in SMALL_STROKE_IDS
    except ValueError:
        return False


def sample_profile(seed: int, gentle: bool = False, width: int = 1, height: int = 1) -> AugmentProfile:
    """Draw a weak (p = 0.7) or strong offline profile from ``seed``."""
    rng = make_rng(seed)
    if rng.random() < WEAK_PROBABILITY:
        scale = GENTLE_FACTOR if gentle else 1.0
        params: Dict[str, Any] = {
            "gamma": float(rng.uniform(0.7, 1.4)),
            "brightness": float(rng.uniform(0.7, 1.3)),
            "contrast": float(rng.uniform(0.8, 1.2)),
            "temperature": float(rng.uniform(-0.1, 0.1)),
            "blur_sigma": float(rng.uniform(0.3, 1.5)) * scale,
            "noise_sigma": float(rng.uniform(2.0, 8.0)) * scale,
            "noise_seed": int(rng.integers(0, 2**63 - 1)),
        }
        return AugmentProfile(WEAK, params, seed, gentle)

    mode = str(rng.choice(SAMPLING_RANGES["strong_mode"]))
    params = {"mode": mode}
    if "glare" in mode:
        params["glare_angle"] = int(rng.choice(GLARE_ANGLES))
        params["glare_strength"] = float(rng.uniform(0.15, 0.5))
    if "shadow" in mode:
        vertical = bool(rng.random() < 0.5)
        extent = width if vertical else height
        band = max(1, int(round(rng.uniform(0.1, 0.4) * extent)))
        params["shadow_vertical"] = vertical
        params["shadow_width"] = band
        params["shadow_offset"] = int(rng.integers(0, max(1, extent - band + 1)))
        params["shadow_strength"] = float(rng.uniform(0.2, 0.6))
    return AugmentProfile(STRONG, params, seed, gentle)


def apply_profile(img: RgbImage, mask: BinaryMask, profile: AugmentProfile) -> tuple[RgbImage, BinaryMask]:
    """Apply an offline profile; every offline op is photometric, so the mask is returned untouched."""
    p = profile.params
    if profile.kind == WEAK:
        out = adjust_photometric(img, brightness=p["brightness"], contrast=p["contrast"], gamma=p["gamma"])
        out = shift_temperature(out, p["temperature"])
        out = gaussian_blur(out, p["blur_sigma"])
        out = add_gaussian_noise(out, p["noise_sigma"], p["noise_seed"])
        return out, mask
    out = img
    if "glare_angle" in p:
        out = overlay_glare(out, p["glare_angle"], p["glare_strength"])
    if "shadow_width" in p:
        out = overlay_shadow(
            out,
            p["shadow_width"],
            p["shadow_strength"],
            offset=p["shadow_offset"],
            vertical=p["shadow_vertical"],
        )
    return out, mask


def variant_name(image_id: str, index: int) -> str:
    return f"image_{image_id}_aug{index}"


def generate_offline(
    img: RgbImage,
    mask: BinaryMask,
    image_id: str,
    n: int = 10,
    master_seed: int = 0,
    workers: int = 1,
) -> List[AugmentedVariant]:
    """Produce ``n`` offline variants; small-stroke images get the gentle profile."""
    gentle = is_small_stroke(image_id)

    def _build(index: int) -> AugmentedVariant:
        seed = variant_seed(master_seed, image_id, index)
        profile = sample_profile(seed, gentle=gentle, width=img.width, height=img.height)
        out_img, out_mask = apply_profile(img, mask, profile)
        return AugmentedVariant(variant_name(image_id, index), out_img, out_mask, profile)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        variants = list(pool.map(_build, range(n)))
    LOGGER.info(
        "Generated %d variants for image %s (%d weak, gentle=%s)",
        n,
        image_id,
        sum(v.profile.kind == WEAK for v in variants),
        gentle,
    )
    return variants


def write_variants(out_dir: Path, variants: Sequence[AugmentedVariant]) -> None:
    """Write ``<name>.png``, ``<name>_mask.png`` and ``<name>.json`` provenance per variant."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for variant in variants:
        save_png(out_dir / f"{variant.name}.png", variant.image)
        save_png(out_dir / f"{variant.name}_mask.png", variant.mask)
        provenance = out_dir / f"{variant.name}.json"
        provenance.write_text(json.dumps(variant.profile.to_dict(), indent=2, sort_keys=True), encoding="utf-8")


@dataclass
class OnlineAugmenter:
    """Training-time augmentation applied to each sample as it is drawn."""

    seed: int
    flip_p: float = 0.5
    rotate_p: float = 0.5
    max_degrees: float = 10.0
    jitter_brightness: float = 0.3
    jitter_contrast: float = 0.3
    jitter_saturation: float = 0.2
    enhance_p: float = 0.5
    blur_p: float = 0.3
    sharpen_p: float = 0.3
    erode_p: float = 0.4
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._rng = make_rng(self.seed)

    def _jitter_factor(self, spread: float) -> float:
        return float(self._rng.uniform(max(0.0, 1.0 - spread), 1.0 + spread))

    def __call__(self, img: RgbImage, mask: BinaryMask) -> tuple[RgbImage, BinaryMask]:
        rng = self._rng
        if rng.random() < self.flip_p:
            img, mask = flip_h(img, mask)
        if rng.random() < self.rotate_p:
            img, mask = rotate(img, mask, float(rng.uniform(-self.max_degrees, self.max_degrees)))
        img = color_jitter(
            img,
            self._jitter_factor(self.jitter_brightness),
            self._jitter_factor(self.jitter_contrast),
            self._jitter_factor(self.jitter_saturation),
        )
        if rng.random() < self.enhance_p:
            brightness = float(rng.uniform(*SAMPLING_RANGES["brightness"]))
            contrast = float(rng.uniform(*SAMPLING_RANGES["contrast"]))
            img = adjust_photometric(img, brightness, contrast)
        if rng.random() < self.blur_p:
            img = gaussian_blur(img, float(rng.uniform(0.3, 1.5)))
        if rng.random() < self.sharpen_p:
            img = sharpen(img)
        if rng.random() < self.erode_p:
            mask = erode_rect(mask, 2, 2)
        return img, mask


__all__ = [
    "AugmentProfile",
    "AugmentedVariant",
    "OnlineAugmenter",
    "SAMPLING_RANGES",
    "STRONG",
    "WEAK",
    "add_gaussian_noise",
    "adjust_photometric",
    "apply_profile",
    "color_jitter",
    "flip_h",
    "gaussian_blur",
    "generate_offline",
    "is_small_stroke",
    "make_rng",
    "overlay_glare",
    "overlay_shadow",
    "rotate",
    "sample_profile",
    "sharpen",
    "shift_temperature",
    "variant_name",
    "variant_seed",
    "write_variants",
]
