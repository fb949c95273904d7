"""Raster image types, PNG/PGM/PPM codecs, grayscale conversion and resizing."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

LOGGER = logging.getLogger(__name__)

MAX_DIMENSION = 16384
BT601_WEIGHTS = (0.299, 0.587, 0.114)
DEFAULT_THRESHOLD = 127

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ACCEPTED_MODES = {"L", "LA", "RGB", "RGBA", "P", "PA"}


class ImageDecodeError(ValueError):
    """Raised when encoded bytes cannot be turned into a raster."""


class MalformedHeaderError(ImageDecodeError):
    """The stream does not start with a recognised, well-formed header."""


class UnsupportedBitDepthError(ImageDecodeError):
    """The stream is valid but not 8 bits per channel."""


class TruncatedDataError(ImageDecodeError):
    """The header promised more pixel data than the stream holds."""


class ImageEncodeError(ValueError):
    """Raised when a raster cannot be encoded."""


class DimensionMismatchError(ValueError):
    """Raised when two rasters that must align have different shapes."""


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.flags.writeable = False
    return array


def _check_bounds(width: int, height: int) -> None:
    if width > MAX_DIMENSION or height > MAX_DIMENSION:
        raise ValueError(f"Raster {width}x{height} exceeds the {MAX_DIMENSION} px sanity bound")


@dataclass(frozen=True, eq=False)
class RgbImage:
    """8-bit RGB raster stored as an immutable ``(height, width, 3)`` array."""

    data: np.ndarray

    def __post_init__(self) -> None:
        array = np.asarray(self.data)
        if array.ndim != 3 or array.shape[2] != 3:
            raise ValueError(f"RgbImage expects (height, width, 3) data, got shape {array.shape}")
        if array.shape[0] <= 0 or array.shape[1] <= 0:
            raise ValueError("RgbImage dimensions must be positive")
        _check_bounds(array.shape[1], array.shape[0])
        object.__setattr__(self, "data", _freeze(array.astype(np.uint8, copy=False)))

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RgbImage) and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit single-channel raster stored as an immutable ``(height, width)`` array."""

    data: np.ndarray

    def __post_init__(self) -> None:
        array = np.asarray(self.data)
        if array.ndim != 2:
            raise ValueError(f"GrayImage expects (height, width) data, got shape {array.shape}")
        _check_bounds(array.shape[1], array.shape[0])
        object.__setattr__(self, "data", _freeze(array.astype(np.uint8, copy=False)))

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean stroke mask; ``True`` marks stroke (foreground) pixels."""

    data: np.ndarray

    def __post_init__(self) -> None:
        array = np.asarray(self.data)
        if array.ndim != 2:
            raise ValueError(f"BinaryMask expects (height, width) data, got shape {array.shape}")
        _check_bounds(array.shape[1], array.shape[0])
        object.__setattr__(self, "data", _freeze(array.astype(bool, copy=False)))

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def count(self) -> int:
        return int(np.count_nonzero(self.data))

    def foreground_fraction(self) -> float:
        total = self.data.size
        return self.count() / total if total else 0.0

    def __eq__(self, other: object) -> bool:
        return isinstance(other, BinaryMask) and np.array_equal(self.data, other.data)


Raster = Union[RgbImage, GrayImage, BinaryMask]


def require_same_shape(first: BinaryMask, second: BinaryMask) -> None:
    if first.shape != second.shape:
        raise DimensionMismatchError(
            f"Mask dimensions differ: {first.width}x{first.height} vs {second.width}x{second.height}"
        )


def _check_png_header(payload: bytes) -> None:
    # Pillow silently narrows 16-bit RGB PNGs, so the IHDR depth is checked up front.
    if len(payload) < 33:
        raise TruncatedDataError("PNG stream ends inside the IHDR chunk")
    if payload[12:16] != b"IHDR":
        raise MalformedHeaderError("PNG stream does not start with an IHDR chunk")
    width = int.from_bytes(payload[16:20], "big")
    height = int.from_bytes(payload[20:24], "big")
    bit_depth = payload[24]
    color_type = payload[25]
    if width == 0 or height == 0:
        raise MalformedHeaderError("PNG header declares a zero dimension")
    if bit_depth == 16:
        raise UnsupportedBitDepthError("16-bit PNG images are not supported")
    if bit_depth != 8 and color_type != 3:
        raise UnsupportedBitDepthError(f"Unsupported PNG bit depth {bit_depth}")


def _pnm_tokens(payload: bytes, count: int) -> tuple[list[bytes], int]:
    """Return the first ``count`` header tokens and the offset of the pixel data."""
    tokens: list[bytes] = []
    i, n = 2, len(payload)
    while len(tokens) < count:
        while i < n and payload[i] in b" \t\r\n":
            i += 1
        if i < n and payload[i] == ord("#"):
            while i < n and payload[i] != ord("\n"):
                i += 1
            continue
        if i >= n:
            raise TruncatedDataError("PNM stream ends inside its header")
        start = i
        while i < n and payload[i] not in b" \t\r\n":
            i += 1
        tokens.append(payload[start:i])
    # exactly one whitespace byte separates the header from the raster
    return tokens, i + 1


def _check_pnm_header(payload: bytes) -> None:
    tokens, offset = _pnm_tokens(payload, 3)
    try:
        width, height, maxval = (int(token) for token in tokens)
    except ValueError as exc:
        raise MalformedHeaderError(f"Non-numeric PNM header field: {exc}") from exc
    if width <= 0 or height <= 0 or maxval <= 0:
        raise MalformedHeaderError("PNM header declares a non-positive field")
    if maxval > 255:
        raise UnsupportedBitDepthError(f"PNM maxval {maxval} implies more than 8 bits per sample")
    _check_bounds(width, height)
    channels = 1 if payload[:2] == b"P5" else 3
    if len(payload) - offset < width * height * channels:
        raise TruncatedDataError(
            f"PNM raster holds {len(payload) - offset} bytes, header promises {width * height * channels}"
        )


def decode_image(payload: bytes) -> Union[RgbImage, GrayImage]:
    """Decode PNG or binary PGM/PPM bytes; alpha channels are dropped."""
    if payload.startswith(_PNG_SIGNATURE):
        _check_png_header(payload)
    elif payload[:2] in (b"P5", b"P6"):
        _check_pnm_header(payload)
    else:
        raise MalformedHeaderError("Stream is neither PNG nor binary PGM/PPM")

    try:
        image = Image.open(io.BytesIO(payload))
    except UnidentifiedImageError as exc:
        raise MalformedHeaderError(f"Unrecognised image header: {exc}") from exc
    except EOFError as exc:
        raise TruncatedDataError(f"Stream ends before the pixel data: {exc}") from exc
    except (SyntaxError, ValueError, OSError) as exc:
        raise MalformedHeaderError(f"Malformed image header: {exc}") from exc

    if image.mode not in _ACCEPTED_MODES:
        raise UnsupportedBitDepthError(f"Unsupported pixel mode {image.mode!r}")

    try:
        image.load()
    except (OSError, SyntaxError, EOFError) as exc:
        raise TruncatedDataError(f"Image data is truncated: {exc}") from exc

    if image.mode in {"L", "LA"}:
        return GrayImage(np.array(image.convert("L"), dtype=np.uint8))
    return RgbImage(np.array(image.convert("RGB"), dtype=np.uint8))


def encode_png(img: Raster) -> bytes:
    """Encode a raster as an 8-bit PNG; masks become gray {0, 255}."""
    if isinstance(img, BinaryMask):
        array = np.where(img.data, 255, 0).astype(np.uint8)
    elif isinstance(img, (GrayImage, RgbImage)):
        array = img.data
    else:
        raise ImageEncodeError(f"Cannot encode object of type {type(img).__name__}")

    if array.shape[0] == 0 or array.shape[1] == 0:
        raise ImageEncodeError("Cannot encode an empty raster")

    buffer = io.BytesIO()
    try:
        Image.fromarray(np.ascontiguousarray(array)).save(buffer, format="PNG")
    except (OSError, ValueError) as exc:
        raise ImageEncodeError(f"PNG encoding failed: {exc}") from exc
    return buffer.getvalue()


def load_image(path: Path) -> Union[RgbImage, GrayImage]:
    LOGGER.debug("Decoding %s", path)
    return decode_image(Path(path).read_bytes())


def save_png(path: Path, img: Raster) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_png(img))


def to_gray(img: RgbImage, weights: Sequence[float] = BT601_WEIGHTS) -> GrayImage:
    """Weighted channel sum rounded half up and clamped to [0, 255]."""
    if len(weights) != 3:
        raise ValueError("Grayscale conversion needs exactly three channel weights")
    weighted = img.data.astype(np.float64) @ np.asarray(weights, dtype=np.float64)
    gray = np.clip(np.floor(weighted + 0.5), 0, 255)
    return GrayImage(gray.astype(np.uint8))


def binarize(img: GrayImage, threshold: int = DEFAULT_THRESHOLD) -> BinaryMask:
    """Foreground wherever the intensity is strictly greater than ``threshold``."""
    if not 0 <= threshold <= 255:
        raise ValueError(f"Threshold {threshold} outside 0-255")
    return BinaryMask(img.data > threshold)


def load_mask(path: Path, threshold: int = DEFAULT_THRESHOLD) -> BinaryMask:
    image = load_image(path)
    if isinstance(image, RgbImage):
        image = to_gray(image)
    return binarize(image, threshold)


def _nearest_indices(source: int, target: int) -> np.ndarray:
    # floor((i + 0.5) * source / target) in exact integer arithmetic
    indices = ((2 * np.arange(target, dtype=np.int64) + 1) * source) // (2 * target)
    return np.minimum(indices, source - 1)


def resize_nearest(mask: BinaryMask, new_width: int, new_height: int) -> BinaryMask:
    """Pixel-centre nearest-neighbour resampling; never introduces new values."""
    if new_width <= 0 or new_height <= 0:
        raise ValueError(f"Target dimensions must be positive, got {new_width}x{new_height}")
    if (new_width, new_height) == (mask.width, mask.height):
        return mask
    rows = _nearest_indices(mask.height, new_height)
    cols = _nearest_indices(mask.width, new_width)
    return BinaryMask(mask.data[np.ix_(rows, cols)])


__all__ = [
    "BT601_WEIGHTS",
    "BinaryMask",
    "DEFAULT_THRESHOLD",
    "DimensionMismatchError",
    "GrayImage",
    "ImageDecodeError",
    "ImageEncodeError",
    "MalformedHeaderError",
    "RgbImage",
    "TruncatedDataError",
    "UnsupportedBitDepthError",
    "binarize",
    "decode_image",
    "encode_png",
    "load_image",
    "load_mask",
    "require_same_shape",
    "resize_nearest",
    "save_png",
    "to_gray",
]
