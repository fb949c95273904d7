"""Utilities for discovering image / mask pairs on disk."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from ..core.protocol import image_sort_key, is_excluded_variant

LOGGER = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".pgm", ".ppm")

_STEM = re.compile(r"^image_(?P<id>[^_]+?)(?P<aug>_aug\d+)?(?P<mask>_mask)?$")


@dataclass(frozen=True)
class PairedFiles:
    image_id: str
    first: Path
    second: Path


@dataclass(frozen=True)
class PairingResult:
    pairs: Tuple[PairedFiles, ...]
    only_first: Tuple[Path, ...]
    only_second: Tuple[Path, ...]

    @property
    def complete(self) -> bool:
        return not self.only_first and not self.only_second


def parse_stem(stem: str) -> Optional[Tuple[str, bool, bool]]:
    """Return ``(image_id, is_mask, is_augmented)`` for ``image_<id>[_aug<k>][_mask]``."""
    match = _STEM.match(stem)
    if match is None:
        return None
    return match.group("id"), match.group("mask") is not None, match.group("aug") is not None


def scan_images(directory: Path) -> Dict[str, Path]:
    """Map image id to file for every raster in ``directory``; augmented variants are skipped."""
    if not directory.is_dir():
        raise ValueError(f"Directory {directory} does not exist")

    found: Dict[str, Path] = {}
    for path in sorted(directory.iterdir()):
        if not path.is_file() or path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        parsed = parse_stem(path.stem)
        if parsed is None:
            LOGGER.debug("Skipping %s: name does not follow image_<id> convention", path.name)
            continue
        image_id, _, augmented = parsed
        if augmented:
            continue
        if image_id in found:
            raise ValueError(f"Duplicate files for image {image_id}: {found[image_id].name}, {path.name}")
        found[image_id] = path
    return found


def pair_directories(first: Path, second: Path) -> PairingResult:
    """Pair files by image id across two directories, listing whatever is left over."""
    left = scan_images(first)
    right = scan_images(second)
    pairs = tuple(
        PairedFiles(image_id, left[image_id], right[image_id]) for image_id in _sorted_ids(left.keys() & right.keys())
    )
    only_first = tuple(left[i] for i in _sorted_ids(left.keys() - right.keys()))
    only_second = tuple(right[i] for i in _sorted_ids(right.keys() - left.keys()))
    LOGGER.debug("Paired %d files between %s and %s", len(pairs), first, second)
    return PairingResult(pairs, only_first, only_second)


def training_files(directory: Path, test_ids: Iterable[str]) -> List[Path]:
    """Images eligible for training: held-out ids and their augmented variants removed."""
    held_out = {str(i) for i in test_ids}
    kept: List[Path] = []
    for path in sorted(directory.iterdir()):
        parsed = parse_stem(path.stem)
        if parsed is None or path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        image_id, _, _ = parsed
        if image_id in held_out or is_excluded_variant(path.name, held_out):
            continue
        kept.append(path)
    return kept


def _sorted_ids(ids: Iterable[str]) -> List[str]:
    return sorted(ids, key=image_sort_key)


__all__ = [
    "IMAGE_SUFFIXES",
    "PairedFiles",
    "PairingResult",
    "pair_directories",
    "parse_stem",
    "scan_images",
    "training_files",
]
