"""Dataset manifest, core/thin split, stroke characterization and report assembly."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .boundary_metrics import BAND_BOTH, TOLERANCE_BASE, evaluate_boundaries
from .imgcore import BinaryMask, RgbImage, require_same_shape, resize_nearest
from .morphology import edt, skeletonize
from .region_metrics import confusion, region_scores
from .stats import (
    PairedSample,
    core_thin_gap,
    effect_size,
    robustness_profile,
    seed_average,
    wilcoxon_signed_rank,
)

LOGGER = logging.getLogger(__name__)

DEFAULT_CORE_IDS = ("3", "13", "14", "15", "16", "17", "28")
DEFAULT_THIN_IDS = ("22", "24", "27", "33", "36")
DEFAULT_SEEDS = (42, 123, 7)
METRICS = ("f1", "iou", "bf1", "b_iou")

TP_COLOR = (0, 255, 0)
FN_COLOR = (255, 0, 0)
FP_COLOR = (0, 0, 255)
TN_COLOR = (255, 255, 255)


class IncompleteGridError(ValueError):
    """Raised when the method x image x seed grid has holes, duplicates or unexpected seeds."""

    def __init__(
        self,
        missing: Sequence[Tuple[str, str, Optional[int]]],
        duplicates: Sequence[Tuple] = (),
        unexpected: Sequence[Tuple] = (),
    ) -> None:
        self.missing = list(missing)
        self.duplicates = list(duplicates)
        self.unexpected = list(unexpected)
        parts = []
        if self.missing:
            cells = ", ".join(f"({m}, {i}, {s})" for m, i, s in self.missing)
            parts.append(f"missing cells: {cells}")
        if self.duplicates:
            cells = ", ".join(f"({m}, {i}, {s})" for m, i, s in self.duplicates)
            parts.append(f"duplicate cells: {cells}")
        if self.unexpected:
            cells = ", ".join(f"({m}, {i}, {s})" for m, i, s in self.unexpected)
            parts.append(f"unexpected seeds: {cells}")
        super().__init__("Incomplete evaluation grid; " + "; ".join(parts))


def image_sort_key(image_id: str) -> Tuple[int, Any]:
    """Numeric ids sort numerically and before any non-numeric id."""
    try:
        return (0, int(image_id))
    except ValueError:
        return (1, image_id)


@dataclass(frozen=True)
class SplitSpec:
    core_ids: Tuple[str, ...] = DEFAULT_CORE_IDS
    thin_ids: Tuple[str, ...] = DEFAULT_THIN_IDS

    def __post_init__(self) -> None:
        object.__setattr__(self, "core_ids", tuple(str(i) for i in self.core_ids))
        object.__setattr__(self, "thin_ids", tuple(str(i) for i in self.thin_ids))
        overlap = set(self.core_ids) & set(self.thin_ids)
        if overlap:
            raise ValueError(f"Core and thin subsets overlap on ids {sorted(overlap, key=image_sort_key)}")

    @property
    def test_ids(self) -> Tuple[str, ...]:
        return tuple(sorted(self.core_ids + self.thin_ids, key=image_sort_key))

    def to_dict(self) -> Dict[str, Any]:
        return {"core_ids": list(self.core_ids), "thin_ids": list(self.thin_ids)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SplitSpec":
        return cls(
            core_ids=tuple(data.get("core_ids", DEFAULT_CORE_IDS)),
            thin_ids=tuple(data.get("thin_ids", DEFAULT_THIN_IDS)),
        )


@dataclass(frozen=True)
class StrokeStats:
    image_id: str
    coverage: float
    mean_width: Optional[float]
    std_width: Optional[float]
    width_defined: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "image_id": self.image_id,
            "coverage": self.coverage,
            "mean_width": self.mean_width,
            "std_width": self.std_width,
            "width_defined": self.width_defined,
        }


@dataclass(frozen=True)
class MetricRecord:
    image_id: str
    method: str
    seed: Optional[int]
    f1: float
    iou: float
    bf1: float
    b_iou: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    tau: int
    band_width: float
    eval_resolution: Tuple[int, int]

    def score(self, metric: str) -> float:
        if metric not in METRICS:
            raise ValueError(f"Unknown metric {metric!r}; expected one of {METRICS}")
        return float(getattr(self, metric))

    def sort_key(self) -> Tuple:
        return (self.method, image_sort_key(self.image_id), -1 if self.seed is None else self.seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "image_id": self.image_id,
            "method": self.method,
            "seed": self.seed,
            "f1": self.f1,
            "iou": self.iou,
            "bf1": self.bf1,
            "b_iou": self.b_iou,
            "precision": self.precision,
            "recall": self.recall,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tau": self.tau,
            "band_width": self.band_width,
            "eval_resolution": list(self.eval_resolution),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MetricRecord":
        seed = data.get("seed")
        return cls(
            image_id=str(data["image_id"]),
            method=str(data["method"]),
            seed=None if seed is None else int(seed),
            f1=float(data["f1"]),
            iou=float(data["iou"]),
            bf1=float(data["bf1"]),
            b_iou=float(data["b_iou"]),
            precision=float(data.get("precision", 0.0)),
            recall=float(data.get("recall", 0.0)),
            tp=int(data["tp"]),
            fp=int(data["fp"]),
            fn=int(data["fn"]),
            tau=int(data["tau"]),
            band_width=float(data["band_width"]),
            eval_resolution=tuple(int(v) for v in data["eval_resolution"]),
        )


@dataclass(frozen=True)
class EvaluationOptions:
    band_variant: str = BAND_BOTH
    tolerance_base: int = TOLERANCE_BASE


@dataclass
class RunManifest:
    """What was evaluated and how; serialized at the top of every report."""

    dataset_root: str = ""
    split: SplitSpec = field(default_factory=SplitSpec)
    methods: List[str] = field(default_factory=list)
    seeds: List[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    reference_method: str = ""
    metric: str = "f1"
    band_variant: str = BAND_BOTH
    tolerance_base: int = TOLERANCE_BASE
    gray_weights: Tuple[float, float, float] = (0.299, 0.587, 0.114)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.methods:
            raise ValueError("Run manifest lists no methods")
        if not self.seeds:
            raise ValueError("Run manifest lists no seeds")
        if self.metric not in METRICS:
            raise ValueError(f"Unknown metric {self.metric!r}; expected one of {METRICS}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dataset_root": self.dataset_root,
            "split": self.split.to_dict(),
            "methods": list(self.methods),
            "seeds": list(self.seeds),
            "reference_method": self.reference_method,
            "metric": self.metric,
            "band_variant": self.band_variant,
            "tolerance_base": self.tolerance_base,
            "gray_weights": list(self.gray_weights),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunManifest":
        return cls(
            dataset_root=data.get("dataset_root", ""),
            split=SplitSpec.from_dict(data.get("split", {})),
            methods=list(data.get("methods", [])),
            seeds=[int(s) for s in data.get("seeds", DEFAULT_SEEDS)],
            reference_method=data.get("reference_method", ""),
            metric=data.get("metric", "f1"),
            band_variant=data.get("band_variant", BAND_BOTH),
            tolerance_base=int(data.get("tolerance_base", TOLERANCE_BASE)),
            gray_weights=tuple(data.get("gray_weights", (0.299, 0.587, 0.114))),
            provenance=dict(data.get("provenance", {})),
        )


def stroke_coverage(mask: BinaryMask) -> float:
    return mask.foreground_fraction()


def stroke_width(mask: BinaryMask) -> Tuple[Optional[float], Optional[float]]:
    """Mean and population std of ``2 * edt - 1`` sampled on the skeleton.

    Returns ``(None, None)`` for an empty mask, where width is undefined.
    """
    if not mask.data.any():
        LOGGER.warning("Stroke width is undefined for an empty mask")
        return None, None
    # outside the image counts as background
    padded = np.pad(mask.data, 1, constant_values=False)
    skeleton = skeletonize(BinaryMask(padded))
    # distance from each stroke pixel to the nearest background pixel
    distance = edt(BinaryMask(~padded)).data
    widths = 2.0 * distance[skeleton.data] - 1.0
    return float(widths.mean()), float(widths.std())


def characterize_mask(image_id: str, mask: BinaryMask) -> StrokeStats:
    mean_width, std_width = stroke_width(mask)
    return StrokeStats(
        image_id=image_id,
        coverage=stroke_coverage(mask),
        mean_width=mean_width,
        std_width=std_width,
        width_defined=mean_width is not None,
    )


def summarize_strokes(stats: Sequence[StrokeStats], split: SplitSpec) -> Dict[str, Dict[str, Any]]:
    """Coverage and width summaries for the whole set and the core/thin subsets."""
    subsets = {
        "all": list(stats),
        "core": [s for s in stats if s.image_id in split.core_ids],
        "thin": [s for s in stats if s.image_id in split.thin_ids],
    }
    summary: Dict[str, Dict[str, Any]] = {}
    for name, members in subsets.items():
        if not members:
            continue
        coverage = np.array([s.coverage for s in members])
        widths = np.array([s.mean_width for s in members if s.width_defined])
        summary[name] = {
            "n": len(members),
            "coverage_mean": float(coverage.mean()),
            "coverage_std": float(coverage.std()),
            "coverage_median": float(np.median(coverage)),
            "coverage_min": float(coverage.min()),
            "coverage_max": float(coverage.max()),
            "width_mean": float(widths.mean()) if widths.size else None,
            "width_std": float(widths.std()) if widths.size else None,
        }
    return summary


def evaluate_pair(
    pred: BinaryMask,
    gt: BinaryMask,
    image_id: str = "",
    method: str = "",
    seed: Optional[int] = None,
    opts: EvaluationOptions = EvaluationOptions(),
) -> MetricRecord:
    """All four metrics for one prediction, upscaled to the ground-truth resolution first."""
    if pred.shape != gt.shape:
        LOGGER.debug("Resizing prediction %s from %dx%d to %dx%d", image_id, pred.width, pred.height, gt.width, gt.height)
        pred = resize_nearest(pred, gt.width, gt.height)
    counts = confusion(pred, gt)
    region = region_scores(counts)
    boundary = evaluate_boundaries(pred, gt, band_variant=opts.band_variant, tolerance_base=opts.tolerance_base)
    return MetricRecord(
        image_id=str(image_id),
        method=method,
        seed=seed,
        f1=region.f1,
        iou=region.iou,
        bf1=boundary.bf1,
        b_iou=boundary.b_iou,
        precision=boundary.precision,
        recall=boundary.recall,
        tp=counts.tp,
        fp=counts.fp,
        fn=counts.fn,
        tau=boundary.tau,
        band_width=boundary.band_width,
        eval_resolution=(gt.width, gt.height),
    )


def error_overlay(pred: BinaryMask, gt: BinaryMask) -> RgbImage:
    """Green true positives, red false negatives, blue false positives on white."""
    require_same_shape(pred, gt)
    canvas = np.empty(gt.shape + (3,), dtype=np.uint8)
    canvas[...] = TN_COLOR
    canvas[pred.data & gt.data] = TP_COLOR
    canvas[~pred.data & gt.data] = FN_COLOR
    canvas[pred.data & ~gt.data] = FP_COLOR
    return RgbImage(canvas)


def _expected_seeds(method_records: Sequence[MetricRecord], manifest: RunManifest) -> List[Optional[int]]:
    # deterministic methods (classical baselines) carry no seed at all
    if method_records and all(r.seed is None for r in method_records):
        return [None]
    return list(manifest.seeds)


def check_grid(records: Sequence[MetricRecord], manifest: RunManifest) -> Tuple[List[str], Dict[str, List[Optional[int]]]]:
    """Verify one record per (method, image, seed); return image ids and per-method seeds."""
    images = sorted({r.image_id for r in records}, key=image_sort_key)
    by_method: Dict[str, List[MetricRecord]] = {m: [] for m in manifest.methods}
    for record in records:
        if record.method not in by_method:
            raise ValueError(f"Record for method {record.method!r} is not listed in the manifest")
        by_method[record.method].append(record)

    seeds_by_method: Dict[str, List[Optional[int]]] = {}
    missing: List[Tuple[str, str, Optional[int]]] = []
    duplicates: List[Tuple[str, str, Optional[int]]] = []
    unexpected: List[Tuple[str, str, Optional[int]]] = []
    for method in manifest.methods:
        seeds = _expected_seeds(by_method[method], manifest)
        seeds_by_method[method] = seeds
        seen: Dict[Tuple[str, Optional[int]], int] = {}
        for record in by_method[method]:
            key = (record.image_id, record.seed)
            seen[key] = seen.get(key, 0) + 1
            if record.seed not in seeds:
                unexpected.append((method, record.image_id, record.seed))
        for image_id, seed in itertools.product(images, seeds):
            count = seen.get((image_id, seed), 0)
            if count == 0:
                missing.append((method, image_id, seed))
            elif count > 1:
                duplicates.append((method, image_id, seed))

    expected = sum(len(images) * len(seeds) for seeds in seeds_by_method.values())
    if missing or duplicates or unexpected or expected != len(records):
        raise IncompleteGridError(missing, duplicates, unexpected)
    return images, seeds_by_method


def seed_averaged_scores(
    records: Sequence[MetricRecord],
    method: str,
    metric: str,
    images: Sequence[str],
    seeds: Sequence[Optional[int]],
) -> Dict[str, float]:
    table: Dict[str, Dict[Optional[int], float]] = {image_id: {} for image_id in images}
    for record in records:
        if record.method == method:
            table[record.image_id][record.seed] = record.score(metric)
    return {image_id: seed_average(table[image_id], seeds) for image_id in images}


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    std = float(array.std(ddof=1)) if array.size > 1 else 0.0
    return float(array.mean()), std


def aggregate(records: Sequence[MetricRecord], manifest: RunManifest) -> Dict[str, Any]:
    """Per-method, core/thin, robustness and pairwise-significance tables.

    Scores are averaged over seeds per image first; means and standard
    deviations are then taken across images.
    """
    manifest.validate()
    images, seeds_by_method = check_grid(records, manifest)
    metric = manifest.metric

    averaged: Dict[str, Dict[str, Dict[str, float]]] = {
        method: {
            m: seed_averaged_scores(records, method, m, images, seeds_by_method[method]) for m in METRICS
        }
        for method in manifest.methods
    }

    per_method = []
    for method in manifest.methods:
        row: Dict[str, Any] = {"method": method, "n_images": len(images), "n_seeds": len(seeds_by_method[method])}
        for m in METRICS:
            mean, std = _mean_std([averaged[method][m][i] for i in images])
            row[f"{m}_mean"] = mean
            row[f"{m}_std"] = std
        per_method.append(row)

    core = [i for i in images if i in manifest.split.core_ids]
    thin = [i for i in images if i in manifest.split.thin_ids]
    core_thin = []
    for method in manifest.methods:
        scores = averaged[method][metric]
        entry: Dict[str, Any] = {"method": method, "n_core": len(core), "n_thin": len(thin)}
        entry["core_mean"] = float(np.mean([scores[i] for i in core])) if core else None
        entry["thin_mean"] = float(np.mean([scores[i] for i in thin])) if thin else None
        entry["gap"] = core_thin_gap([scores[i] for i in core], [scores[i] for i in thin]) if core and thin else None
        core_thin.append(entry)

    reference = manifest.reference_method or manifest.methods[0]
    if reference not in manifest.methods:
        raise ValueError(f"Reference method {reference!r} is not listed in the manifest")
    reference_scores = [averaged[reference][metric][i] for i in images]
    robustness = []
    for method in manifest.methods:
        profile = robustness_profile([averaged[method][metric][i] for i in images], reference_scores)
        robustness.append(
            {
                "method": method,
                "reference": reference,
                "mean": profile.mean,
                "median": profile.median,
                "iqr": profile.iqr,
                "min": profile.min,
                "max": profile.max,
                "wins": profile.wins,
                "n": profile.n,
            }
        )

    pairs = list(itertools.combinations(manifest.methods, 2))
    comparisons = max(1, math.comb(len(manifest.methods), 2))
    pairwise = []
    for a, b in pairs:
        sample = PairedSample(
            labels=tuple(images),
            a=tuple(averaged[a][metric][i] for i in images),
            b=tuple(averaged[b][metric][i] for i in images),
        )
        result = wilcoxon_signed_rank(sample, comparisons=comparisons)
        effect = effect_size(sample)
        pairwise.append(
            {
                "a": a,
                "b": b,
                "w": result.w_statistic,
                "n_effective": result.n_effective,
                "p": result.p_value,
                "exact": result.exact,
                "alpha_corr": result.alpha,
                "significant": result.significant,
                "mean_delta": effect.mean_delta,
                "std_delta": effect.std_delta,
                "median_delta": effect.median_delta,
            }
        )

    LOGGER.info(
        "Aggregated %d records: %d methods x %d images, %d pairwise tests",
        len(records),
        len(manifest.methods),
        len(images),
        len(pairwise),
    )
    return {
        "per_method": per_method,
        "core_thin": core_thin,
        "robustness": robustness,
        "pairwise": pairwise,
    }


def report_metadata(manifest: RunManifest, extra: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """Protocol choices that shift reproduced numbers and therefore travel with every report."""
    metadata: Dict[str, Any] = {
        "tested_metric": manifest.metric,
        "band_variant": manifest.band_variant,
        "tolerance_base": manifest.tolerance_base,
        "std_definition": "seed-averaged per image, sample std (n-1) across images",
        "quantile_method": "linear interpolation at q*(n-1)",
        "wilcoxon_zero_method": "discard zero differences",
        "wilcoxon_sidedness": "two-sided",
        "gray_weights": list(manifest.gray_weights),
    }
    if extra:
        metadata.update(extra)
    return metadata


def build_report(
    records: Iterable[MetricRecord],
    manifest: RunManifest,
    extra_metadata: Optional[Mapping[str, Any]] = None,
) -> Dict[str, Any]:
    ordered = sorted(records, key=MetricRecord.sort_key)
    return {
        "manifest": manifest.to_dict(),
        "metadata": report_metadata(manifest, extra_metadata),
        "records": [r.to_dict() for r in ordered],
        "tables": aggregate(ordered, manifest),
    }


def is_excluded_variant(filename: str, test_ids: Iterable[str]) -> bool:
    """True for augmented variants of held-out images (``image_<id>_aug*``)."""
    return any(filename.startswith(f"image_{image_id}_aug") for image_id in test_ids)


class MismatchedImageSetError(ValueError):
    """Raised when two reports cover different image ids."""

    def __init__(self, only_a: Sequence[str], only_b: Sequence[str]) -> None:
        self.only_a = list(only_a)
        self.only_b = list(only_b)
        self.missing = self.only_a + self.only_b
        parts = []
        if self.only_a:
            parts.append(f"only in first: {', '.join(self.only_a)}")
        if self.only_b:
            parts.append(f"only in second: {', '.join(self.only_b)}")
        super().__init__("Image sets differ; " + "; ".join(parts))


def characterize(masks: Mapping[str, BinaryMask], split: SplitSpec = SplitSpec()) -> Dict[str, Any]:
    """Per-image coverage and width plus all/core/thin summaries."""
    ordered = sorted(masks, key=image_sort_key)
    stats = [characterize_mask(image_id, masks[image_id]) for image_id in ordered]
    undefined = [s.image_id for s in stats if not s.width_defined]
    if undefined:
        LOGGER.warning("Stroke width undefined for %d empty masks: %s", len(undefined), ", ".join(undefined))
    return {
        "images": [s.to_dict() for s in stats],
        "summary": summarize_strokes(stats, split),
    }


def per_image_scores(records: Sequence[MetricRecord], metric: str) -> Tuple[str, Dict[str, float]]:
    """Seed-averaged score per image for a single-method record set."""
    methods = sorted({r.method for r in records})
    if len(methods) != 1:
        raise ValueError(f"Expected records for exactly one method, found {methods}")
    by_image: Dict[str, Dict[Optional[int], float]] = {}
    for record in records:
        by_image.setdefault(record.image_id, {})[record.seed] = record.score(metric)
    seed_sets = {frozenset(scores) for scores in by_image.values()}
    if len(seed_sets) > 1:
        raise ValueError(f"Method {methods[0]!r} has differing seed sets across images")
    seeds = sorted(next(iter(seed_sets)), key=lambda s: -1 if s is None else s) if seed_sets else []
    return methods[0], {image_id: seed_average(scores, seeds) for image_id, scores in by_image.items()}


def compare_records(
    records_a: Sequence[MetricRecord],
    records_b: Sequence[MetricRecord],
    metric: str = "f1",
    comparisons: int = 1,
) -> Dict[str, Any]:
    """Seed-average each side per image, then run the paired test and effect sizes."""
    method_a, scores_a = per_image_scores(records_a, metric)
    method_b, scores_b = per_image_scores(records_b, metric)
    only_a = sorted(set(scores_a) - set(scores_b), key=image_sort_key)
    only_b = sorted(set(scores_b) - set(scores_a), key=image_sort_key)
    if only_a or only_b:
        raise MismatchedImageSetError(only_a, only_b)
    images = sorted(scores_a, key=image_sort_key)
    sample = PairedSample(
        labels=tuple(images),
        a=tuple(scores_a[i] for i in images),
        b=tuple(scores_b[i] for i in images),
    )
    result = wilcoxon_signed_rank(sample, comparisons=comparisons)
    effect = effect_size(sample)
    return {
        "a": method_a,
        "b": method_b,
        "metric": metric,
        "n_images": len(images),
        "w": result.w_statistic,
        "n_effective": result.n_effective,
        "p": result.p_value,
        "exact": result.exact,
        "alpha_corr": result.alpha,
        "significant": result.significant,
        "degenerate": result.degenerate,
        "mean_delta": effect.mean_delta,
        "std_delta": effect.std_delta,
        "median_delta": effect.median_delta,
    }


__all__ = [
    "aggregate",
    "build_report",
    "characterize",
    "characterize_mask",
    "check_grid",
    "compare_records",
    "DEFAULT_CORE_IDS",
    "DEFAULT_SEEDS",
    "DEFAULT_THIN_IDS",
    "error_overlay",
    "evaluate_pair",
    "EvaluationOptions",
    "image_sort_key",
    "IncompleteGridError",
    "is_excluded_variant",
    "MetricRecord",
    "METRICS",
    "MismatchedImageSetError",
    "per_image_scores",
    "report_metadata",
    "RunManifest",
    "seed_averaged_scores",
    "SplitSpec",
    "StrokeStats",
    "stroke_coverage",
    "stroke_width",
    "summarize_strokes",
]
