"""Subcommands of the ``strokebench`` command line."""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from ..core import classical_baselines as baselines
from ..core.augment import generate_offline, write_variants
from ..core.boundary_metrics import BAND_VARIANTS
from ..core.imgcore import BinaryMask, GrayImage, RgbImage, load_image, load_mask, resize_nearest, save_png, to_gray
from ..core.losses import (
    ALPHA_CLASS,
    ALPHA_UNIFORM,
    LOSSES,
    LossParams,
    ProbMap,
    finite_difference_check,
    tversky_dice_residual,
)
from ..core.protocol import (
    METRICS,
    EvaluationOptions,
    MetricRecord,
    RunManifest,
    SplitSpec,
    build_report,
    characterize,
    compare_records,
    error_overlay,
    evaluate_pair,
    report_metadata,
)
from ..data.config_manager import ToolConfig, resolve_threads
from ..data.dataset_scanner import PairedFiles, PairingResult, pair_directories, scan_images
from ..data.report_io import load_manifest, load_records, load_split, write_json
from . import tables

LOGGER = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

GRADIENT_TOLERANCE = 1e-5
IDENTITY_TOLERANCE = 1e-12


class UsageError(Exception):
    """Bad flags or flag combinations; maps to exit code 1."""


class CliParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class CliContext:
    config: ToolConfig
    threads: int


def parse_weights(raw: str) -> Tuple[float, float, float]:
    try:
        values = tuple(float(part) for part in raw.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected R,G,B floats, got {raw!r}") from exc
    if len(values) != 3 or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"expected three non-negative weights, got {raw!r}")
    return values  # type: ignore[return-value]


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> List[R]:
    """Order-preserving map over a thread pool; results never depend on ``threads``."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def _require_pairs(pairing: PairingResult, first: Path, second: Path) -> List[PairedFiles]:
    if not pairing.complete:
        for path in pairing.only_first:
            LOGGER.error("Unpaired file in %s: %s", first, path.name)
        for path in pairing.only_second:
            LOGGER.error("Unpaired file in %s: %s", second, path.name)
        raise ValueError(f"{len(pairing.only_first) + len(pairing.only_second)} unpaired files")
    if not pairing.pairs:
        raise ValueError(f"No image pairs found between {first} and {second}")
    return list(pairing.pairs)


def _evaluation_options(args: argparse.Namespace, ctx: CliContext) -> EvaluationOptions:
    return EvaluationOptions(
        band_variant=args.band_variant or ctx.config.band_variant,
        tolerance_base=args.tolerance_base or ctx.config.tolerance_base,
    )


def _fragment(records: Sequence[MetricRecord], manifest: RunManifest, extra: Dict[str, Any]) -> Dict[str, Any]:
    ordered = sorted(records, key=MetricRecord.sort_key)
    return {
        "manifest": manifest.to_dict(),
        "metadata": report_metadata(manifest, extra),
        "records": [r.to_dict() for r in ordered],
    }


def cmd_evaluate(args: argparse.Namespace, ctx: CliContext) -> int:
    opts = _evaluation_options(args, ctx)
    pairs = _require_pairs(pair_directories(args.pred_dir, args.gt_dir), args.pred_dir, args.gt_dir)
    want_overlay = args.overlay_dir is not None

    def _one(pair: PairedFiles) -> Tuple[MetricRecord, Optional[RgbImage]]:
        pred = load_mask(pair.first)
        gt = load_mask(pair.second)
        if pred.shape != gt.shape:
            pred = resize_nearest(pred, gt.width, gt.height)
        record = evaluate_pair(pred, gt, pair.image_id, args.method, args.seed, opts)
        LOGGER.info("Evaluated image %s: F1 %.3f, BF1 %.3f", pair.image_id, record.f1, record.bf1)
        return record, error_overlay(pred, gt) if want_overlay else None

    results = parallel_map(_one, pairs, ctx.threads)
    records = [record for record, _ in results]
    if want_overlay:
        for pair, (_, overlay) in zip(pairs, results):
            save_png(args.overlay_dir / f"image_{pair.image_id}_overlay.png", overlay)

    manifest = RunManifest(
        dataset_root=str(args.gt_dir),
        methods=[args.method],
        seeds=[] if args.seed is None else [args.seed],
        band_variant=opts.band_variant,
        tolerance_base=opts.tolerance_base,
    )
    write_json(args.out, _fragment(records, manifest, {}))
    _emit(tables.render([tables.records_table([r.to_dict() for r in sorted(records, key=MetricRecord.sort_key)])]))
    return EXIT_OK


def _baseline_params(args: argparse.Namespace, config: ToolConfig):
    try:
        if args.method == baselines.ADAPTIVE:
            return baselines.AdaptiveParams(
                block=args.block if args.block is not None else config.adaptive_block,
                c=args.c if args.c is not None else config.adaptive_c,
            )
        if args.method == baselines.SAUVOLA:
            return baselines.SauvolaParams(
                window=args.window if args.window is not None else config.sauvola_window,
                k=args.k if args.k is not None else config.sauvola_k,
                r=args.r if args.r is not None else config.sauvola_r,
            )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return None


def _baseline_metadata(method: str, params: Any) -> Dict[str, Any]:
    if isinstance(params, baselines.AdaptiveParams):
        return {"baseline": method, "adaptive_block": params.block, "adaptive_c": params.c, "border_policy": "replicate"}
    if isinstance(params, baselines.SauvolaParams):
        return {
            "baseline": method,
            "sauvola_window": params.window,
            "sauvola_k": params.k,
            "sauvola_r": params.r,
            "border_policy": "clip",
        }
    return {"baseline": method}


def cmd_baseline(args: argparse.Namespace, ctx: CliContext) -> int:
    params = _baseline_params(args, ctx.config)
    weights = args.gray_weights or ctx.config.gray_weights
    opts = _evaluation_options(args, ctx)
    pairs = _require_pairs(pair_directories(args.images_dir, args.gt_dir), args.images_dir, args.gt_dir)

    def _one(pair: PairedFiles) -> Tuple[MetricRecord, BinaryMask]:
        image = load_image(pair.first)
        gray = image if isinstance(image, GrayImage) else to_gray(image, weights)
        result = baselines.run_baseline(gray, args.method, params)
        gt = load_mask(pair.second)
        record = evaluate_pair(result.mask, gt, pair.image_id, args.method, None, opts)
        LOGGER.info("%s on image %s: F1 %.3f", args.method, pair.image_id, record.f1)
        return record, result.mask

    results = parallel_map(_one, pairs, ctx.threads)
    if args.masks_dir is not None:
        for pair, (_, mask) in zip(pairs, results):
            save_png(args.masks_dir / f"image_{pair.image_id}_mask.png", mask)

    records = [record for record, _ in results]
    manifest = RunManifest(
        dataset_root=str(args.gt_dir),
        methods=[args.method],
        seeds=[],
        band_variant=opts.band_variant,
        tolerance_base=opts.tolerance_base,
        gray_weights=tuple(weights),
    )
    write_json(args.out, _fragment(records, manifest, _baseline_metadata(args.method, params)))
    _emit(tables.render([tables.records_table([r.to_dict() for r in sorted(records, key=MetricRecord.sort_key)])]))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, ctx: CliContext) -> int:
    metric = args.metric or ctx.config.metric
    result = compare_records(load_records(args.a), load_records(args.b), metric, comparisons=args.comparisons)
    verdict = "significant" if result["significant"] else "n.s."
    LOGGER.info("%s vs %s on %s: p = %.6f (%s)", result["a"], result["b"], metric, result["p"], verdict)
    if args.out is not None:
        write_json(args.out, {"comparison": result})
    _emit(tables.render([tables.comparison_table([result], f"Paired comparison ({metric})")]))
    return EXIT_OK


def _report_manifest(args: argparse.Namespace, ctx: CliContext, records: Sequence[MetricRecord]) -> RunManifest:
    manifest = load_manifest(args.manifest) if args.manifest else RunManifest()
    if not manifest.methods:
        manifest.methods = list(dict.fromkeys(r.method for r in records))
    if args.seeds:
        manifest.seeds = list(args.seeds)
    elif not args.manifest:
        observed = sorted({r.seed for r in records if r.seed is not None})
        manifest.seeds = observed or list(ctx.config.seeds)
    if args.split:
        manifest.split = load_split(args.split)
    if args.reference:
        manifest.reference_method = args.reference
    manifest.metric = args.metric or (manifest.metric if args.manifest else ctx.config.metric)
    return manifest


def cmd_report(args: argparse.Namespace, ctx: CliContext) -> int:
    records: List[MetricRecord] = []
    for path in args.records:
        records.extend(load_records(path))
    if not records:
        raise ValueError("No records found in the given files")
    manifest = _report_manifest(args, ctx, records)
    report = build_report(records, manifest)
    if args.out is not None:
        write_json(args.out, report)
    _emit(tables.render(tables.report_tables(report["tables"], manifest.metric)))
    return EXIT_OK


def cmd_characterize(args: argparse.Namespace, ctx: CliContext) -> int:
    files = scan_images(args.masks_dir)
    if not files:
        raise ValueError(f"No masks found in {args.masks_dir}")
    split = load_split(args.split) if args.split else SplitSpec()
    ids = sorted(files)
    masks = dict(zip(ids, parallel_map(lambda i: load_mask(files[i]), ids, ctx.threads)))
    result = characterize(masks, split)
    if args.json is not None:
        write_json(args.json, result)
    _emit(tables.render(tables.characterization_tables(result)))
    return EXIT_OK


def cmd_augment(args: argparse.Namespace, ctx: CliContext) -> int:
    pairs = _require_pairs(pair_directories(args.images_dir, args.masks_dir), args.images_dir, args.masks_dir)
    variants = args.variants if args.variants is not None else ctx.config.variants
    master_seed = args.master_seed if args.master_seed is not None else ctx.config.master_seed
    if variants < 1:
        raise UsageError(f"--variants must be >= 1, got {variants}")
    held_out = set(SplitSpec().test_ids if args.split is None else load_split(args.split).test_ids)
    written = 0
    for pair in pairs:
        if args.skip_test_ids and pair.image_id in held_out:
            LOGGER.info("Skipping held-out image %s", pair.image_id)
            continue
        image = load_image(pair.first)
        rgb = image if isinstance(image, RgbImage) else RgbImage(np.repeat(image.data[:, :, None], 3, axis=2))
        mask = load_mask(pair.second)
        batch = generate_offline(rgb, mask, pair.image_id, variants, master_seed, workers=ctx.threads)
        write_variants(args.out_dir, batch)
        written += len(batch)
    LOGGER.info("Wrote %d variants to %s", written, args.out_dir)
    return EXIT_OK


def cmd_loss_check(args: argparse.Namespace, ctx: CliContext) -> int:
    if args.trials < 1 or args.size < 1:
        raise UsageError("--trials and --size must be >= 1")
    params = LossParams(focal_alpha_mode=args.alpha_mode)
    rng = np.random.default_rng(args.seed)
    worst = {name: 0.0 for name in LOSSES}
    worst_identity = 0.0
    for _ in range(args.trials):
        p = ProbMap(rng.uniform(0.05, 0.95, size=(args.size, args.size)))
        g = BinaryMask(rng.random((args.size, args.size)) < 0.3)
        for name, fn in LOSSES.items():
            worst[name] = max(worst[name], finite_difference_check(fn, p, g, params))
        worst_identity = max(worst_identity, tversky_dice_residual(p, g, params))

    rows = [{"method": name, "max_error": error, "passed": error <= GRADIENT_TOLERANCE} for name, error in worst.items()]
    rows.append(
        {"method": "tversky(0.5,0.5) = dice", "max_error": worst_identity, "passed": worst_identity <= IDENTITY_TOLERANCE}
    )
    _emit(tables.render([tables.loss_check_table(rows)]))
    failed = [row["method"] for row in rows if not row["passed"]]
    if failed:
        LOGGER.error("Gradient check failed for: %s", ", ".join(failed))
        return EXIT_DATA
    return EXIT_OK


def _add_evaluation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, required=True, help="report JSON to write")
    parser.add_argument(
        "--band-variant",
        choices=BAND_VARIANTS,
        help="B-IoU band: inner bands of both masks, or of the ground truth only (config default: both)",
    )
    parser.add_argument(
        "--tolerance-base",
        type=int,
        help="BF1 tolerance tau = max(1, round(2 * max(H, W) / base)); tau = 1 at 1024x768 (config default: 1536)",
    )


def build_parser() -> CliParser:
    parser = CliParser(
        prog="strokebench",
        description="Boundary-aware evaluation of binary stroke segmentation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    parser.add_argument("--threads", type=int, help="worker threads; 0 = all cores (env STROKEBENCH_THREADS)")
    parser.add_argument("--config", type=Path, help="config JSON instead of ~/.config/strokebench/config.json")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    evaluate = sub.add_parser("evaluate", help="score predicted masks against ground truth")
    evaluate.add_argument("pred_dir", type=Path)
    evaluate.add_argument("gt_dir", type=Path)
    evaluate.add_argument("--method", default="model", help="method name stored in every record")
    evaluate.add_argument("--seed", type=int, help="training seed of this prediction set")
    evaluate.add_argument("--overlay-dir", type=Path, help="write TP/FN/FP overlays here")
    _add_evaluation_flags(evaluate)
    evaluate.set_defaults(handler=cmd_evaluate)

    baseline = sub.add_parser(
        "baseline",
        help="run a classical binarizer at native resolution",
        description=(
            "otsu: global threshold maximising between-class variance. "
            "adaptive: stroke if v < gaussian local mean - C (block 51, C 15). "
            "sauvola: stroke if v < m * (1 + k * (s / R - 1)) (window 51, k 0.2, R 128)."
        ),
    )
    baseline.add_argument("images_dir", type=Path)
    baseline.add_argument("gt_dir", type=Path)
    baseline.add_argument("--method", choices=baselines.METHODS, required=True)
    baseline.add_argument("--masks-dir", type=Path, help="write predicted masks here")
    baseline.add_argument("--block", type=int, help="adaptive block size, odd (default 51)")
    baseline.add_argument("--c", type=float, help="adaptive offset C (default 15)")
    baseline.add_argument("--window", type=int, help="sauvola window, odd (default 51)")
    baseline.add_argument("--k", type=float, help="sauvola k (default 0.2)")
    baseline.add_argument("--r", type=float, help="sauvola dynamic range R (default 128)")
    baseline.add_argument(
        "--gray-weights", type=parse_weights, help="grayscale weights R,G,B (default 0.299,0.587,0.114)"
    )
    _add_evaluation_flags(baseline)
    baseline.set_defaults(handler=cmd_baseline)

    compare = sub.add_parser("compare", help="paired Wilcoxon test between two reports")
    compare.add_argument("a", type=Path)
    compare.add_argument("b", type=Path)
    compare.add_argument("--metric", choices=METRICS, help="tested metric (config default: f1)")
    compare.add_argument("--comparisons", type=int, default=1, help="Bonferroni family size m; alpha = 0.05 / m")
    compare.add_argument("--out", type=Path, help="comparison JSON to write")
    compare.set_defaults(handler=cmd_compare)

    report = sub.add_parser("report", help="aggregate records into the full table set")
    report.add_argument("records", type=Path, nargs="+")
    report.add_argument("--split", type=Path, help="JSON with core_ids / thin_ids")
    report.add_argument("--manifest", type=Path, help="run manifest JSON")
    report.add_argument("--seeds", type=int, nargs="+", help="expected seeds (default: seeds found in the records)")
    report.add_argument("--metric", choices=METRICS, help="tested metric (config default: f1)")
    report.add_argument("--reference", help="reference method for robustness wins (default: first method)")
    report.add_argument("--out", type=Path, help="report JSON to write")
    report.set_defaults(handler=cmd_report)

    character = sub.add_parser("characterize", help="stroke coverage and width per mask")
    character.add_argument("masks_dir", type=Path)
    character.add_argument("--split", type=Path, help="JSON with core_ids / thin_ids")
    character.add_argument("--json", type=Path, help="statistics JSON to write")
    character.set_defaults(handler=cmd_characterize)

    augment = sub.add_parser("augment", help="write seeded offline augmentation variants")
    augment.add_argument("images_dir", type=Path)
    augment.add_argument("masks_dir", type=Path)
    augment.add_argument("out_dir", type=Path)
    augment.add_argument("--variants", type=int, help="variants per image (config default: 10)")
    augment.add_argument("--master-seed", type=int, help="master seed (config default: 0)")
    augment.add_argument("--split", type=Path, help="JSON with core_ids / thin_ids")
    augment.add_argument("--skip-test-ids", action="store_true", help="leave core and thin test images out")
    augment.set_defaults(handler=cmd_augment)

    loss = sub.add_parser("loss-check", help="verify loss gradients against central differences")
    loss.add_argument("--trials", type=int, default=100)
    loss.add_argument("--size", type=int, default=8)
    loss.add_argument("--seed", type=int, default=0)
    loss.add_argument("--alpha-mode", choices=(ALPHA_UNIFORM, ALPHA_CLASS), default=ALPHA_UNIFORM)
    loss.set_defaults(handler=cmd_loss_check)

    return parser


def dispatch(args: argparse.Namespace, config: ToolConfig) -> int:
    try:
        threads = resolve_threads(args.threads, config)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ctx = CliContext(config=config, threads=threads)
    LOGGER.debug("Running %s with %d threads", args.command, ctx.threads)
    return args.handler(args, ctx)


__all__ = [
    "EXIT_DATA",
    "EXIT_OK",
    "EXIT_USAGE",
    "UsageError",
    "build_parser",
    "dispatch",
    "parallel_map",
]
