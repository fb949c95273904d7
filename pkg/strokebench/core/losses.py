"""Training objectives evaluated on probability maps, with analytic gradients.

Every loss returns its value and the gradient with respect to the stroke
probabilities. Probabilities are clamped to ``[EPS, 1 - EPS]`` first and
gradients are taken at the clamped values. Pixel-wise losses use the mean
over pixels.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from .imgcore import BinaryMask, DimensionMismatchError

LOGGER = logging.getLogger(__name__)

EPS = 1e-7

ALPHA_UNIFORM = "uniform"
ALPHA_CLASS = "class"


@dataclass(frozen=True, eq=False)
class ProbMap:
    """Per-pixel stroke probability in ``[0, 1]``."""

    data: np.ndarray

    def __post_init__(self) -> None:
        array = np.array(self.data, dtype=np.float64)
        if array.ndim != 2:
            raise ValueError(f"ProbMap expects (height, width) data, got shape {array.shape}")
        if array.size and (array.min() < 0.0 or array.max() > 1.0):
            raise ValueError("ProbMap values must lie in [0, 1]")
        array.flags.writeable = False
        object.__setattr__(self, "data", array)

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])


@dataclass(frozen=True)
class LossParams:
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    focal_alpha_mode: str = ALPHA_UNIFORM
    dice_eps: float = 1.0
    tversky_alpha: float = 0.3
    tversky_beta: float = 0.7
    tversky_eps: float = 1.0
    combo_dice_weight: float = 0.6
    combo_focal_weight: float = 0.4

    def __post_init__(self) -> None:
        numeric = (
            self.focal_alpha,
            self.focal_gamma,
            self.dice_eps,
            self.tversky_alpha,
            self.tversky_beta,
            self.tversky_eps,
            self.combo_dice_weight,
            self.combo_focal_weight,
        )
        if any(value < 0 for value in numeric):
            raise ValueError("Loss parameters must be non-negative")
        if not np.isclose(self.combo_dice_weight + self.combo_focal_weight, 1.0):
            raise ValueError("Dice+Focal weights must sum to 1")
        if self.focal_alpha_mode not in (ALPHA_UNIFORM, ALPHA_CLASS):
            raise ValueError(f"Unknown focal alpha mode {self.focal_alpha_mode!r}")


@dataclass(frozen=True, eq=False)
class LossResult:
    value: float
    gradient: np.ndarray


def _prepare(p: ProbMap, g: BinaryMask) -> tuple[np.ndarray, np.ndarray]:
    if p.data.shape != g.data.shape:
        raise DimensionMismatchError(
            f"Probability map {p.width}x{p.height} does not match mask {g.width}x{g.height}"
        )
    return np.clip(p.data, EPS, 1.0 - EPS), g.data.astype(np.float64)


def ce_loss(p: ProbMap, g: BinaryMask, params: LossParams = LossParams()) -> LossResult:
    probs, target = _prepare(p, g)
    n = probs.size
    value = -np.mean(target * np.log(probs) + (1.0 - target) * np.log(1.0 - probs))
    gradient = (-target / probs + (1.0 - target) / (1.0 - probs)) / n
    return LossResult(float(value), gradient)


def focal_loss(p: ProbMap, g: BinaryMask, params: LossParams = LossParams()) -> LossResult:
    """-alpha * (1 - p_t)^gamma * ln(p_t), averaged over pixels."""
    probs, target = _prepare(p, g)
    n = probs.size
    gamma = params.focal_gamma
    p_t = np.where(target > 0, probs, 1.0 - probs)
    if params.focal_alpha_mode == ALPHA_CLASS:
        alpha = np.where(target > 0, params.focal_alpha, 1.0 - params.focal_alpha)
    else:
        alpha = np.full_like(probs, params.focal_alpha)

    log_pt = np.log(p_t)
    miss = 1.0 - p_t
    value = np.mean(-alpha * miss**gamma * log_pt)

    # d/dp_t of -a (1-p_t)^g ln p_t
    d_pt = alpha * gamma * miss ** (gamma - 1.0) * log_pt - alpha * miss**gamma / p_t
    sign = np.where(target > 0, 1.0, -1.0)
    return LossResult(float(value), d_pt * sign / n)


def dice_loss(p: ProbMap, g: BinaryMask, params: LossParams = LossParams()) -> LossResult:
    """1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps)."""
    probs, target = _prepare(p, g)
    eps = params.dice_eps
    numerator = 2.0 * np.sum(probs * target) + eps
    denominator = np.sum(probs) + np.sum(target) + eps
    value = 1.0 - numerator / denominator
    gradient = -(2.0 * target * denominator - numerator) / denominator**2
    return LossResult(float(value), gradient)


def tversky_loss(p: ProbMap, g: BinaryMask, params: LossParams = LossParams()) -> LossResult:
    """1 - (TP + eps) / (TP + alpha FP + beta FN + eps) on soft counts."""
    probs, target = _prepare(p, g)
    alpha, beta, eps = params.tversky_alpha, params.tversky_beta, params.tversky_eps
    tp = np.sum(probs * target)
    fp = np.sum(probs * (1.0 - target))
    fn = np.sum((1.0 - probs) * target)
    numerator = tp + eps
    denominator = tp + alpha * fp + beta * fn + eps
    value = 1.0 - numerator / denominator
    d_denominator = target + alpha * (1.0 - target) - beta * target
    gradient = -(target * denominator - numerator * d_denominator) / denominator**2
    return LossResult(float(value), gradient)


def dice_focal_loss(p: ProbMap, g: BinaryMask, params: LossParams = LossParams()) -> LossResult:
    dice = dice_loss(p, g, params)
    focal = focal_loss(p, g, params)
    wd, wf = params.combo_dice_weight, params.combo_focal_weight
    return LossResult(wd * dice.value + wf * focal.value, wd * dice.gradient + wf * focal.gradient)


LossFn = Callable[[ProbMap, BinaryMask, LossParams], LossResult]

LOSSES: Dict[str, LossFn] = {
    "ce": ce_loss,
    "focal": focal_loss,
    "dice": dice_loss,
    "dice_focal": dice_focal_loss,
    "tversky": tversky_loss,
}


def finite_difference_check(
    fn: LossFn,
    p: ProbMap,
    g: BinaryMask,
    params: LossParams = LossParams(),
    h: float = 1e-4,
) -> float:
    """Largest absolute gap between the analytic gradient and central differences."""
    analytic = fn(p, g, params).gradient
    base = p.data.copy()
    numeric = np.empty_like(base)
    for index in np.ndindex(base.shape):
        plus = base.copy()
        minus = base.copy()
        plus[index] += h
        minus[index] -= h
        numeric[index] = (
            fn(ProbMap(np.clip(plus, 0, 1)), g, params).value - fn(ProbMap(np.clip(minus, 0, 1)), g, params).value
        ) / (2.0 * h)
    error = float(np.max(np.abs(numeric - analytic)))
    LOGGER.debug("%s finite-difference error %.3e", getattr(fn, "__name__", fn), error)
    return error


def tversky_dice_residual(p: ProbMap, g: BinaryMask, params: LossParams = LossParams()) -> float:
    """|Tversky(0.5, 0.5, eps / 2) - Dice(eps)|, zero up to rounding on every input."""
    halved = LossParams(tversky_alpha=0.5, tversky_beta=0.5, tversky_eps=params.dice_eps / 2.0, dice_eps=params.dice_eps)
    return abs(tversky_loss(p, g, halved).value - dice_loss(p, g, halved).value)


__all__ = [
    "ALPHA_CLASS",
    "ALPHA_UNIFORM",
    "EPS",
    "LOSSES",
    "LossParams",
    "LossResult",
    "ProbMap",
    "ce_loss",
    "dice_focal_loss",
    "dice_loss",
    "finite_difference_check",
    "focal_loss",
    "tversky_dice_residual",
    "tversky_loss",
]
