"""Paired nonparametric testing, effect sizes and robustness profiles.

Zero differences are dropped before ranking (the classical Wilcoxon
treatment). For up to ``EXACT_LIMIT`` non-zero differences the two-sided
p-value is the exact share of the ``2**n`` equally likely sign assignments,
counted through the distribution of doubled (hence integral) average ranks;
beyond that a tie-corrected normal approximation with continuity correction
is used.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats as sps

LOGGER = logging.getLogger(__name__)

EXACT_LIMIT = 20
FAMILY_ALPHA = 0.05
QUANTILE_METHOD = "linear"


@dataclass(frozen=True)
class PairedSample:
    labels: tuple[str, ...]
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (len(self.labels) == len(self.a) == len(self.b)):
            raise ValueError(
                f"Paired sample lengths differ: {len(self.labels)} labels, {len(self.a)} vs {len(self.b)} scores"
            )
        object.__setattr__(self, "labels", tuple(str(label) for label in self.labels))
        object.__setattr__(self, "a", tuple(float(value) for value in self.a))
        object.__setattr__(self, "b", tuple(float(value) for value in self.b))

    @property
    def differences(self) -> np.ndarray:
        return np.asarray(self.a, dtype=np.float64) - np.asarray(self.b, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class WilcoxonResult:
    w_statistic: float
    n_effective: int
    p_value: float
    exact: bool
    significant: bool
    alpha: float = FAMILY_ALPHA
    degenerate: bool = False


@dataclass(frozen=True)
class EffectSize:
    mean_delta: float
    std_delta: float
    median_delta: float


@dataclass(frozen=True)
class RobustnessProfile:
    mean: float
    median: float
    iqr: float
    min: float
    max: float
    wins: int
    n: int
    q1: float
    q3: float


def bonferroni(p: float, m: int = 10, alpha: float = FAMILY_ALPHA) -> tuple[float, bool]:
    """Return ``(alpha / m, p < alpha / m)``."""
    if m < 1:
        raise ValueError(f"Number of comparisons must be >= 1, got {m}")
    alpha_corr = alpha / m
    return alpha_corr, p < alpha_corr


def _exact_lower_tail(doubled_ranks: np.ndarray, w_doubled: int) -> float:
    """P(W+ <= w) under the null, counted over all sign assignments."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for rank in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[rank:] = counts[: total + 1 - rank]
        counts = counts + shifted
    return float(counts[: w_doubled + 1].sum() / 2.0 ** len(doubled_ranks))


def wilcoxon_signed_rank(
    s: PairedSample,
    comparisons: int = 1,
    alpha: float = FAMILY_ALPHA,
) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test of ``a`` against ``b``."""
    d = s.differences
    d = d[d != 0.0]
    n = int(d.size)
    if n == 0:
        alpha_corr, _ = bonferroni(1.0, comparisons, alpha)
        LOGGER.warning("All %d paired differences are zero; returning p = 1", len(s))
        return WilcoxonResult(0.0, 0, 1.0, True, False, alpha_corr, degenerate=True)

    ranks = sps.rankdata(np.abs(d), method="average")
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    if n <= EXACT_LIMIT:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        p_value = min(1.0, 2.0 * _exact_lower_tail(doubled, int(round(2.0 * w))))
        exact = True
    else:
        _, tie_counts = np.unique(ranks, return_counts=True)
        mean_w = n * (n + 1) / 4.0
        variance = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        z = max(abs(w - mean_w) - 0.5, 0.0) / math.sqrt(variance)
        p_value = min(1.0, float(2.0 * sps.norm.sf(z)))
        exact = False

    alpha_corr, significant = bonferroni(p_value, comparisons, alpha)
    return WilcoxonResult(
        w_statistic=w,
        n_effective=n,
        p_value=p_value,
        exact=exact,
        significant=significant,
        alpha=alpha_corr,
    )


def effect_size(s: PairedSample) -> EffectSize:
    """Mean, sample standard deviation and median of ``a - b``."""
    if len(s) == 0:
        raise ValueError("Effect size needs at least one pair")
    d = s.differences
    std = float(np.std(d, ddof=1)) if d.size > 1 else 0.0
    return EffectSize(float(np.mean(d)), std, float(np.median(d)))


def quantile(values: Sequence[float], q: float) -> float:
    """Linear interpolation between order statistics at position ``q * (n - 1)``."""
    return float(np.quantile(np.asarray(values, dtype=np.float64), q, method=QUANTILE_METHOD))


def robustness_profile(scores: Sequence[float], reference: Sequence[float]) -> RobustnessProfile:
    if len(scores) != len(reference):
        raise ValueError(f"Score lists differ in length: {len(scores)} vs {len(reference)}")
    if not scores:
        raise ValueError("Robustness profile needs at least one score")
    values = np.asarray(scores, dtype=np.float64)
    wins = int(np.count_nonzero(values > np.asarray(reference, dtype=np.float64)))
    q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75], method=QUANTILE_METHOD)
    return RobustnessProfile(
        mean=float(values.mean()),
        median=float(median),
        iqr=float(q3 - q1),
        min=float(values.min()),
        max=float(values.max()),
        wins=wins,
        n=int(values.size),
        q1=float(q1),
        q3=float(q3),
    )


def core_thin_gap(core_scores: Sequence[float], thin_scores: Sequence[float]) -> float:
    """mean(core) - mean(thin); negative when the thin subset scores higher."""
    if len(core_scores) == 0 or len(thin_scores) == 0:
        raise ValueError("Core/thin gap needs non-empty subsets")
    return float(np.mean(core_scores) - np.mean(thin_scores))


def seed_average(scores_by_seed: Mapping[Optional[int], float], expected_seeds: Sequence[Optional[int]]) -> float:
    """Average one image's scores over seeds, rejecting incomplete seed sets."""
    missing = [seed for seed in expected_seeds if seed not in scores_by_seed]
    if missing:
        raise ValueError(f"Missing seeds {missing}; incomplete seed sets are not imputed")
    return float(np.mean([scores_by_seed[seed] for seed in expected_seeds]))


__all__ = [
    "EXACT_LIMIT",
    "EffectSize",
    "PairedSample",
    "RobustnessProfile",
    "WilcoxonResult",
    "bonferroni",
    "core_thin_gap",
    "effect_size",
    "quantile",
    "robustness_profile",
    "seed_average",
    "wilcoxon_signed_rank",
]
