"""Quantitative machinery: association, detection and classification metrics.

Everything here is a pure function over immutable inputs. Invalid predictions
count as misclassifications of the complement class so that denominators stay
comparable across experimental arms; percentages are returned at full
precision and rounded to two decimals only at report time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..exceptions import ContractViolation
from ..parser import INVALID
from ._kernels import USING_NUMBA, ap_from_sorted, rank_sum_counts

__all__ = [
    "LabeledOutcome",
    "ScoredPoint",
    "ConfusionCounts",
    "DensityBins",
    "aggregate_h",
    "pearson",
    "risk_difference",
    "confusion_counts",
    "f1",
    "weighted_cost",
    "balanced_accuracy",
    "auprc",
    "wilcoxon_rank_sum",
    "density_bins",
    "USING_NUMBA",
]

FN_COST = 5
FP_COST = 1


@dataclass(frozen=True)
class LabeledOutcome:
    """A case's predicted decision against its true label."""

    case_id: str
    predicted: Union[int, str]  # 0 | 1 | "invalid"
    label: int
    h_rsn: Optional[int] = None  # any-point hallucination judgment, if annotated

    def misclassified(self) -> bool:
        # invalid predictions never match the label
        return self.predicted != self.label


@dataclass(frozen=True)
class ScoredPoint:
    """A verifier probability against the human judgment for one point."""

    prob: float
    truth: int

    def __post_init__(self):
        if not math.isfinite(self.prob) or not 0.0 <= self.prob <= 1.0:
            raise ContractViolation(f"prob must be finite in [0,1], got {self.prob!r}")
        if self.truth not in (0, 1):
            raise ContractViolation(f"truth must be 0 or 1, got {self.truth!r}")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int


def aggregate_h(points: Sequence[int]) -> int:
    """A reasoning chain is erroneous iff any point is (logical OR)."""
    if len(points) == 0:
        raise ContractViolation("cannot aggregate an empty point list")
    return 1 if any(p == 1 for p in points) else 0


def pearson(h: Sequence[float], e: Sequence[float]) -> Optional[float]:
    """Product-moment correlation; None when either vector is constant."""
    if len(h) != len(e):
        raise ContractViolation(f"length mismatch: {len(h)} vs {len(e)}")
    if len(h) < 2:
        raise ContractViolation("need at least two paired observations")
    x = np.asarray(h, dtype=np.float64)
    y = np.asarray(e, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        return None
    return float((dx * dy).sum()) / (sx * sy)


def risk_difference(outcomes: Sequence[LabeledOutcome]) -> Optional[float]:
    """P(misclassified | h_rsn=1) - P(misclassified | h_rsn=0); None if a subgroup is empty."""
    for o in outcomes:
        if o.h_rsn not in (0, 1):
            raise ContractViolation(f"case {o.case_id}: h_rsn missing or non-binary")
    with_h = [o for o in outcomes if o.h_rsn == 1]
    without_h = [o for o in outcomes if o.h_rsn == 0]
    if not with_h or not without_h:
        return None
    rate_h1 = sum(o.misclassified() for o in with_h) / len(with_h)
    rate_h0 = sum(o.misclassified() for o in without_h) / len(without_h)
    return rate_h1 - rate_h0


def confusion_counts(outcomes: Sequence[LabeledOutcome]) -> ConfusionCounts:
    """Shared confusion counts; invalid predictions count against their label."""
    tp = fp = fn = tn = 0
    for o in outcomes:
        if o.label not in (0, 1):
            raise ContractViolation(f"case {o.case_id}: label must be 0 or 1")
        predicted = o.predicted
        if predicted == INVALID or predicted not in (0, 1):
            predicted = 1 - o.label  # always wrong
        if o.label == 1:
            if predicted == 1:
                tp += 1
            else:
                fn += 1
        else:
            if predicted == 1:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def f1(outcomes: Sequence[LabeledOutcome]) -> Optional[float]:
    """F1 of the positive class as a percentage; None when TP+FP+FN is zero."""
    if not outcomes:
        raise ContractViolation("f1 requires at least one outcome")
    c = confusion_counts(outcomes)
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        return None
    return 100.0 * 2.0 * c.tp / denom


def weighted_cost(outcomes: Sequence[LabeledOutcome]) -> int:
    """5 per false negative plus 1 per false positive (credit cost matrix)."""
    if not outcomes:
        raise ContractViolation("weighted_cost requires at least one outcome")
    c = confusion_counts(outcomes)
    return FN_COST * c.fn + FP_COST * c.fp


def _score_arrays(points: Sequence[ScoredPoint]) -> tuple[np.ndarray, np.ndarray]:
    probs = np.array([p.prob for p in points], dtype=np.float64)
    truths = np.array([p.truth for p in points], dtype=np.int64)
    return probs, truths


def balanced_accuracy(points: Sequence[ScoredPoint], threshold: float = 0.5) -> Optional[float]:
    """(TPR + TNR) / 2 as a percentage at a fixed threshold; None if single-class."""
    probs, truths = _score_arrays(points)
    pos = truths == 1
    neg = truths == 0
    if not pos.any() or not neg.any():
        return None
    preds = probs >= threshold
    tpr = float(preds[pos].mean())
    tnr = float((~preds[neg]).mean())
    return 100.0 * (tpr + tnr) / 2.0


def auprc(points: Sequence[ScoredPoint]) -> Optional[float]:
    """Average-precision AUPRC as a percentage; None when no positive exists.

    Items are ranked by probability descending with ties broken pessimistically
    (negatives before positives), so 100.00 certifies strict separation.
    """
    probs, truths = _score_arrays(points)
    if int(truths.sum()) == 0:
        return None
    order = np.lexsort((truths, -probs))
    ap = ap_from_sorted(truths[order])
    return 100.0 * float(ap)


def _doubled_midranks(values: Sequence[float]) -> tuple[np.ndarray, list[int]]:
    """Twice the mid-ranks (exact integers) and the tie-group sizes."""
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    doubled = [0] * n
    ties: list[int] = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        d = (i + 1) + (j + 1)  # lo + hi of the 1-based position span
        for t in range(i, j + 1):
            doubled[order[t]] = d
        ties.append(j - i + 1)
        i = j + 1
    return np.array(doubled, dtype=np.int64), ties


EXACT_POOLED_LIMIT = 20


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float], method: str = "auto") -> float:
    """Two-sided rank-sum p-value.

    Exact by full enumeration of group assignments (mid-rank ties included)
    when the pooled size is at most 20; otherwise a normal approximation with
    tie and continuity corrections. ``method`` forces a branch for testing.
    """
    if method not in ("auto", "exact", "approx"):
        raise ContractViolation(f"unknown method {method!r}")
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ContractViolation("both samples must be non-empty")
    pooled = [float(v) for v in a] + [float(v) for v in b]
    for v in pooled:
        if not math.isfinite(v):
            raise ContractViolation("samples must be finite")
    total_n = n + m
    doubled, ties = _doubled_midranks(pooled)
    if len(ties) == 1:
        return 1.0  # every pooled value identical

    if method == "exact" or (method == "auto" and total_n <= EXACT_POOLED_LIMIT):
        s_obs = int(doubled[:n].sum())
        counts = rank_sum_counts(doubled, n)
        total = int(counts.sum())
        le = int(counts[: s_obs + 1].sum())
        ge = int(counts[s_obs:].sum())
        return min(1.0, 2.0 * min(le, ge) / total)

    rank_sum_a = float(doubled[:n].sum()) / 2.0
    u = rank_sum_a - n * (n + 1) / 2.0
    mu = n * m / 2.0
    tie_term = sum(t**3 - t for t in ties)
    var = (n * m / 12.0) * ((total_n + 1) - tie_term / (total_n * (total_n - 1)))
    if var <= 0:
        return 1.0
    numerator = max(abs(u - mu) - 0.5, 0.0)  # continuity correction
    z = numerator / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


@dataclass(frozen=True)
class DensityBins:
    """Per-group normalized histograms over [0, 1], ready for plotting."""

    bin_edges: tuple[float, ...]  # bins + 1 edges
    freq_h0: tuple[float, ...]
    freq_h1: tuple[float, ...]
    h0_empty: bool
    h1_empty: bool

    def rows(self) -> list[dict[str, float]]:
        return [
            {
                "bin_low": self.bin_edges[i],
                "bin_high": self.bin_edges[i + 1],
                "freq_h0": self.freq_h0[i],
                "freq_h1": self.freq_h1[i],
            }
            for i in range(len(self.freq_h0))
        ]


def density_bins(points: Sequence[ScoredPoint], bins: int) -> DensityBins:
    """Equal-width per-group frequency histograms of verifier probabilities.

    Frequencies are normalized to sum to 1 within each truth group; an empty
    group yields an all-zero histogram with its flag set.
    """
    if bins < 2:
        raise ContractViolation("bins must be at least 2")
    probs, truths = _score_arrays(points)
    edges = np.linspace(0.0, 1.0, bins + 1)
    freqs: dict[int, np.ndarray] = {}
    empty: dict[int, bool] = {}
    for group in (0, 1):
        values = probs[truths == group]
        if values.size == 0:
            freqs[group] = np.zeros(bins)
            empty[group] = True
        else:
            counts, _ = np.histogram(values, bins=edges)
            freqs[group] = counts / values.size
            empty[group] = False
    return DensityBins(
        bin_edges=tuple(float(e) for e in edges),
        freq_h0=tuple(float(f) for f in freqs[0]),
        freq_h1=tuple(float(f) for f in freqs[1]),
        h0_empty=empty[0],
        h1_empty=empty[1],
    )
