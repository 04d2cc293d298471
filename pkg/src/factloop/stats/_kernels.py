"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

The compiled path is used when numba imports cleanly; setting the environment
variable FACTLOOP_NO_NUMBA=1 forces the numpy path (same results, useful for
debugging and for the benchmark in benchmarks/bench_kernels.py).
"""
from __future__ import annotations

import os

import numpy as np

_NO_NUMBA_ENV = "FACTLOOP_NO_NUMBA"


def rank_sum_counts_numpy(doubled: np.ndarray, n: int) -> np.ndarray:
    """Count n-subsets of ``doubled`` by their sum.

    ``doubled`` holds twice the pooled mid-ranks (always integers). Returns an
    int64 array c where c[s] is the number of n-element subsets whose doubled
    rank sum equals s. Exact integer arithmetic throughout.
    """
    total = int(doubled.sum())
    dp = np.zeros((n + 1, total + 1), dtype=np.int64)
    dp[0, 0] = 1
    for v in doubled:
        v = int(v)
        # right-hand side materializes before assignment, so every item is
        # counted at most once per subset
        dp[1:, v:] = dp[1:, v:] + dp[:-1, : total + 1 - v]
    return dp[n]


def ap_from_sorted_numpy(truth_sorted: np.ndarray) -> float:
    """Average precision over items already sorted by score (best first).

    Returns -1.0 when there is no positive item; callers map that to NA.
    """
    total = int(truth_sorted.sum())
    if total == 0:
        return -1.0
    tp = np.cumsum(truth_sorted)
    idx = np.nonzero(truth_sorted == 1)[0]
    return float((tp[idx] / (idx + 1.0)).sum() / total)


_use_numba = os.environ.get(_NO_NUMBA_ENV, "").strip().lower() not in ("1", "true", "yes")
if _use_numba:
    try:
        from numba import njit
    except ImportError:
        _use_numba = False

if _use_numba:

    @njit(cache=True)
    def rank_sum_counts_numba(doubled, n):  # pragma: no cover - exercised via alias
        total = 0
        for i in range(doubled.shape[0]):
            total += doubled[i]
        dp = np.zeros((n + 1, total + 1), dtype=np.int64)
        dp[0, 0] = 1
        for i in range(doubled.shape[0]):
            v = doubled[i]
            for k in range(n, 0, -1):
                for s in range(total, v - 1, -1):
                    prev = dp[k - 1, s - v]
                    if prev != 0:
                        dp[k, s] += prev
        return dp[n]

    @njit(cache=True)
    def ap_from_sorted_numba(truth_sorted):  # pragma: no cover - exercised via alias
        total = 0
        for i in range(truth_sorted.shape[0]):
            total += truth_sorted[i]
        if total == 0:
            return -1.0
        tp = 0
        ap = 0.0
        for i in range(truth_sorted.shape[0]):
            if truth_sorted[i] == 1:
                tp += 1
                ap += tp / (i + 1.0)
        return ap / total

    rank_sum_counts = rank_sum_counts_numba
    ap_from_sorted = ap_from_sorted_numba
else:
    rank_sum_counts = rank_sum_counts_numpy
    ap_from_sorted = ap_from_sorted_numpy

USING_NUMBA = _use_numba
