"""Benchmark the numba-compiled kernels against the pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py

The same comparison can be forced package-wide by setting FACTLOOP_NO_NUMBA=1,
which routes factloop.stats through the numpy path.
"""
from __future__ import annotations

import random
import time

import numpy as np

from factloop.stats._kernels import (
    USING_NUMBA,
    ap_from_sorted_numpy,
    rank_sum_counts_numpy,
)

if USING_NUMBA:
    from factloop.stats._kernels import ap_from_sorted_numba, rank_sum_counts_numba
else:
    ap_from_sorted_numba = None
    rank_sum_counts_numba = None


def timeit(fn, *args, repeat: int = 20) -> float:
    fn(*args)  # warm-up (includes JIT compilation for the numba path)
    start = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - start) / repeat


def doubled_midranks(values: list[float]) -> np.ndarray:
    order = sorted(range(len(values)), key=lambda i: values[i])
    doubled = [0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for t in range(i, j + 1):
            doubled[order[t]] = (i + 1) + (j + 1)
        i = j + 1
    return np.array(doubled, dtype=np.int64)


def main() -> None:
    rng = random.Random(0)
    print(f"numba available and active: {USING_NUMBA}")
    rows = []

    # exact rank-sum distribution at the largest exact pool sizes
    for n, m in ((10, 10), (12, 12), (15, 15)):
        values = [rng.randint(0, 6) for _ in range(n + m)]
        doubled = doubled_midranks(values)
        base = timeit(rank_sum_counts_numpy, doubled, n)
        row = [f"rank_sum_counts n=m={n}", f"{base * 1e3:9.3f} ms"]
        if rank_sum_counts_numba is not None:
            jit = timeit(rank_sum_counts_numba, doubled, n)
            assert np.array_equal(rank_sum_counts_numpy(doubled, n),
                                  np.asarray(rank_sum_counts_numba(doubled, n)))
            row += [f"{jit * 1e3:9.3f} ms", f"{base / jit:6.1f}x"]
        rows.append(row)

    # average precision over large score sets
    for size in (10_000, 1_000_000):
        truth = np.array([rng.randint(0, 1) for _ in range(size)], dtype=np.int64)
        base = timeit(ap_from_sorted_numpy, truth, repeat=5)
        row = [f"ap_from_sorted n={size}", f"{base * 1e3:9.3f} ms"]
        if ap_from_sorted_numba is not None:
            jit = timeit(ap_from_sorted_numba, truth, repeat=5)
            assert abs(ap_from_sorted_numpy(truth) - ap_from_sorted_numba(truth)) < 1e-12
            row += [f"{jit * 1e3:9.3f} ms", f"{base / jit:6.1f}x"]
        rows.append(row)

    header = ["kernel", "numpy", "numba", "speedup"] if USING_NUMBA else ["kernel", "numpy"]
    widths = [max(len(str(r[i])) for r in rows + [header]) for i in range(len(header))]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))


if __name__ == "__main__":
    main()
