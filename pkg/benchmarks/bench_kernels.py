#!/usr/bin/env python3
"""Benchmark the compiled kernels against their pure-numpy fallbacks.

Times the two hot kernels behind scoring and retrieval — LCS length
(ROUGE-L) and masked cosine top-k — on growing inputs, comparing the
numba path with the numpy path that MEDSHOT_DISABLE_NUMBA selects.
Each measurement is the median of repeated runs after warmup, and both
paths are cross-checked for equal results before timing.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from medshot import kernels


def time_function(func, *args, repeats=20):
    """Median wall time of ``func(*args)`` in microseconds, after warmup."""
    for _ in range(3):
        func(*args)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - start)
    return float(np.median(times)) * 1e6


def print_table(title, header, rows):
    print(f"\n{title}")
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    line = "  ".join(str(h).rjust(w) for h, w in zip(header, widths))
    print(line)
    print("-" * len(line))
    for row in rows:
        print("  ".join(str(c).rjust(w) for c, w in zip(row, widths)))


def bench_lcs(repeats):
    rng = np.random.default_rng(1)
    rows = []
    for length in (50, 200, 800, 2000):
        a = rng.integers(0, 50, size=length).astype(np.int64)
        b = rng.integers(0, 50, size=length).astype(np.int64)
        assert kernels.lcs_len_numba(a, b) == kernels.lcs_len_numpy(a, b)
        t_numba = time_function(kernels.lcs_len_numba, a, b, repeats=repeats)
        t_numpy = time_function(kernels.lcs_len_numpy, a, b, repeats=repeats)
        rows.append(
            (f"{length}x{length}", f"{t_numba:.1f}", f"{t_numpy:.1f}", f"{t_numpy / t_numba:.1f}x")
        )
    print_table(
        "LCS length (ROUGE-L core)",
        ("tokens", "numba us", "numpy us", "speedup"),
        rows,
    )


def bench_topk(repeats):
    rng = np.random.default_rng(2)
    dim, k = 256, 5
    rows = []
    for n in (1_000, 10_000, 50_000):
        matrix = rng.normal(size=(n, dim))
        matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
        matrix = np.ascontiguousarray(matrix)
        query = rng.normal(size=dim)
        query /= np.linalg.norm(query)
        id_rank = np.arange(n, dtype=np.int64)
        allowed = np.ones(n, dtype=np.bool_)
        allowed[rng.integers(0, n, size=10)] = False
        idx_nb, _ = kernels.topk_numba(matrix, query, id_rank, allowed, k)
        idx_np, _ = kernels.topk_numpy(matrix, query, id_rank, allowed, k)
        assert list(idx_nb) == list(idx_np)
        t_numba = time_function(
            kernels.topk_numba, matrix, query, id_rank, allowed, k, repeats=repeats
        )
        t_numpy = time_function(
            kernels.topk_numpy, matrix, query, id_rank, allowed, k, repeats=repeats
        )
        rows.append(
            (f"{n}x{dim}", f"{t_numba:.1f}", f"{t_numpy:.1f}", f"{t_numpy / t_numba:.1f}x")
        )
    print_table(
        f"cosine top-{k} with exclusion mask",
        ("vectors", "numba us", "numpy us", "speedup"),
        rows,
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20, help="timed runs per case")
    args = parser.parse_args()
    if not kernels.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print("warming up compiled kernels ...")
    kernels.warmup()
    bench_lcs(args.repeats)
    bench_topk(args.repeats)
    print("\nspeedup = numpy time / numba time (higher favours numba)")


if __name__ == "__main__":
    main()
