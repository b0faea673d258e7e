"""Numeric hot kernels: LCS length and top-k cosine selection.

Both kernels ship in two interchangeable implementations: a numba
``@njit`` version compiled on first use, and a vectorised pure-numpy
fallback.  The numpy path is selected automatically when numba is not
importable, or explicitly by setting ``MEDSHOT_DISABLE_NUMBA=1`` in the
environment.  ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

DISABLE_ENV = "MEDSHOT_DISABLE_NUMBA"

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False


def numba_active() -> bool:
    """True when the numba kernels are available and not disabled by env flag."""
    if not HAS_NUMBA:
        return False
    return os.environ.get(DISABLE_ENV, "").lower() not in ("1", "true", "yes")


# ── LCS length ──────────────────────────────────────────────────────────────
#
# Classic O(n*m) dynamic program over integer-coded token sequences.  The
# numpy variant keeps only a rolling row and resolves the left-neighbour
# dependency with a prefix running maximum: for row i,
#   cand[j] = max(prev[j+1], prev[j] + (b[j] == a[i]))
#   cur[j+1] = max(cand[0..j])
# which is equivalent to the textbook recurrence.


def lcs_len_numpy(a: np.ndarray, b: np.ndarray) -> int:
    """Length of the longest common subsequence of two int sequences."""
    if a.size == 0 or b.size == 0:
        return 0
    prev = np.zeros(b.size + 1, dtype=np.int64)
    for ai in a:
        cand = np.maximum(prev[1:], prev[:-1] + (b == ai))
        np.maximum.accumulate(cand, out=cand)
        prev[1:] = cand
    return int(prev[-1])


def _lcs_len_scalar(a, b):  # numba source; not called directly in python
    n = a.shape[0]
    m = b.shape[0]
    if n == 0 or m == 0:
        return 0
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(n):
        ai = a[i]
        for j in range(1, m + 1):
            if b[j - 1] == ai:
                cur[j] = prev[j - 1] + 1
            else:
                pj = prev[j]
                cj = cur[j - 1]
                cur[j] = pj if pj >= cj else cj
        tmp = prev
        prev = cur
        cur = tmp
    return prev[m]


# ── top-k selection ─────────────────────────────────────────────────────────
#
# Scores are dot products of unit vectors in double precision.  Ordering is
# by descending score with ties broken by ascending id rank; rows where
# ``allowed`` is False are never returned.


def topk_numpy(
    matrix: np.ndarray,
    query: np.ndarray,
    id_rank: np.ndarray,
    allowed: np.ndarray,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Indices and scores of the top-k allowed rows of ``matrix`` for ``query``."""
    scores = matrix @ query
    masked = np.where(allowed, scores, -np.inf)
    order = np.lexsort((id_rank, -masked))
    take = min(max(k, 0), int(np.count_nonzero(allowed)))
    idx = order[:take].astype(np.int64)
    return idx, scores[idx]


def _topk_scalar(matrix, query, id_rank, allowed, k):  # numba source
    n, d = matrix.shape
    scores = np.empty(n, dtype=np.float64)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += matrix[i, j] * query[j]
        scores[i] = s
    cap = k if 0 < k < n else (0 if k <= 0 else n)
    out_idx = np.empty(cap, dtype=np.int64)
    taken = np.zeros(n, dtype=np.bool_)
    count = 0
    for _slot in range(cap):
        best = -1
        for i in range(n):
            if not allowed[i] or taken[i]:
                continue
            if best == -1:
                best = i
            elif scores[i] > scores[best] or (
                scores[i] == scores[best] and id_rank[i] < id_rank[best]
            ):
                best = i
        if best == -1:
            break
        taken[best] = True
        out_idx[count] = best
        count += 1
    res_idx = out_idx[:count]
    res_scores = np.empty(count, dtype=np.float64)
    for i in range(count):
        res_scores[i] = scores[res_idx[i]]
    return res_idx, res_scores


if HAS_NUMBA:
    lcs_len_numba = njit(cache=True)(_lcs_len_scalar)
    topk_numba = njit(cache=True)(_topk_scalar)


# ── dispatching wrappers ────────────────────────────────────────────────────


def lcs_len(a: np.ndarray, b: np.ndarray) -> int:
    """LCS length via the active kernel path (numba when enabled, else numpy)."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if numba_active():
        return int(lcs_len_numba(a, b))
    return lcs_len_numpy(a, b)


def topk(
    matrix: np.ndarray,
    query: np.ndarray,
    id_rank: np.ndarray,
    allowed: np.ndarray,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Top-k row selection via the active kernel path."""
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    query = np.ascontiguousarray(query, dtype=np.float64)
    id_rank = np.ascontiguousarray(id_rank, dtype=np.int64)
    allowed = np.ascontiguousarray(allowed, dtype=np.bool_)
    if numba_active():
        idx, scores = topk_numba(matrix, query, id_rank, allowed, int(k))
        return np.asarray(idx), np.asarray(scores)
    return topk_numpy(matrix, query, id_rank, allowed, int(k))


def warmup() -> None:
    """Trigger JIT compilation of the numba kernels on tiny inputs."""
    if not numba_active():
        return
    a = np.array([1, 2, 3], dtype=np.int64)
    lcs_len_numba(a, a)
    m = np.eye(2, dtype=np.float64)
    topk_numba(m, m[0], np.arange(2, dtype=np.int64), np.ones(2, dtype=np.bool_), 1)
