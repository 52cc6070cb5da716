"""Edit-distance kernels for TER.

Both paths produce identical integer results. The numba path is used unless
``G2T_DISABLE_NUMBA=1`` is set or numba cannot be imported.

Op codes written by ``backtrace`` (forward order):
    0 match, 1 substitution, 2 extra hypothesis word, 3 missing reference word
"""
from __future__ import annotations

import os

import numpy as np

MATCH, SUB, EXTRA_HYP, MISSING_REF = 0, 1, 2, 3

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("G2T_DISABLE_NUMBA", "0") != "1"


def edit_matrix_numpy(hyp: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Levenshtein table, one row per hypothesis prefix.

    Insertions along a row are resolved with a running minimum:
    d[j] = min_k<=j (c[k] + j - k) = j + cummin(c - arange)[j].
    """
    n, m = len(hyp), len(ref)
    d = np.empty((n + 1, m + 1), dtype=np.int64)
    cols = np.arange(m + 1, dtype=np.int64)
    d[0] = cols
    for i in range(1, n + 1):
        prev = d[i - 1]
        c = np.empty(m + 1, dtype=np.int64)
        c[0] = i
        c[1:] = np.minimum(prev[:-1] + (ref != hyp[i - 1]), prev[1:] + 1)
        d[i] = np.minimum.accumulate(c - cols) + cols
    return d


def backtrace_numpy(d: np.ndarray, hyp: np.ndarray, ref: np.ndarray) -> np.ndarray:
    i, j = len(hyp), len(ref)
    ops = []
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if hyp[i - 1] == ref[j - 1] else 1
            if d[i, j] == d[i - 1, j - 1] + cost:
                ops.append(MATCH if cost == 0 else SUB)
                i -= 1
                j -= 1
                continue
        if i > 0 and d[i, j] == d[i - 1, j] + 1:
            ops.append(EXTRA_HYP)
            i -= 1
        else:
            ops.append(MISSING_REF)
            j -= 1
    return np.array(ops[::-1], dtype=np.int8)


if NUMBA_AVAILABLE:

    @numba.njit(cache=True, nogil=True)
    def edit_matrix_numba(hyp, ref):
        n, m = hyp.shape[0], ref.shape[0]
        d = np.empty((n + 1, m + 1), dtype=np.int64)
        for j in range(m + 1):
            d[0, j] = j
        for i in range(1, n + 1):
            d[i, 0] = i
            h = hyp[i - 1]
            for j in range(1, m + 1):
                best = d[i - 1, j - 1] + (0 if h == ref[j - 1] else 1)
                up = d[i - 1, j] + 1
                if up < best:
                    best = up
                left = d[i, j - 1] + 1
                if left < best:
                    best = left
                d[i, j] = best
        return d

    @numba.njit(cache=True, nogil=True)
    def backtrace_numba(d, hyp, ref):
        i, j = hyp.shape[0], ref.shape[0]
        ops = np.empty(i + j, dtype=np.int8)
        k = 0
        while i > 0 or j > 0:
            if i > 0 and j > 0:
                cost = 0 if hyp[i - 1] == ref[j - 1] else 1
                if d[i, j] == d[i - 1, j - 1] + cost:
                    ops[k] = MATCH if cost == 0 else SUB
                    k += 1
                    i -= 1
                    j -= 1
                    continue
            if i > 0 and d[i, j] == d[i - 1, j] + 1:
                ops[k] = EXTRA_HYP
                i -= 1
            else:
                ops[k] = MISSING_REF
                j -= 1
            k += 1
        return ops[:k][::-1].copy()

else:  # pragma: no cover
    edit_matrix_numba = edit_matrix_numpy
    backtrace_numba = backtrace_numpy


if USE_NUMBA:
    edit_matrix, backtrace = edit_matrix_numba, backtrace_numba
else:
    edit_matrix, backtrace = edit_matrix_numpy, backtrace_numpy


def edit_distance(hyp: np.ndarray, ref: np.ndarray) -> int:
    return int(edit_matrix(hyp, ref)[-1, -1])


def align(hyp: np.ndarray, ref: np.ndarray) -> tuple[int, np.ndarray]:
    d = edit_matrix(hyp, ref)
    return int(d[-1, -1]), backtrace(d, hyp, ref)
