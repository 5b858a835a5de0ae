"""Pure-NumPy reference kernels.

These mirror :mod:`mtmt._kernels_numba` operation for operation, including the
summation order, so both backends return bit-identical results.
"""

from __future__ import annotations

import numpy as np


def _dp_rows(a: np.ndarray, b: np.ndarray, keep: bool):
    n, m = len(a), len(b)
    ramp = np.arange(m + 1, dtype=np.int64)
    prev = ramp.copy()
    table = np.empty((n + 1, m + 1), dtype=np.int64) if keep else None
    if keep:
        table[0] = prev
    for i in range(1, n + 1):
        cur = np.empty(m + 1, dtype=np.int64)
        cur[0] = i
        cur[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i - 1]))
        # insertions chain along the row: cur[j] = min_k<=j cur[k] + (j - k)
        cur = np.minimum.accumulate(cur - ramp) + ramp
        if keep:
            table[i] = cur
        prev = cur
    return prev, table


def edit_distance(a: np.ndarray, b: np.ndarray) -> int:
    last, _ = _dp_rows(a, b, keep=False)
    return int(last[-1])


def edit_counts(a: np.ndarray, b: np.ndarray) -> tuple[int, int, int]:
    """(substitutions, deletions, insertions) of one minimal alignment of ``b`` to ``a``.

    Ties prefer substitution, then insertion, then deletion.
    """
    _, d = _dp_rows(a, b, keep=True)
    i, j = len(a), len(b)
    sub = dele = ins = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and d[i, j] == d[i - 1, j - 1]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + 1:
            sub += 1
            i -= 1
            j -= 1
        elif j > 0 and d[i, j] == d[i, j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dele += 1
            i -= 1
    return sub, dele, ins


def cost_matrix(ref_ids, ref_off, hyp_ids, hyp_off) -> np.ndarray:
    n = len(ref_off) - 1
    m = len(hyp_off) - 1
    out = np.empty((n, m), dtype=np.int64)
    for r in range(n):
        a = ref_ids[ref_off[r]:ref_off[r + 1]]
        for h in range(m):
            out[r, h] = edit_distance(a, hyp_ids[hyp_off[h]:hyp_off[h + 1]])
    return out


def mask_stack(A: np.ndarray, S: np.ndarray) -> np.ndarray:
    D, T = A.shape
    K = S.shape[0]
    return (S[:, None, :] * A[None, :, :]).reshape(K * D, T)


def mask_reduce(up: np.ndarray, S: np.ndarray, D: int) -> np.ndarray:
    """sum_k up[block k] * S[k], accumulated in speaker order."""
    K, T = S.shape
    acc = np.zeros((D, T))
    for k in range(K):
        acc += up[k * D:(k + 1) * D] * S[k]
    return acc


def block_dot(up: np.ndarray, A: np.ndarray, K: int) -> np.ndarray:
    """out[k, t] = sum_d up[k*D + d, t] * A[d, t], accumulated in row order."""
    D, T = A.shape
    out = np.zeros((K, T))
    for k in range(K):
        for d in range(D):
            out[k] += up[k * D + d] * A[d]
    return out
