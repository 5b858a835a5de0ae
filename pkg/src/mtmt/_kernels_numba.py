"""Numba-compiled kernels. Same contracts as :mod:`mtmt._kernels_numpy`."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _table(a, b):
    n = a.shape[0]
    m = b.shape[0]
    d = np.empty((n + 1, m + 1), dtype=np.int64)
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        d[i, 0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = d[i - 1, j - 1] + (0 if ai == b[j - 1] else 1)
            c = d[i - 1, j] + 1
            if c < best:
                best = c
            c = d[i, j - 1] + 1
            if c < best:
                best = c
            d[i, j] = best
    return d


@njit(cache=True)
def edit_distance(a, b):
    n = a.shape[0]
    m = b.shape[0]
    prev = np.arange(m + 1).astype(np.int64)
    cur = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            c = prev[j] + 1
            if c < best:
                best = c
            c = cur[j - 1] + 1
            if c < best:
                best = c
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True)
def _edit_counts(a, b):
    d = _table(a, b)
    i = a.shape[0]
    j = b.shape[0]
    sub = 0
    dele = 0
    ins = 0
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


def edit_counts(a, b):
    s, d, i = _edit_counts(a, b)
    return int(s), int(d), int(i)


@njit(cache=True)
def cost_matrix(ref_ids, ref_off, hyp_ids, hyp_off):
    n = ref_off.shape[0] - 1
    m = hyp_off.shape[0] - 1
    out = np.empty((n, m), dtype=np.int64)
    for r in range(n):
        a = ref_ids[ref_off[r]:ref_off[r + 1]]
        for h in range(m):
            out[r, h] = edit_distance(a, hyp_ids[hyp_off[h]:hyp_off[h + 1]])
    return out


@njit(cache=True)
def mask_stack(A, S):
    D, T = A.shape
    K = S.shape[0]
    out = np.empty((K * D, T))
    for k in range(K):
        for d in range(D):
            for t in range(T):
                out[k * D + d, t] = S[k, t] * A[d, t]
    return out


@njit(cache=True)
def mask_reduce(up, S, D):
    K, T = S.shape
    acc = np.zeros((D, T))
    for k in range(K):
        for d in range(D):
            for t in range(T):
                acc[d, t] += up[k * D + d, t] * S[k, t]
    return acc


@njit(cache=True)
def block_dot(up, A, K):
    D, T = A.shape
    out = np.zeros((K, T))
    for k in range(K):
        for d in range(D):
            for t in range(T):
                out[k, t] += up[k * D + d, t] * A[d, t]
    return out
