"""Compare the numba kernels with the pure-NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends. Results are
checked for equality before timing, and numba compile time is excluded by
a warm-up call.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from mtmt import _kernels_numba as nb
from mtmt import _kernels_numpy as npk


def _cases(rng):
    a = rng.integers(0, 50, 400).astype(np.int64)
    b = rng.integers(0, 50, 380).astype(np.int64)
    short = [rng.integers(0, 5, 12).astype(np.int64) for _ in range(200)]

    n, m = 4, 4
    lens_r = rng.integers(50, 150, n)
    lens_h = rng.integers(50, 150, m)
    ref_ids = rng.integers(0, 30, lens_r.sum()).astype(np.int64)
    hyp_ids = rng.integers(0, 30, lens_h.sum()).astype(np.int64)
    ref_off = np.concatenate([[0], np.cumsum(lens_r)]).astype(np.int64)
    hyp_off = np.concatenate([[0], np.cumsum(lens_h)]).astype(np.int64)

    D, K, T = 512, 4, 1500
    A = rng.standard_normal((D, T))
    S = rng.random((K, T))
    up = rng.standard_normal((K * D, T))

    return {
        "edit_distance 400x380": lambda k: k.edit_distance(a, b),
        "edit_counts 400x380": lambda k: k.edit_counts(a, b),
        "edit_distance 200 x (12x12)": lambda k: [k.edit_distance(x, y) for x, y in zip(short, short[1:])],
        "cost_matrix 4x4 streams": lambda k: k.cost_matrix(ref_ids, ref_off, hyp_ids, hyp_off),
        "mask_stack D=512 K=4 T=1500": lambda k: k.mask_stack(A, S),
        "mask_reduce D=512 K=4 T=1500": lambda k: k.mask_reduce(up, S, D),
        "block_dot D=512 K=4 T=1500": lambda k: k.block_dot(up, A, K),
    }


def _same(x, y) -> bool:
    if isinstance(x, list):
        return all(_same(p, q) for p, q in zip(x, y))
    return np.array_equal(np.asarray(x), np.asarray(y))


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, fn in _cases(rng).items():
        ref, fast = fn(npk), fn(nb)  # the numba call also compiles
        if not _same(ref, fast):
            raise SystemExit(f"{name}: backends disagree")
        t_np = min(timeit.repeat(lambda: fn(npk), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: fn(nb), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:32s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
