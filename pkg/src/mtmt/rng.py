"""Seeded randomness.

Every stochastic routine draws from NumPy's ``PCG64`` bit generator (the
PCG-XSL-RR 128/64 permuted congruential generator), seeded through
``SeedSequence``. PCG64's output stream for a given seed is fixed by NumPy's
stability policy, so results are reproducible across runs and platforms.
"""

from __future__ import annotations

import numpy as np

SEED_MAX = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed``, optionally on a derived substream.

    ``keys`` select an independent child stream (e.g. a session index), so
    per-item generation does not depend on processing order.
    """
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit seed for substream ``keys`` of ``seed``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
