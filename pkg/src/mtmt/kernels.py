"""Backend selection for the hot loops (edit distance, Meta-Cat masking).

Numba-compiled kernels are used when numba imports cleanly. Set the
environment variable ``MTMT_DISABLE_NUMBA=1`` before import to force the
pure-NumPy path. Both backends produce identical results.
"""

from __future__ import annotations

import os

from . import _kernels_numpy as numpy_backend

try:
    from . import _kernels_numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None


def _disabled() -> bool:
    return os.environ.get("MTMT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


if numba_backend is not None and not _disabled():
    active = numba_backend
    BACKEND = "numba"
else:
    active = numpy_backend
    BACKEND = "numpy"

edit_distance = active.edit_distance
edit_counts = active.edit_counts
cost_matrix = active.cost_matrix
mask_stack = active.mask_stack
mask_reduce = active.mask_reduce
block_dot = active.block_dot
