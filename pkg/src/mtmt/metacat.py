"""Speaker-encoding transforms of the ASR embedding.

Notation: ``A`` is the D x T embedding, ``S`` the K x T speaker activity.

==================  ========  ==============================================
scheme              rows      output
==================  ========  ==============================================
``meta_cat``        K*D       block k = A * S[k]  (column-wise mask)
``meta_cat_r``      D         A * S[0] + A
``meta_cat_rp``     D+K       [meta_cat_r(A, S); S]
``sinusoidal``      D         A + sum_k S[k] * P_k
``none``            D         A
==================  ========  ==============================================

The sinusoidal baseline uses fixed speaker vectors

    P_k[d] = sin(w_d + phi_k)  for even d,
    P_k[d] = cos(w_d + phi_k)  for odd d,
    w_d = 10000 ** (-2 * (d // 2) / D),   phi_k = k * pi / (2 * K).

Each transform has a vector-Jacobian product in :func:`vjp`. Computation is
done in float64; S is used as soft probabilities unless ``threshold`` is
given, in which case ``S >= threshold`` is binarized first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError, ValidationError
from .supervision import ActivityMatrix

SCHEMES = ("meta_cat", "meta_cat_r", "meta_cat_rp", "sinusoidal", "none")
_ALIASES = {"sinusoidal_baseline": "sinusoidal", "metacat": "meta_cat"}


def canonical_scheme(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in SCHEMES:
        raise ValidationError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}")
    return name


@dataclass
class EncodedEmbedding:
    values: np.ndarray
    scheme: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def output_rows(scheme: str, D: int, K: int) -> int:
    scheme = canonical_scheme(scheme)
    return {"meta_cat": K * D, "meta_cat_rp": D + K}.get(scheme, D)


def _prepare(A, S, threshold=None):
    if isinstance(S, ActivityMatrix):
        S = S.values
    A = np.ascontiguousarray(A, dtype=np.float64)
    S = np.ascontiguousarray(S, dtype=np.float64)
    if A.ndim != 2 or S.ndim != 2:
        raise DimensionError(f"A and S must be 2-D, got {A.shape} and {S.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1 or S.shape[0] < 1:
        raise DimensionError(f"empty embedding or activity: {A.shape}, {S.shape}")
    if A.shape[1] != S.shape[1]:
        raise DimensionError(f"length mismatch: A has T={A.shape[1]}, S has T={S.shape[1]}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("embedding contains non-finite values")
    if threshold is not None:
        S = (S >= threshold).astype(np.float64)
    return A, S


def sinusoid_table(D: int, K: int) -> np.ndarray:
    """Speaker vectors P as a K x D matrix."""
    d = np.arange(D)
    w = 10000.0 ** (-2.0 * (d // 2) / D)
    phi = np.arange(K)[:, None] * np.pi / (2.0 * K)
    angle = w[None, :] + phi
    return np.where(d % 2 == 0, np.sin(angle), np.cos(angle))


def _sinusoid_sum(S: np.ndarray, D: int) -> np.ndarray:
    P = sinusoid_table(D, S.shape[0])
    acc = np.zeros((D, S.shape[1]))
    for k in range(S.shape[0]):
        acc += P[k][:, None] * S[k][None, :]
    return acc


def meta_cat(A, S, threshold: float | None = None) -> EncodedEmbedding:
    A, S = _prepare(A, S, threshold)
    return EncodedEmbedding(kernels.mask_stack(A, S), "meta_cat")


def meta_cat_r(A, S, threshold: float | None = None) -> EncodedEmbedding:
    """Residual variant: only speaker 0's row masks A, and A is added back."""
    A, S = _prepare(A, S, threshold)
    return EncodedEmbedding(A * S[0] + A, "meta_cat_r")


def meta_cat_rp(A, S, threshold: float | None = None) -> EncodedEmbedding:
    A, S = _prepare(A, S, threshold)
    return EncodedEmbedding(np.vstack([A * S[0] + A, S]), "meta_cat_rp")


def sinusoidal_baseline(A, S, threshold: float | None = None) -> EncodedEmbedding:
    A, S = _prepare(A, S, threshold)
    return EncodedEmbedding(A + _sinusoid_sum(S, A.shape[0]), "sinusoidal")


def no_encoding(A, S, threshold: float | None = None) -> EncodedEmbedding:
    A, _ = _prepare(A, S, threshold)
    return EncodedEmbedding(A.copy(), "none")


_FORWARD = {
    "meta_cat": meta_cat,
    "meta_cat_r": meta_cat_r,
    "meta_cat_rp": meta_cat_rp,
    "sinusoidal": sinusoidal_baseline,
    "none": no_encoding,
}


def encode(scheme: str, A, S, threshold: float | None = None) -> EncodedEmbedding:
    return _FORWARD[canonical_scheme(scheme)](A, S, threshold)


def vjp(scheme: str, A, S, upstream) -> tuple[np.ndarray, np.ndarray]:
    """Gradients ``(dL/dA, dL/dS)`` given ``upstream = dL/d(output)``.

    Always the soft (unthresholded) map.
    """
    scheme = canonical_scheme(scheme)
    A, S = _prepare(A, S)
    D, T = A.shape
    K = S.shape[0]
    up = np.ascontiguousarray(upstream, dtype=np.float64)
    expected = (output_rows(scheme, D, K), T)
    if up.shape != expected:
        raise DimensionError(f"upstream shape {up.shape} != output shape {expected}")

    grad_S = np.zeros((K, T))
    if scheme == "meta_cat":
        return kernels.mask_reduce(up, S, D), kernels.block_dot(up, A, K)
    if scheme in ("meta_cat_r", "meta_cat_rp"):
        top = up[:D]
        grad_A = top * (1.0 + S[0])
        grad_S[0] = kernels.block_dot(np.ascontiguousarray(top), A, 1)[0]
        if scheme == "meta_cat_rp":
            grad_S += up[D:]
        return grad_A, grad_S
    if scheme == "sinusoidal":
        return up.copy(), sinusoid_table(D, K) @ up
    return up.copy(), grad_S
