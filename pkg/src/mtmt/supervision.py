"""Speaker supervision: the K x T speaker activity matrix.

Ground-truth ("RTTM") supervision comes from :func:`build_activity`;
diarizer-style ("DIAR") supervision from :func:`simulate_diarizer`, which
corrupts the ground truth with seeded errors; :func:`mix_supervision` blends
the two frame by frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, DimensionError, MappingError, ValidationError
from .manifest_io import SessionAnnotation, SpeakerSegment
from .rng import check_seed, make_rng

DEFAULT_FRAME_RATE = 12.5
DEFAULT_MAX_SPEAKERS = 4
_EPS = 1e-9


def num_frames(duration: float, frame_rate: float) -> int:
    """ceil(duration * frame_rate), tolerant to float noise (0.4 s * 12.5 = 5)."""
    return max(0, math.ceil(duration * frame_rate - _EPS))


@dataclass
class ActivityMatrix:
    values: np.ndarray
    frame_rate: float
    speaker_order: tuple  # label per row, None for unused rows

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.speaker_order = tuple(self.speaker_order)
        if self.values.ndim != 2:
            raise DimensionError(f"activity must be 2-D, got shape {self.values.shape}")
        if not self.frame_rate > 0:
            raise ValidationError(f"frame_rate must be positive, got {self.frame_rate}")
        if len(self.speaker_order) != self.values.shape[0]:
            raise DimensionError(
                f"{len(self.speaker_order)} labels for {self.values.shape[0]} rows"
            )
        if self.values.size and not (
            np.all(self.values >= 0.0) and np.all(self.values <= 1.0)
        ):
            raise ValidationError("activity entries must lie in [0, 1]")

    @property
    def K(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def is_binary(self) -> bool:
        return bool(np.all((self.values == 0.0) | (self.values == 1.0)))

    def sidecar(self) -> dict:
        return {"frame_rate": self.frame_rate, "speaker_order": list(self.speaker_order)}


@dataclass(frozen=True)
class AtoPermutation:
    """Arrival-time order: earliest-speaking label gets index 0."""

    mapping: dict
    arrival_times: dict

    @property
    def labels(self) -> list[str]:
        return sorted(self.mapping, key=self.mapping.__getitem__)

    def __len__(self) -> int:
        return len(self.mapping)

    def index(self, label: str) -> int:
        try:
            return self.mapping[label]
        except KeyError:
            raise MappingError(f"speaker {label!r} is not in the speaker order") from None


def ato_order(
    segments: Sequence[SpeakerSegment], max_speakers: int = DEFAULT_MAX_SPEAKERS
) -> AtoPermutation:
    """Index speakers by their first onset; equal onsets break by label."""
    if not segments:
        raise ValidationError("arrival-time order needs at least one segment")
    first: dict[str, float] = {}
    for s in segments:
        if s.speaker not in first or s.onset < first[s.speaker]:
            first[s.speaker] = s.onset
    if len(first) > max_speakers:
        raise CapacityError(f"{len(first)} distinct speakers exceed the maximum of {max_speakers}")
    labels = sorted(first, key=lambda lab: (first[lab], lab))
    return AtoPermutation({lab: i for i, lab in enumerate(labels)}, first)


def build_activity(
    session: SessionAnnotation,
    frame_rate: float = DEFAULT_FRAME_RATE,
    order: AtoPermutation | None = None,
    K: int = DEFAULT_MAX_SPEAKERS,
    min_overlap: float = 0.0,
) -> ActivityMatrix:
    """Binary ground-truth activity from the session's segments.

    Frame ``t`` covers ``[t/fr, (t+1)/fr)``. With the default
    ``min_overlap=0`` a frame is active when any segment of the speaker
    overlaps it by a positive amount; otherwise the overlap must reach
    ``min_overlap`` times the frame length.
    """
    if not frame_rate > 0:
        raise ValidationError(f"frame_rate must be positive, got {frame_rate}")
    if order is None:
        order = ato_order(session.segments, K) if session.segments else AtoPermutation({}, {})
    if len(order) > K:
        raise CapacityError(f"{len(order)} speakers do not fit in K={K} rows")
    T = num_frames(session.duration, frame_rate)
    values = np.zeros((K, T))
    hop = 1.0 / frame_rate
    for seg in session.segments:
        k = order.index(seg.speaker)
        lo = seg.onset * frame_rate
        hi = seg.offset * frame_rate
        t0 = max(0, math.floor(lo + _EPS))
        t1 = min(T, math.ceil(hi - _EPS))
        if t1 <= t0:
            continue
        if min_overlap > 0:
            frames = np.arange(t0, t1)
            starts = frames * hop
            overlap = np.minimum(starts + hop, seg.offset) - np.maximum(starts, seg.onset)
            frames = frames[overlap >= min_overlap * hop - _EPS]
            values[k, frames] = 1.0
        else:
            values[k, t0:t1] = 1.0
    labels = [None] * K
    for lab, i in order.mapping.items():
        labels[i] = lab
    return ActivityMatrix(values, frame_rate, tuple(labels))


@dataclass(frozen=True)
class DiarizerNoiseConfig:
    miss_prob: float = 0.0
    false_alarm_prob: float = 0.0
    confusion_prob: float = 0.0
    boundary_jitter: float = 0.0
    smoothing_window: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("miss_prob", "false_alarm_prob", "confusion_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {p}")
        if not self.boundary_jitter >= 0:
            raise ValidationError(f"boundary_jitter must be >= 0, got {self.boundary_jitter}")
        w = self.smoothing_window
        if int(w) != w or w < 1 or w % 2 == 0:
            raise ValidationError(f"smoothing_window must be an odd count >= 1, got {w}")
        check_seed(self.seed)


def _runs(row: np.ndarray) -> list[tuple[int, int]]:
    padded = np.concatenate(([0], (row > 0).astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[0::2].tolist(), edges[1::2].tolist()))


def _box_filter(row: np.ndarray, window: int) -> np.ndarray:
    # mean over the in-range part of the window
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(row)))
    idx = np.arange(len(row))
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, len(row))
    return (csum[hi] - csum[lo]) / (hi - lo)


def simulate_diarizer(truth: ActivityMatrix, cfg: DiarizerNoiseConfig) -> ActivityMatrix:
    """Corrupt binary ground truth into diarizer-like soft supervision.

    Steps, in order: boundary jitter of every active run, missed frames,
    false alarms, per-frame speaker confusion (swap of two rows), then a
    centred box filter per row and clamping to [0, 1]. Deterministic for a
    given ``cfg.seed``.
    """
    if not truth.is_binary():
        raise ValidationError("simulate_diarizer expects a binary activity matrix")
    rng = make_rng(cfg.seed)
    x = truth.values.copy()
    K, T = x.shape

    if cfg.boundary_jitter > 0 and T > 0:
        jitter = cfg.boundary_jitter * truth.frame_rate
        out = np.zeros_like(x)
        for k in range(K):
            for start, end in _runs(x[k]):
                ds, de = rng.uniform(-jitter, jitter, size=2)
                s = min(max(int(round(start + ds)), 0), T)
                e = min(max(int(round(end + de)), 0), T)
                if e > s:
                    out[k, s:e] = 1.0
        x = out

    miss = rng.random((K, T)) < cfg.miss_prob
    fa = rng.random((K, T)) < cfg.false_alarm_prob
    active = x > 0
    x = np.where(active & miss, 0.0, x)
    x = np.where(~active & fa, 1.0, x)

    confuse = rng.random(T) < cfg.confusion_prob
    first = rng.integers(0, K, size=T)
    shift = rng.integers(1, K, size=T) if K > 1 else np.zeros(T, dtype=np.int64)
    if K > 1:
        cols = np.flatnonzero(confuse)
        i, j = first[cols], (first[cols] + shift[cols]) % K
        xi = x[i, cols].copy()
        x[i, cols] = x[j, cols]
        x[j, cols] = xi

    if cfg.smoothing_window > 1 and T > 0:
        x = np.vstack([_box_filter(x[k], int(cfg.smoothing_window)) for k in range(K)])
    x = np.clip(x, 0.0, 1.0)
    return ActivityMatrix(x, truth.frame_rate, truth.speaker_order)


@dataclass(frozen=True)
class MixConfig:
    rttm_mix_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rttm_mix_prob <= 1.0:
            raise ValidationError(f"rttm_mix_prob must be in [0, 1], got {self.rttm_mix_prob}")
        check_seed(self.seed)


def mix_choice(T: int, cfg: MixConfig) -> np.ndarray:
    """Boolean per frame: True where the ground-truth column is used."""
    return make_rng(cfg.seed).random(T) < cfg.rttm_mix_prob


def mix_supervision(rttm: ActivityMatrix, diar: ActivityMatrix, cfg: MixConfig) -> ActivityMatrix:
    """Per frame, take the whole ground-truth column with probability ``rttm_mix_prob``.

    The choice is made once per frame for all speakers together.
    """
    if rttm.values.shape != diar.values.shape:
        raise DimensionError(f"shape mismatch {rttm.values.shape} vs {diar.values.shape}")
    if rttm.frame_rate != diar.frame_rate:
        raise DimensionError(f"frame rate mismatch {rttm.frame_rate} vs {diar.frame_rate}")
    if rttm.speaker_order != diar.speaker_order:
        raise DimensionError("speaker order mismatch between supervision sources")
    use_rttm = mix_choice(rttm.T, cfg)
    values = np.where(use_rttm[None, :], rttm.values, diar.values)
    return ActivityMatrix(values, rttm.frame_rate, rttm.speaker_order)
