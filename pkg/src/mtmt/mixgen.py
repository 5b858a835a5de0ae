"""Manifest-level overlapped-speech mixtures and stand-in encoder embeddings.

Mixtures follow a LibriSpeechMix-like recipe: the first utterance starts at
0 and each later one starts uniformly between the previous start and the
current end of the mixture, so starts strictly ascend and utterances
partially overlap. Source utterances are trimmed to their word span before
placement, so a speaker's start is also its first word onset.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParseError, PoolError, ValidationError
from .manifest_io import (
    DEFAULT_GAP,
    SessionAnnotation,
    WordEntry,
    _decode,
    derive_segments,
)
from .rng import check_seed, make_rng
from .supervision import DEFAULT_FRAME_RATE, AtoPermutation, build_activity, num_frames

DELAY_LAW = "uniform_over_prefix/v1"
NOISE_STD = 0.01


@dataclass(frozen=True)
class SourceUtterance:
    id: str
    speaker: str
    words: tuple  # WordEntry, onsets relative to utterance start
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if not self.words:
            raise ValidationError(f"utterance {self.id}: no words")
        prev = -math.inf
        for w in self.words:
            if w.onset < prev:
                raise ValidationError(f"utterance {self.id}: word onsets must be non-decreasing")
            prev = w.onset
            if w.offset > self.duration + 1e-9:
                raise ValidationError(f"utterance {self.id}: word ends after utterance end")

    def trimmed(self) -> "SourceUtterance":
        start = self.words[0].onset
        end = max(w.offset for w in self.words)
        words = tuple(
            WordEntry(w.word, w.onset - start, w.duration, self.speaker) for w in self.words
        )
        return SourceUtterance(self.id, self.speaker, words, max(end - start, 1e-3))


@dataclass(frozen=True)
class MixRecipe:
    n_speakers: int = 2
    delay_law: str = "uniform_over_prefix"
    seed: int = 0

    def __post_init__(self):
        if self.n_speakers not in (2, 3):
            raise ValidationError(f"n_speakers must be 2 or 3, got {self.n_speakers}")
        if self.delay_law != "uniform_over_prefix":
            raise ValidationError(f"unknown delay law {self.delay_law!r}")
        check_seed(self.seed)


def read_pool(text: str | bytes) -> list[SourceUtterance]:
    """Parse a JSONL pool: ``{id, speaker, duration, words: [{word, onset, duration}]}``."""
    pool = []
    for lineno, line in enumerate(_decode(text).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            spk = obj["speaker"]
            words = [
                WordEntry(w["word"], float(w["onset"]), float(w["duration"]), spk)
                for w in obj["words"]
            ]
            pool.append(SourceUtterance(str(obj["id"]), spk, words, float(obj["duration"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, ValidationError) as e:
            raise ParseError(f"bad pool entry: {e}", line=lineno) from None
    return pool


def write_pool(pool: Sequence[SourceUtterance]) -> str:
    lines = []
    for u in pool:
        obj = {
            "id": u.id,
            "speaker": u.speaker,
            "duration": u.duration,
            "words": [{"word": w.word, "onset": w.onset, "duration": w.duration} for w in u.words],
        }
        lines.append(json.dumps(obj, sort_keys=True))
    return "".join(line + "\n" for line in lines)


_SYLLABLES = ["ka", "lo", "mi", "ra", "te", "su", "no", "vi", "pe", "da", "zu", "ho"]


def synthetic_pool(
    n_speakers: int = 8, utts_per_speaker: int = 4, seed: int = 0
) -> list[SourceUtterance]:
    """Random pseudo-word utterances of 2-8 s, for demos and tests."""
    rng = make_rng(seed)
    pool = []
    for s in range(n_speakers):
        spk = f"spk{s:03d}"
        for u in range(utts_per_speaker):
            words, t = [], 0.0
            n_words = int(rng.integers(5, 20))
            for _ in range(n_words):
                t += float(rng.uniform(0.02, 0.15))
                dur = float(rng.uniform(0.15, 0.45))
                syl = rng.choice(len(_SYLLABLES), size=int(rng.integers(1, 4)))
                words.append(WordEntry("".join(_SYLLABLES[i] for i in syl), round(t, 3), round(dur, 3), spk))
                t = round(t, 3) + round(dur, 3)
            pool.append(SourceUtterance(f"{spk}-u{u}", spk, words, round(t + 0.1, 3)))
    return pool


def compose_mixture(
    utts: Sequence[SourceUtterance],
    offsets: Sequence[float],
    session_id: str,
    gap: float = DEFAULT_GAP,
    meta: dict | None = None,
) -> SessionAnnotation:
    """Place (already trimmed) utterances at ``offsets`` and build the session."""
    words = []
    end = 0.0
    for u, off in zip(utts, offsets, strict=True):
        for w in u.words:
            words.append(WordEntry(w.word, off + w.onset, w.duration, u.speaker))
        end = max(end, off + u.duration)
    segments = derive_segments(session_id, words, gap)
    end = max([end] + [s.offset for s in segments])
    return SessionAnnotation(session_id, segments, words, end, meta=dict(meta or {}))


def sample_offsets(durations: Sequence[float], rng: np.random.Generator) -> list[float]:
    """Start 0, then each start uniform in (previous start, current mixture end].

    Starts are rounded to milliseconds, staying strictly after the previous one.
    """
    offsets = [0.0]
    end = durations[0]
    for dur in durations[1:]:
        prev = offsets[-1]
        start = prev + (end - prev) * (1.0 - rng.random())
        start = max(round(start, 3), round(prev + 0.001, 3))
        offsets.append(start)
        end = max(end, start + dur)
    return offsets


def mix_sessions(
    utts: Sequence[SourceUtterance], recipe: MixRecipe, count: int, gap: float = DEFAULT_GAP
) -> list[SessionAnnotation]:
    """Generate ``count`` mixtures; mixture ``i`` depends only on (seed, i)."""
    by_speaker: dict[str, list[SourceUtterance]] = {}
    for u in utts:
        by_speaker.setdefault(u.speaker, []).append(u)
    speakers = sorted(by_speaker)
    n = recipe.n_speakers
    if len(speakers) < n:
        raise PoolError(f"pool has {len(speakers)} distinct speakers, recipe needs {n}")
    sessions = []
    for i in range(count):
        rng = make_rng(recipe.seed, i)
        chosen = rng.choice(len(speakers), size=n, replace=False)
        picked = []
        for s in chosen:
            cands = by_speaker[speakers[int(s)]]
            picked.append(cands[int(rng.integers(len(cands)))].trimmed())
        offsets = sample_offsets([u.duration for u in picked], rng)
        sid = f"mix{n}-{recipe.seed}-{i:06d}"
        meta = {
            "delay_law": DELAY_LAW,
            "sources": [u.id for u in picked],
            "offsets": offsets,
        }
        sessions.append(compose_mixture(picked, offsets, sid, gap, meta))
    return sessions


def speaker_direction(label: str, D: int, seed: int) -> np.ndarray:
    """Fixed unit vector for a speaker label (seeded random projection)."""
    v = make_rng(seed, 1, zlib.crc32(label.encode("utf-8"))).standard_normal(D)
    return v / np.linalg.norm(v)


def synth_embeddings(
    session: SessionAnnotation,
    D: int,
    frame_rate: float = DEFAULT_FRAME_RATE,
    seed: int = 0,
    order: AtoPermutation | None = None,
    K: int | None = None,
) -> np.ndarray:
    """Pseudo encoder output, D x T.

    Column t is the sum of the unit directions of the speakers active in
    frame t plus Gaussian noise with standard deviation 0.01.
    """
    if D < 1:
        raise ValidationError(f"D must be >= 1, got {D}")
    K = K or max(len(session.speakers), 1)
    act = build_activity(session, frame_rate, order, K)
    T = num_frames(session.duration, frame_rate)
    A = np.zeros((D, T))
    for k, label in enumerate(act.speaker_order):
        if label is not None:
            A += np.outer(speaker_direction(label, D, seed), act.values[k])
    A += NOISE_STD * make_rng(seed, 0).standard_normal((D, T))
    return A
