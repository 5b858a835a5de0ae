"""Speaker-token transcripts for multi-speaker, target-speaker and dual-task ASR.

Rendered text is space-joined tokens, e.g. ``<|spk0|> hi there <|spk1|> yo``
(multi-speaker), ``<beep> hi there`` (target-speaker) or
``<beep> <|spk1|> hi there <|spk0|> yo`` (dual-task with a query).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EligibilityError, MappingError, ValidationError
from .manifest_io import SessionAnnotation, WordEntry
from .rng import make_rng
from .supervision import DEFAULT_MAX_SPEAKERS, AtoPermutation, ato_order

BEEP = "<beep>"
MODES = ("ms", "ts", "dual")
QUERY_MIN_DURATION = 3.0
QUERY_MAX_DURATION = 10.0
QUERY_MIN_WORDS = 5
_SPK_RE = re.compile(r"<\|spk([0-9])\|>")
_EPS = 1e-9


def speaker_token(index: int) -> str:
    return f"<|spk{index}|>"


@dataclass(frozen=True)
class Token:
    kind: str  # "word" | "speaker" | "beep"
    text: str
    index: int | None = None

    @classmethod
    def word(cls, text: str) -> "Token":
        return cls("word", text)

    @classmethod
    def speaker(cls, index: int) -> "Token":
        return cls("speaker", speaker_token(index), index)

    @classmethod
    def beep(cls) -> "Token":
        return cls("beep", BEEP)


@dataclass(frozen=True)
class SerializedTranscript:
    tokens: tuple
    mode: str

    def render(self) -> str:
        return " ".join(t.text for t in self.tokens)

    def words(self) -> list[str]:
        return [t.text for t in self.tokens if t.kind == "word"]

    def validate(self, max_speakers: int = DEFAULT_MAX_SPEAKERS) -> "SerializedTranscript":
        if self.mode not in MODES:
            raise ValidationError(f"unknown transcript mode {self.mode!r}")
        beeps = sum(t.kind == "beep" for t in self.tokens)
        if self.mode == "ms" and beeps:
            raise ValidationError("multi-speaker transcripts carry no <beep>")
        if self.mode in ("ts", "dual") and beeps != 1:
            raise ValidationError(f"{self.mode} transcript needs exactly one <beep>, found {beeps}")
        seen_speaker = False
        for t in self.tokens:
            if t.kind == "speaker":
                if self.mode == "ts":
                    raise ValidationError("target-speaker transcripts carry no speaker tokens")
                if t.index >= max_speakers:
                    raise ValidationError(
                        f"speaker token {t.text} exceeds max speakers {max_speakers}"
                    )
                seen_speaker = True
            elif t.kind == "word" and self.mode != "ts" and not seen_speaker:
                raise ValidationError(f"word {t.text!r} precedes any speaker token")
        return self


def parse_serialized(
    text: str, mode: str | None = None, max_speakers: int = DEFAULT_MAX_SPEAKERS
) -> SerializedTranscript:
    """Tokenize rendered text and validate it.

    If ``mode`` is omitted it is inferred: no ``<beep>`` means ``ms``; a
    ``<beep>`` with speaker tokens means ``dual``; otherwise ``ts``.
    """
    tokens = []
    for piece in text.split():
        m = _SPK_RE.fullmatch(piece)
        if m:
            tokens.append(Token.speaker(int(m.group(1))))
        elif piece == BEEP:
            tokens.append(Token.beep())
        else:
            tokens.append(Token.word(piece))
    if mode is None:
        kinds = {t.kind for t in tokens}
        mode = "ms" if "beep" not in kinds else ("dual" if "speaker" in kinds else "ts")
    return SerializedTranscript(tuple(tokens), mode).validate(max_speakers)


def _sorted_words(words: Sequence[WordEntry], index_of) -> list[tuple[int, WordEntry]]:
    keyed = [(w.onset, index_of(w.speaker), i, w) for i, w in enumerate(words)]
    keyed.sort(key=lambda x: x[:3])
    return [(k[1], k[3]) for k in keyed]


def _speaker_stream(indexed: Iterable[tuple[int, WordEntry]], per_word: bool) -> list[Token]:
    tokens: list[Token] = []
    current = None
    for idx, w in indexed:
        if per_word or idx != current:
            tokens.append(Token.speaker(idx))
            current = idx
        tokens.append(Token.word(w.word))
    return tokens


def serialize_ms(
    session: SessionAnnotation,
    order: AtoPermutation | None = None,
    per_word: bool = False,
) -> SerializedTranscript:
    """Words in onset order, with a speaker token at every speaker change.

    Equal onsets go to the smaller speaker index first. ``per_word=True``
    emits a speaker token before every word instead.
    """
    order = order or ato_order(session.segments)
    tokens = _speaker_stream(_sorted_words(session.words, order.index), per_word)
    return SerializedTranscript(tuple(tokens), "ms")


@dataclass(frozen=True)
class QuerySpec:
    speaker: str
    onset: float
    duration: float
    word_count: int

    def __post_init__(self):
        if not QUERY_MIN_DURATION - _EPS <= self.duration <= QUERY_MAX_DURATION + _EPS:
            raise ValidationError(
                f"query duration {self.duration:.3f}s outside "
                f"[{QUERY_MIN_DURATION}, {QUERY_MAX_DURATION}]"
            )
        if self.word_count < QUERY_MIN_WORDS:
            raise ValidationError(
                f"query has {self.word_count} words, needs at least {QUERY_MIN_WORDS}"
            )

    def to_dict(self) -> dict:
        return {
            "speaker": self.speaker,
            "onset": self.onset,
            "duration": self.duration,
            "word_count": self.word_count,
        }


def _union(intervals: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for s, e in sorted(intervals):
        if out and s <= out[-1][1]:
            out[-1][1] = max(out[-1][1], e)
        else:
            out.append([s, e])
    return [(s, e) for s, e in out]


def solo_regions(session: SessionAnnotation, speaker: str) -> list[tuple[float, float]]:
    """Maximal intervals where ``speaker`` is active and nobody else is."""
    own = _union((s.onset, s.offset) for s in session.segments if s.speaker == speaker)
    others = _union((s.onset, s.offset) for s in session.segments if s.speaker != speaker)
    regions = []
    for s, e in own:
        cur = s
        for os_, oe in others:
            if oe <= cur or os_ >= e:
                continue
            if os_ > cur:
                regions.append((cur, os_))
            cur = max(cur, oe)
            if cur >= e:
                break
        if cur < e:
            regions.append((cur, e))
    return [(s, e) for s, e in regions if e - s > _EPS]


def query_candidates(session: SessionAnnotation, speaker: str) -> list[QuerySpec]:
    """Every eligible query window for ``speaker``, in time order.

    A solo region of 3-10 s with at least five of the speaker's words is a
    single candidate. Longer regions yield one window per word start: the
    window spans the longest run of whole words fitting in 10 s, extended
    with in-region silence to reach 3 s if needed.
    """
    words = sorted((w for w in session.words if w.speaker == speaker), key=lambda w: w.onset)
    out = []
    for rs, re_ in solo_regions(session, speaker):
        inside = [w for w in words if w.onset >= rs - _EPS and w.offset <= re_ + _EPS]
        length = re_ - rs
        if length <= QUERY_MAX_DURATION + _EPS:
            if length >= QUERY_MIN_DURATION - _EPS and len(inside) >= QUERY_MIN_WORDS:
                out.append(QuerySpec(speaker, rs, min(length, QUERY_MAX_DURATION), len(inside)))
            continue
        for i, w in enumerate(inside):
            start = w.onset
            limit = start + QUERY_MAX_DURATION
            run = [x for x in inside[i:] if x.offset <= limit + _EPS]
            if len(run) < QUERY_MIN_WORDS:
                continue
            end = max(run[-1].offset, min(start + QUERY_MIN_DURATION, re_))
            if end - start >= QUERY_MIN_DURATION - _EPS:
                out.append(QuerySpec(speaker, start, min(end - start, QUERY_MAX_DURATION), len(run)))
    return out


def select_query(session: SessionAnnotation, speaker: str, rng_seed: int) -> QuerySpec:
    """Sample one eligible single-speaker query window uniformly.

    Raises :class:`EligibilityError` when the speaker has none.
    """
    cands = query_candidates(session, speaker)
    if not cands:
        raise EligibilityError(
            f"{session.session_id}: speaker {speaker!r} has no solo region of "
            f"{QUERY_MIN_DURATION:g}-{QUERY_MAX_DURATION:g}s with >= {QUERY_MIN_WORDS} words"
        )
    return cands[int(make_rng(rng_seed).integers(len(cands)))]


def _target_label(session: SessionAnnotation, order: AtoPermutation, query) -> str:
    label = query.speaker if isinstance(query, QuerySpec) else query
    if label not in order.mapping:
        raise MappingError(f"{session.session_id}: query speaker {label!r} not in session")
    return label


def serialize_ts(
    session: SessionAnnotation,
    order: AtoPermutation | None,
    query: QuerySpec | str,
) -> SerializedTranscript:
    """``<beep>`` followed by the target speaker's words only."""
    order = order or ato_order(session.segments)
    target = _target_label(session, order, query)
    words = [w for _, w in _sorted_words(session.words, order.index) if w.speaker == target]
    return SerializedTranscript((Token.beep(),) + tuple(Token.word(w.word) for w in words), "ts")


def dual_order(order: AtoPermutation, query_speaker: str | None) -> AtoPermutation:
    """Move the query speaker to index 0; others keep their relative ATO."""
    if query_speaker is None:
        return order
    if query_speaker not in order.mapping:
        raise MappingError(f"query speaker {query_speaker!r} not in speaker order")
    rest = [lab for lab in order.labels if lab != query_speaker]
    mapping = {query_speaker: 0, **{lab: i + 1 for i, lab in enumerate(rest)}}
    return AtoPermutation(mapping, dict(order.arrival_times))


def serialize_dual(
    session: SessionAnnotation,
    order: AtoPermutation | None = None,
    query: QuerySpec | str | None = None,
    per_word: bool = False,
) -> SerializedTranscript:
    """Multi-speaker transcript behind a ``<beep>``, indexed from the query speaker."""
    order = order or ato_order(session.segments)
    label = None if query is None else _target_label(session, order, query)
    reindexed = dual_order(order, label)
    tokens = _speaker_stream(_sorted_words(session.words, reindexed.index), per_word)
    return SerializedTranscript((Token.beep(),) + tuple(tokens), "dual")


def extract_ts(transcript: SerializedTranscript) -> list[str]:
    """Words governed by ``<|spk0|>``, merged in stream order.

    Target-speaker transcripts carry only target words, so all are returned.
    """
    if transcript.mode == "ts":
        return transcript.words()
    out = []
    current = None
    for t in transcript.tokens:
        if t.kind == "speaker":
            current = t.index
        elif t.kind == "word" and current == 0:
            out.append(t.text)
    return out


def speaker_streams(transcript: SerializedTranscript) -> dict[int, list[str]]:
    """Per-speaker-index word lists, each in stream order."""
    streams: dict[int, list[str]] = {}
    current = None
    for t in transcript.tokens:
        if t.kind == "speaker":
            current = t.index
            streams.setdefault(current, [])
        elif t.kind == "word" and current is not None:
            streams[current].append(t.text)
    return streams
