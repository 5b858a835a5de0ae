"""Readers and writers for the external file formats.

* RTTM: the 10-field NIST layout; only ``SPEAKER`` records are consumed.
* Word manifests: JSON lines, one session per line, schema ``mtmt-manifest/1``.
* Tensor files: ``MTMT`` binary container of little-endian float32 values.

Times are kept as Python floats. They are quantized to centiseconds only when
an RTTM line is written, using round-half-to-even on the shortest decimal
representation of the value (so ``1.005`` becomes ``1.00`` and ``1.015``
becomes ``1.02``).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    ParseError,
    TensorFormatError,
    TruncatedTensorError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
    ValidationError,
)

MANIFEST_SCHEMA = "mtmt-manifest/1"
DEFAULT_GAP = 0.5
# sub-centisecond single-word segments are widened to this so RTTM can carry them
MIN_SEGMENT_DURATION = 0.01
_EPS = 1e-9


@dataclass(frozen=True)
class SpeakerSegment:
    session_id: str
    channel: int
    onset: float
    duration: float
    speaker: str

    def __post_init__(self):
        if not (math.isfinite(self.onset) and self.onset >= 0):
            raise ValidationError(f"segment onset must be >= 0, got {self.onset}")
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValidationError(f"segment duration must be > 0, got {self.duration}")
        if self.channel < 1:
            raise ValidationError(f"channel must be positive, got {self.channel}")
        if not self.speaker or any(c.isspace() for c in self.speaker):
            raise ValidationError(f"bad speaker label {self.speaker!r}")
        if not self.session_id or any(c.isspace() for c in self.session_id):
            raise ValidationError(f"bad session id {self.session_id!r}")

    @property
    def offset(self) -> float:
        return self.onset + self.duration


@dataclass(frozen=True)
class WordEntry:
    word: str
    onset: float
    duration: float
    speaker: str

    def __post_init__(self):
        word = self.word.strip()
        if not word or any(c.isspace() for c in word):
            raise ValidationError(f"bad word {self.word!r}")
        object.__setattr__(self, "word", word)
        if not (math.isfinite(self.onset) and self.onset >= 0):
            raise ValidationError(f"word onset must be >= 0, got {self.onset}")
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise ValidationError(f"word duration must be >= 0, got {self.duration}")
        if not self.speaker or any(c.isspace() for c in self.speaker):
            raise ValidationError(f"bad speaker label {self.speaker!r}")

    @property
    def offset(self) -> float:
        return self.onset + self.duration


@dataclass
class SessionAnnotation:
    """Speaker segments plus word timings for one recording."""

    session_id: str
    segments: list[SpeakerSegment]
    words: list[WordEntry]
    duration: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.segments = list(self.segments)
        self.words = list(self.words)
        self.validate()

    def validate(self) -> None:
        if not self.session_id or any(c.isspace() for c in self.session_id):
            raise ValidationError(f"bad session id {self.session_id!r}")
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise ValidationError(f"session duration must be >= 0, got {self.duration}")
        seg_speakers = {s.speaker for s in self.segments}
        for w in self.words:
            if w.speaker not in seg_speakers:
                raise ValidationError(
                    f"{self.session_id}: word speaker {w.speaker!r} has no segment"
                )
        latest = max(
            [s.offset for s in self.segments] + [w.offset for w in self.words], default=0.0
        )
        if latest > self.duration + _EPS:
            raise ValidationError(
                f"{self.session_id}: duration {self.duration} < last event end {latest}"
            )

    @property
    def speakers(self) -> list[str]:
        """Distinct segment speakers in first-appearance order."""
        return list(dict.fromkeys(s.speaker for s in self.segments))

    def words_inside_segments(self) -> bool:
        """True if every word lies within some segment of its own speaker."""
        for w in self.words:
            if not any(
                s.speaker == w.speaker and s.onset - _EPS <= w.onset and w.offset <= s.offset + _EPS
                for s in self.segments
            ):
                return False
        return True


# ---------------------------------------------------------------- RTTM


def _decode(data: str | bytes) -> str:
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"input is not valid UTF-8 ({e.reason} at byte {e.start})") from None
    return data


def _finite(token: str, what: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric {what} {token!r}", line=lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what} {token!r}", line=lineno)
    return value


def parse_rttm(text: str | bytes) -> list[SpeakerSegment]:
    """Parse RTTM text into segments, preserving input order.

    Blank lines and lines starting with ``;;`` are comments. Record types
    other than ``SPEAKER`` are skipped. A malformed ``SPEAKER`` line raises
    :class:`ParseError` with its line number.
    """
    text = _decode(text)
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(";;"):
            continue
        fields = stripped.split()
        if fields[0] != "SPEAKER":
            continue
        if len(fields) != 10:
            raise ParseError(f"expected 10 fields, found {len(fields)}", line=lineno)
        try:
            channel = int(fields[2])
        except ValueError:
            raise ParseError(f"non-integer channel {fields[2]!r}", line=lineno) from None
        onset = _finite(fields[3], "onset", lineno)
        duration = _finite(fields[4], "duration", lineno)
        if duration <= 0:
            raise ParseError(f"duration must be positive, got {fields[4]}", line=lineno)
        try:
            out.append(SpeakerSegment(fields[1], channel, onset, duration, fields[7]))
        except ValidationError as e:
            raise ParseError(str(e), line=lineno) from None
    return out


def quantize_cs(x: float) -> Decimal:
    """Round seconds to centiseconds, half-to-even on the shortest repr."""
    return Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN)


def centiseconds(x: float) -> float:
    return float(quantize_cs(x))


def format_rttm_line(seg: SpeakerSegment) -> str:
    dur = quantize_cs(seg.duration)
    if dur <= 0:
        raise ValidationError(f"segment duration {seg.duration} rounds to zero centiseconds")
    return (
        f"SPEAKER {seg.session_id} {seg.channel} {quantize_cs(seg.onset)} {dur}"
        f" <NA> <NA> {seg.speaker} <NA> <NA>"
    )


def write_rttm(segments: Iterable[SpeakerSegment]) -> str:
    return "".join(format_rttm_line(s) + "\n" for s in segments)


# ---------------------------------------------------------------- manifests


def derive_segments(
    session_id: str, words: Sequence[WordEntry], gap: float = DEFAULT_GAP
) -> list[SpeakerSegment]:
    """Merge each speaker's consecutive words into segments.

    Two consecutive words of the same speaker join one segment when the
    silence between them is shorter than ``gap`` seconds. Segments are
    returned ordered by onset, then speaker label.
    """
    by_speaker: dict[str, list[WordEntry]] = {}
    for w in words:
        by_speaker.setdefault(w.speaker, []).append(w)
    segs = []
    for spk, ws in by_speaker.items():
        ws = sorted(ws, key=lambda w: w.onset)
        start, end = ws[0].onset, ws[0].offset
        for w in ws[1:]:
            if w.onset - end < gap:
                end = max(end, w.offset)
            else:
                segs.append((start, end, spk))
                start, end = w.onset, w.offset
        segs.append((start, end, spk))
    segs.sort(key=lambda s: (s[0], s[2]))
    return [
        SpeakerSegment(session_id, 1, s, max(e - s, MIN_SEGMENT_DURATION), spk)
        for s, e, spk in segs
    ]


def _get(obj: dict, key: str, kinds, lineno: int, path: str):
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line=lineno, key=path or "<root>")
    if key not in obj:
        raise ParseError("missing key", line=lineno, key=f"{path}{key}")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ParseError(
            f"expected {_kind_name(kinds)}, got {type(value).__name__}",
            line=lineno,
            key=f"{path}{key}",
        )
    return value


def _kind_name(kinds) -> str:
    kinds = kinds if isinstance(kinds, tuple) else (kinds,)
    names = {int: "number", float: "number", str: "string", list: "array", dict: "object"}
    return "/".join(dict.fromkeys(names.get(k, k.__name__) for k in kinds))


_NUM = (int, float)


def session_from_dict(obj: dict, lineno: int = 1, gap: float = DEFAULT_GAP) -> SessionAnnotation:
    """Build a session from one decoded manifest object."""
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line=lineno)
    schema = obj.get("schema", MANIFEST_SCHEMA)
    if schema != MANIFEST_SCHEMA:
        raise ParseError(f"unsupported schema {schema!r}", line=lineno, key="schema")
    sid = _get(obj, "session_id", str, lineno, "")
    duration = float(_get(obj, "duration", _NUM, lineno, ""))
    raw_words = _get(obj, "words", list, lineno, "")
    try:
        words = []
        for i, w in enumerate(raw_words):
            p = f"words[{i}]."
            words.append(
                WordEntry(
                    _get(w, "word", str, lineno, p),
                    float(_get(w, "onset", _NUM, lineno, p)),
                    float(_get(w, "duration", _NUM, lineno, p)),
                    _get(w, "speaker", str, lineno, p),
                )
            )
        if "segments" in obj:
            raw_segs = _get(obj, "segments", list, lineno, "")
            segments = []
            for i, s in enumerate(raw_segs):
                p = f"segments[{i}]."
                channel = s.get("channel", 1) if isinstance(s, dict) else 1
                if isinstance(channel, bool) or not isinstance(channel, int):
                    raise ParseError("expected integer", line=lineno, key=f"{p}channel")
                segments.append(
                    SpeakerSegment(
                        sid,
                        channel,
                        float(_get(s, "onset", _NUM, lineno, p)),
                        float(_get(s, "duration", _NUM, lineno, p)),
                        _get(s, "speaker", str, lineno, p),
                    )
                )
        else:
            segments = derive_segments(sid, words, gap) if words else []
        meta = obj.get("meta", {})
        if not isinstance(meta, dict):
            raise ParseError("expected object", line=lineno, key="meta")
        return SessionAnnotation(sid, segments, words, duration, meta=meta)
    except ValidationError as e:
        raise ParseError(str(e), line=lineno) from None
    except OverflowError as e:
        raise ParseError(str(e), line=lineno) from None


def read_manifest(text: str | bytes, gap: float = DEFAULT_GAP) -> list[SessionAnnotation]:
    """Parse a JSON-lines word manifest.

    Sessions without an explicit ``segments`` list get segments derived from
    their words with :func:`derive_segments`.
    """
    text = _decode(text)
    sessions = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except (json.JSONDecodeError, RecursionError) as e:
            raise ParseError(f"invalid JSON: {e}", line=lineno) from None
        sessions.append(session_from_dict(obj, lineno, gap))
    return sessions


def session_to_dict(session: SessionAnnotation) -> dict:
    out = {
        "schema": MANIFEST_SCHEMA,
        "session_id": session.session_id,
        "duration": session.duration,
        "words": [
            {"word": w.word, "onset": w.onset, "duration": w.duration, "speaker": w.speaker}
            for w in session.words
        ],
        "segments": [
            {"onset": s.onset, "duration": s.duration, "speaker": s.speaker, "channel": s.channel}
            for s in session.segments
        ],
    }
    if session.meta:
        out["meta"] = session.meta
    return out


def write_manifest(sessions: Iterable[SessionAnnotation]) -> str:
    return "".join(json.dumps(session_to_dict(s), sort_keys=True) + "\n" for s in sessions)


# ---------------------------------------------------------------- tensors

TENSOR_MAGIC = b"MTMT"
TENSOR_VERSION = 1
DTYPE_F32LE = 1
_HEADER = 7


def write_tensor(dims: Sequence[int], values) -> bytes:
    """Encode a row-major float32 tensor.

    Layout: ``b"MTMT"``, version byte, dtype byte, rank byte, ``rank``
    little-endian uint64 dims, then the float32 little-endian payload.
    """
    dims = [int(d) for d in dims]
    if not dims or len(dims) > 255 or any(d <= 0 for d in dims):
        raise ValidationError(f"dims must be a non-empty list of positive sizes, got {dims}")
    arr = np.asarray(values, dtype="<f4").reshape(-1)
    if arr.size != math.prod(dims):
        raise ValidationError(f"{arr.size} values do not fill dims {dims}")
    header = TENSOR_MAGIC + bytes([TENSOR_VERSION, DTYPE_F32LE, len(dims)])
    return header + struct.pack(f"<{len(dims)}Q", *dims) + arr.tobytes()


def read_tensor(data: bytes) -> tuple[tuple[int, ...], np.ndarray]:
    """Decode bytes from :func:`write_tensor` into ``(dims, float32 array)``."""
    data = bytes(data)
    if len(data) < 4 or data[:4] != TENSOR_MAGIC:
        raise BadMagicError("missing MTMT magic")
    if len(data) < _HEADER:
        raise TruncatedTensorError("header truncated")
    if data[4] != TENSOR_VERSION:
        raise UnsupportedVersionError(f"unsupported version {data[4]}")
    if data[5] != DTYPE_F32LE:
        raise UnsupportedDtypeError(f"unsupported dtype code {data[5]}")
    rank = data[6]
    if rank == 0:
        raise TensorFormatError("rank must be positive")
    end = _HEADER + 8 * rank
    if len(data) < end:
        raise TruncatedTensorError("dims truncated")
    dims = struct.unpack(f"<{rank}Q", data[_HEADER:end])
    if any(d == 0 for d in dims):
        raise TensorFormatError(f"zero-sized dimension in {dims}")
    count = math.prod(dims)
    if len(data) - end < 4 * count:
        raise TruncatedTensorError(f"payload has {len(data) - end} bytes, need {4 * count}")
    if len(data) - end > 4 * count:
        raise TensorFormatError(f"{len(data) - end - 4 * count} trailing bytes")
    arr = np.frombuffer(data, dtype="<f4", count=count, offset=end).reshape(dims)
    return tuple(int(d) for d in dims), arr.astype(np.float32)


# ---------------------------------------------------------------- files


def atomic_write(path: str | os.PathLike, data: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8"})) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path: str | os.PathLike) -> Path:
    return Path(f"{path}.json")


def save_tensor(path, array: np.ndarray, meta: dict | None = None) -> None:
    array = np.asarray(array)
    atomic_write(path, write_tensor(array.shape, array))
    if meta is not None:
        atomic_write(sidecar_path(path), json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_tensor(path) -> tuple[np.ndarray, dict]:
    """Load a tensor file and its JSON sidecar (empty dict if absent)."""
    with open(path, "rb") as f:
        _, arr = read_tensor(f.read())
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    return arr, meta


def file_digest(path) -> str:
    with open(path, "rb") as f:
        return "sha256:" + hashlib.sha256(f.read()).hexdigest()
