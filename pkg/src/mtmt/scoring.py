"""WER, cpWER and TS-WER.

Text normalization: speaker and ``<beep>`` tokens are dropped, text is
lowercased, the characters ``. , ? ! ; : "`` are removed, and the remainder is
split on whitespace.

Alignment counts come from one minimal unit-cost alignment; among equal-cost
alternatives substitutions are preferred over insertions over deletions.
cpWER pads the smaller side with empty speaker streams and solves the
speaker correspondence exactly as a min-cost perfect assignment.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from .errors import MtmtError, UndefinedRateError
from .serialization import BEEP, SerializedTranscript, _SPK_RE, extract_ts, parse_serialized

TSWER_DEFINITION = "tswer/operational-v1"
PUNCTUATION = '.,?!;:"'
_PUNCT_TABLE = str.maketrans("", "", PUNCTUATION)


def normalize(text: str | Sequence[str]) -> list[str]:
    pieces = text.split() if isinstance(text, str) else list(text)
    out = []
    for p in pieces:
        if p == BEEP or _SPK_RE.fullmatch(p):
            continue
        p = p.lower().translate(_PUNCT_TABLE)
        out.extend(p.split())
    return out


@dataclass
class ScoreReport:
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    reference_words: int = 0
    assignment: dict | None = None
    metric: str = "wer"

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self) -> float | None:
        """(S + D + I) / N, or None when N is 0 and there are errors."""
        if self.reference_words == 0:
            return 0.0 if self.errors == 0 else None
        return self.errors / self.reference_words

    def to_dict(self) -> dict:
        d = asdict(self)
        d["errors"] = self.errors
        rate = self.rate
        d["rate"] = None if rate is None else round(rate, 4)
        if d["assignment"] is None:
            del d["assignment"]
        return d


class _Vocab:
    def __init__(self):
        self.ids: dict[str, int] = {}

    def encode(self, words: Sequence[str]) -> np.ndarray:
        return np.array([self.ids.setdefault(w, len(self.ids)) for w in words], dtype=np.int64)


def edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> int:
    v = _Vocab()
    return int(kernels.edit_distance(v.encode(ref), v.encode(hyp)))


def align_counts(ref: Sequence[str], hyp: Sequence[str]) -> tuple[int, int, int]:
    """(substitutions, deletions, insertions) of a minimal alignment."""
    v = _Vocab()
    return kernels.edit_counts(v.encode(ref), v.encode(hyp))


def _check_defined(report: ScoreReport) -> ScoreReport:
    if report.rate is None:
        raise UndefinedRateError(
            f"empty reference with {report.insertions} inserted words: rate undefined", report
        )
    return report


def wer(ref: Sequence[str], hyp: Sequence[str]) -> ScoreReport:
    """Word error rate of ``hyp`` against ``ref`` (already-tokenized word lists).

    Empty reference with non-empty hypothesis raises
    :class:`UndefinedRateError`; its ``report`` holds the insertion count.
    """
    s, d, i = align_counts(ref, hyp)
    return _check_defined(ScoreReport(s, d, i, len(ref)))


def pairwise_distances(
    ref_streams: Sequence[Sequence[str]], hyp_streams: Sequence[Sequence[str]]
) -> np.ndarray:
    """Edit-distance matrix, rows = reference speakers, columns = hypothesis speakers."""
    v = _Vocab()

    def pack(streams):
        ids = [v.encode(s) for s in streams]
        off = np.zeros(len(ids) + 1, dtype=np.int64)
        off[1:] = np.cumsum([len(x) for x in ids])
        flat = np.concatenate(ids) if ids else np.zeros(0, dtype=np.int64)
        return flat.astype(np.int64), off

    r_ids, r_off = pack(ref_streams)
    h_ids, h_off = pack(hyp_streams)
    return np.asarray(kernels.cost_matrix(r_ids, r_off, h_ids, h_off))


def cpwer(ref: Mapping, hyp: Mapping) -> ScoreReport:
    """Concatenated minimum-permutation WER.

    ``ref`` and ``hyp`` map speaker keys to word lists (each speaker's
    utterances already concatenated in time order). The report's
    ``assignment`` maps each hypothesis key to its reference key, or to None
    for a hypothesis speaker matched with an empty padding stream.
    """
    ref_keys, hyp_keys = list(ref), list(hyp)
    n = max(len(ref_keys), len(hyp_keys))
    ref_streams = [list(ref[k]) for k in ref_keys] + [[]] * (n - len(ref_keys))
    hyp_streams = [list(hyp[k]) for k in hyp_keys] + [[]] * (n - len(hyp_keys))
    total_ref = sum(len(s) for s in ref_streams)
    if total_ref == 0:
        raise UndefinedRateError("cpWER needs at least one reference word")
    cost = pairwise_distances(ref_streams, hyp_streams)
    rows, cols = linear_sum_assignment(cost)
    report = ScoreReport(reference_words=total_ref, metric="cpwer", assignment={})
    for r, c in zip(rows, cols):
        s, d, i = align_counts(ref_streams[r], hyp_streams[c])
        report.substitutions += s
        report.deletions += d
        report.insertions += i
        if c < len(hyp_keys):
            report.assignment[str(hyp_keys[c])] = str(ref_keys[r]) if r < len(ref_keys) else None
    return report


def tswer(ref_target: Sequence[str], hyp) -> ScoreReport:
    """WER of the target speaker's words.

    ``hyp`` may be a :class:`SerializedTranscript`, rendered transcript text,
    or a plain word list. Speaker-token transcripts are reduced to the
    ``<|spk0|>`` words first.
    """
    if isinstance(hyp, str):
        pieces = hyp.split()
        if any(p == BEEP or _SPK_RE.fullmatch(p) for p in pieces):
            hyp = parse_serialized(hyp, max_speakers=10)
        else:
            hyp = pieces
    if isinstance(hyp, SerializedTranscript):
        hyp = extract_ts(hyp)
    report = wer(list(ref_target), normalize(hyp))
    report.metric = TSWER_DEFINITION
    return report


@dataclass
class SessionResult:
    session_id: str
    report: ScoreReport | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        d = {"session_id": self.session_id}
        if self.report is not None:
            d.update(self.report.to_dict())
        if self.error is not None:
            d["error"] = self.error
        return d


@dataclass
class BatchReport:
    aggregate: ScoreReport
    sessions: list[SessionResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        agg = self.aggregate.to_dict()
        agg.pop("assignment", None)
        if self.aggregate.reference_words == 0:
            agg["rate"] = None
            agg["undefined"] = True
        return {"aggregate": agg, "sessions": [s.to_dict() for s in self.sessions]}


METRICS: dict[str, Callable] = {"wer": wer, "cpwer": cpwer, "tswer": tswer}


def score_batch(
    pairs: Iterable,
    metric: str = "wer",
    ids: Sequence[str] | None = None,
    scorer: Callable | None = None,
) -> BatchReport:
    """Score many sessions and micro-average: pooled errors / pooled reference words.

    A failing session is recorded with its error and the rest are still
    scored. Sessions with an undefined rate (empty reference) still add
    their insertions to the pooled counts. A ``hyp`` of None marks a
    missing hypothesis. ``scorer(ref, hyp)`` overrides the metric function,
    e.g. to convert raw records first.
    """
    fn = scorer or METRICS[metric]
    agg = ScoreReport(metric=metric if metric != "tswer" else TSWER_DEFINITION)
    results = []
    for n, (ref, hyp) in enumerate(pairs):
        sid = ids[n] if ids is not None else str(n)
        try:
            if hyp is None:
                raise MtmtError("missing hypothesis")
            report = fn(ref, hyp)
            error = None
        except UndefinedRateError as e:
            report, error = e.report, str(e)
        except MtmtError as e:
            results.append(SessionResult(sid, None, str(e)))
            continue
        if report is not None:
            agg.substitutions += report.substitutions
            agg.deletions += report.deletions
            agg.insertions += report.insertions
            agg.reference_words += report.reference_words
        results.append(SessionResult(sid, report, error))
    return BatchReport(agg, results)
