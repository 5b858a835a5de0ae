from __future__ import annotations

import itertools
import time

import numpy as np
import pytest

from mtmt.manifest_io import SessionAnnotation, WordEntry, derive_segments

# ---------------------------------------------------------------- oracles


def lev_oracle(a, b) -> int:
    """Textbook full-table Levenshtein distance on plain Python lists."""
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def cpwer_oracle(ref: dict, hyp: dict) -> int:
    """Minimum total distance over every speaker permutation."""
    r = list(ref.values())
    h = list(hyp.values())
    n = max(len(r), len(h))
    r += [[]] * (n - len(r))
    h += [[]] * (n - len(h))
    return min(
        sum(lev_oracle(r[i], h[p[i]]) for i in range(n)) for p in itertools.permutations(range(n))
    )


def random_session(
    rng: np.random.Generator,
    n_speakers: int | None = None,
    n_words: int | None = None,
    sid: str = "s",
    vocab=("a", "b", "c", "d", "e", "f"),
) -> SessionAnnotation:
    n_speakers = n_speakers or int(rng.integers(1, 5))
    n_words = n_words or int(rng.integers(1, 25))
    labels = [f"S{chr(65 + i)}" for i in range(n_speakers)]
    words = []
    for i in range(n_words):
        spk = labels[i % n_speakers] if i < n_speakers else labels[int(rng.integers(n_speakers))]
        onset = round(float(rng.integers(0, 60)) * 0.1, 1)  # coarse grid -> onset ties
        dur = round(float(rng.uniform(0.05, 0.6)), 2)
        words.append(WordEntry(str(rng.choice(vocab)), onset, dur, spk))
    segs = derive_segments(sid, words)
    end = max([w.offset for w in words] + [s.offset for s in segs])
    return SessionAnnotation(sid, segs, words, round(end + 0.3, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---------------------------------------------------------------- acceptance summary

_ACCEPTANCE: list[tuple[str, str, float]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    start = time.perf_counter()
    outcome = yield
    if item.get_closest_marker("acceptance"):
        label = item.get_closest_marker("acceptance").args[0]
        status = "FAIL" if outcome.excinfo is not None else "PASS"
        _ACCEPTANCE.append((label, status, time.perf_counter() - start))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, secs in _ACCEPTANCE:
        terminalreporter.write_line(f"{status}  {label}  ({secs:.2f}s)")
