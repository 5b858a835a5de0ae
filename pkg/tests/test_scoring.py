import numpy as np
import pytest
from conftest import cpwer_oracle, lev_oracle

from mtmt import _kernels_numpy, kernels
from mtmt.errors import UndefinedRateError
from mtmt.scoring import (
    TSWER_DEFINITION,
    align_counts,
    cpwer,
    edit_distance,
    normalize,
    score_batch,
    tswer,
    wer,
)
from mtmt.serialization import parse_serialized


def test_normalize():
    assert normalize("Hello, WORLD!") == ["hello", "world"]
    assert normalize("<beep> hi") == ["hi"]
    assert normalize("") == []
    assert normalize('<|spk1|> "Yes;" no: ok?') == ["yes", "no", "ok"]


def test_wer_examples():
    r = wer(["the", "cat", "sat"], ["the", "cat"])
    assert (r.deletions, r.rate) == (1, pytest.approx(1 / 3))
    assert wer(list("abc"), list("abc")).rate == 0
    r = wer(["a", "b", "c"], ["a", "x", "c"])
    assert (r.substitutions, r.deletions, r.insertions) == (1, 0, 0)
    assert r.errors == lev_oracle("abc", "axc")


def test_wer_empty_cases():
    assert wer([], []).rate == 0
    with pytest.raises(UndefinedRateError) as exc:
        wer([], ["x", "y"])
    assert exc.value.report.insertions == 2
    assert wer(["a", "b"], []).rate == 1


@pytest.mark.parametrize(
    "ref,hyp,counts",
    [
        ("ab", "ba", (2, 0, 0)),  # two substitutions beat delete+insert
        ("ab", "c", (1, 1, 0)),
        ("a", "bc", (1, 0, 1)),
        ("abc", "", (0, 3, 0)),
        ("", "ab", (0, 0, 2)),
    ],
)
def test_tie_break_counts(ref, hyp, counts):
    assert align_counts(list(ref), list(hyp)) == counts
    assert _kernels_numpy.edit_counts(
        np.array([ord(c) for c in ref], dtype=np.int64), np.array([ord(c) for c in hyp], dtype=np.int64)
    ) == counts


def test_counts_sum_to_distance_random(rng):
    for _ in range(300):
        a = list(rng.choice(list("abcd"), int(rng.integers(0, 12))))
        b = list(rng.choice(list("abcd"), int(rng.integers(0, 12))))
        s, d, i = align_counts(a, b)
        assert s + d + i == lev_oracle(a, b) == edit_distance(a, b)
        assert len(a) - d == len(b) - i  # alignment consistency


def test_numpy_backend_matches_oracle(rng):
    for _ in range(300):
        a = rng.integers(0, 3, int(rng.integers(0, 9))).astype(np.int64)
        b = rng.integers(0, 3, int(rng.integers(0, 9))).astype(np.int64)
        assert _kernels_numpy.edit_distance(a, b) == lev_oracle(a.tolist(), b.tolist())
        assert _kernels_numpy.edit_counts(a, b) == kernels.edit_counts(a, b)


REF = {"0": "hello world".split(), "1": "good morning".split()}


def test_cpwer_examples():
    r = cpwer(REF, {"A": "good morning".split(), "B": "hello world".split()})
    assert r.rate == 0 and r.assignment == {"A": "1", "B": "0"}
    r = cpwer(REF, {"A": "hello word".split(), "B": "good morning".split()})
    assert r.errors == 1 and r.rate == 0.25
    assert r.errors == cpwer_oracle(REF, {"A": "hello word".split(), "B": "good morning".split()})


def test_cpwer_extra_hyp_speaker_is_insertions():
    hyp = {"A": "hello world".split(), "B": "good morning".split(), "C": ["uh", "um"]}
    r = cpwer(REF, hyp)
    assert (r.insertions, r.errors) == (2, 2) and r.assignment["C"] is None
    r = cpwer({**REF, "2": ["x"]}, {"A": "hello world".split()})
    assert r.deletions == 3


def test_cpwer_no_reference_words():
    with pytest.raises(UndefinedRateError):
        cpwer({"0": []}, {"A": ["x"]})


def test_cpwer_minimal_vs_identity(rng):
    for _ in range(100):
        n = int(rng.integers(1, 5))
        ref = {str(k): list(rng.choice(list("abc"), int(rng.integers(1, 6)))) for k in range(n)}
        hyp = {str(k): list(rng.choice(list("abc"), int(rng.integers(0, 6)))) for k in range(n)}
        identity = sum(lev_oracle(ref[k], hyp[k]) for k in ref)
        assert cpwer(ref, hyp).errors <= identity


def test_tswer_examples():
    assert tswer(["hi", "there"], "<|spk0|> hi there <|spk1|> yo").rate == 0
    r = tswer(["hi"], "<|spk1|> yo")
    assert (r.deletions, r.rate) == (1, 1.0)
    r = tswer(["hi", "there"], parse_serialized("<beep> hi thre"))
    assert (r.substitutions, r.rate) == (1, 0.5)
    assert r.metric == TSWER_DEFINITION
    assert tswer(["a"], ["A."]).rate == 0


def test_score_batch_micro_average():
    pairs = [(list("abcdefghij"), list("abcdefghiX")), (list("abcdefghij"), list("abcdefghij"))]
    b = score_batch(pairs)
    assert b.aggregate.rate == 0.05
    assert [s.report.errors for s in b.sessions] == [1, 0]


def test_score_batch_empty_and_errors():
    b = score_batch([])
    assert b.aggregate.reference_words == 0 and b.to_dict()["aggregate"]["undefined"]
    b = score_batch([(["a"], None), (["a", "b"], ["a"]), ([], ["z"])], ids=["x", "y", "z"])
    assert b.sessions[0].error == "missing hypothesis"
    assert b.sessions[1].report.rate == 0.5
    assert b.sessions[2].error and b.sessions[2].report.insertions == 1
    assert (b.aggregate.reference_words, b.aggregate.errors) == (2, 2)


def test_score_batch_order_independent(rng):
    pairs = [
        (list(rng.choice(list("abc"), int(rng.integers(1, 8)))), list(rng.choice(list("abc"), int(rng.integers(0, 8)))))
        for _ in range(30)
    ]
    base = score_batch(pairs).aggregate
    for _ in range(20):
        perm = rng.permutation(len(pairs))
        agg = score_batch([pairs[i] for i in perm]).aggregate
        assert (agg.errors, agg.reference_words, agg.rate) == (base.errors, base.reference_words, base.rate)


def test_score_batch_single_session_equals_direct():
    ref, hyp = list("abcde"), list("abxd")
    assert score_batch([(ref, hyp)]).aggregate.rate == wer(ref, hyp).rate
    assert score_batch([(REF, {"A": ["hello"]})], "cpwer").aggregate.rate == cpwer(REF, {"A": ["hello"]}).rate
