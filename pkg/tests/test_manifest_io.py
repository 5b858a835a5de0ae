import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtmt.errors import (
    BadMagicError,
    ParseError,
    TensorFormatError,
    TruncatedTensorError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
    ValidationError,
)
from mtmt.manifest_io import (
    SessionAnnotation,
    SpeakerSegment,
    WordEntry,
    centiseconds,
    load_tensor,
    parse_rttm,
    read_manifest,
    read_tensor,
    save_tensor,
    write_manifest,
    write_rttm,
    write_tensor,
)

LINE = "SPEAKER s1 1 10.00 3.50 <NA> <NA> spkA <NA> <NA>"


def test_parse_rttm_single_record():
    (seg,) = parse_rttm(LINE)
    assert seg == SpeakerSegment("s1", 1, 10.0, 3.5, "spkA")


def test_parse_rttm_empty_and_comments():
    assert parse_rttm("") == []
    segs = parse_rttm(";; comment\nSPEAKER s1 1 0.00 1.00 <NA> <NA> a <NA> <NA>")
    assert len(segs) == 1 and segs[0].onset == 0.0


def test_parse_rttm_skips_other_record_types_and_keeps_order():
    text = "\n".join(
        [
            "SPKR-INFO s1 1 <NA> <NA> <NA> unknown b <NA> <NA>",
            "SPEAKER s1 1 5.00 1.00 <NA> <NA> b <NA> <NA>",
            "",
            "SPEAKER s1 1 1.00 1.00 <NA> <NA> a <NA> <NA>",
        ]
    )
    assert [s.speaker for s in parse_rttm(text)] == ["b", "a"]


@pytest.mark.parametrize(
    "line",
    [
        "SPEAKER s1 1 0.00 1.00 <NA> <NA> a <NA>",
        "SPEAKER s1 1 zero 1.00 <NA> <NA> a <NA> <NA>",
        "SPEAKER s1 1 0.00 0.00 <NA> <NA> a <NA> <NA>",
        "SPEAKER s1 1 -1.00 1.00 <NA> <NA> a <NA> <NA>",
        "SPEAKER s1 x 0.00 1.00 <NA> <NA> a <NA> <NA>",
        "SPEAKER s1 1 nan 1.00 <NA> <NA> a <NA> <NA>",
    ],
)
def test_parse_rttm_malformed_reports_line(line):
    with pytest.raises(ParseError) as exc:
        parse_rttm(LINE + "\n;; c\n" + line)
    assert exc.value.line == 3


def test_write_rttm_format_and_round_trip():
    seg = SpeakerSegment("s1", 1, 10.0, 3.5, "spkA")
    assert write_rttm([seg]) == LINE + "\n"
    assert write_rttm(parse_rttm(LINE)).strip() == LINE


def test_write_rttm_rounds_half_to_even():
    seg = SpeakerSegment("s1", 1, 1.005, 1.015, "a")
    assert write_rttm([seg]).split()[3:5] == ["1.00", "1.02"]
    assert centiseconds(2.675) == 2.68  # shortest repr is 2.675 -> half to even


segments = st.builds(
    SpeakerSegment,
    session_id=st.sampled_from(["s1", "rec-2"]),
    channel=st.integers(1, 3),
    onset=st.floats(0, 5000, allow_nan=False),
    duration=st.floats(0.01, 600, allow_nan=False),
    speaker=st.from_regex(r"[A-Za-z0-9_\-]{1,8}", fullmatch=True),
)


@settings(max_examples=300, deadline=None)
@given(st.lists(segments, max_size=8))
def test_rttm_round_trip_is_quantization(segs):
    back = parse_rttm(write_rttm(segs))
    assert [(s.session_id, s.channel, s.speaker) for s in back] == [
        (s.session_id, s.channel, s.speaker) for s in segs
    ]
    assert [s.onset for s in back] == [centiseconds(s.onset) for s in segs]
    assert [s.duration for s in back] == [centiseconds(s.duration) for s in segs]
    # quantized input is a fixed point
    assert write_rttm(back) == write_rttm(segs)


def _line(words, **extra):
    return json.dumps({"session_id": "m1", "duration": 10.0, "words": words, **extra})


def test_manifest_merges_close_words():
    words = [
        {"word": "hi", "onset": 0.0, "duration": 0.4, "speaker": "A"},
        {"word": "there", "onset": 0.5, "duration": 0.5, "speaker": "A"},
    ]
    (s,) = read_manifest(_line(words))
    assert len(s.segments) == 1
    assert s.segments[0].onset == 0.0 and s.segments[0].offset == pytest.approx(1.0)


def test_manifest_splits_speakers_and_long_gaps():
    words = [
        {"word": "a", "onset": 0.0, "duration": 0.4, "speaker": "A"},
        {"word": "b", "onset": 1.0, "duration": 0.4, "speaker": "B"},
        {"word": "c", "onset": 3.0, "duration": 0.4, "speaker": "B"},
    ]
    (s,) = read_manifest(_line(words))
    assert [(g.speaker, g.onset) for g in s.segments] == [("A", 0.0), ("B", 1.0), ("B", 3.0)]
    (s,) = read_manifest(_line(words), gap=3.0)
    assert len(s.segments) == 2


def test_manifest_errors_name_line_and_key():
    with pytest.raises(ParseError) as exc:
        read_manifest("{not json")
    assert exc.value.line == 1
    ok = _line([])
    bad = json.dumps({"session_id": "x", "duration": 1.0, "words": [{"word": "a", "onset": "0", "duration": 0.1, "speaker": "A"}]})
    with pytest.raises(ParseError) as exc:
        read_manifest(ok + "\n" + bad)
    assert exc.value.line == 2 and exc.value.key == "words[0].onset"
    with pytest.raises(ParseError) as exc:
        read_manifest(json.dumps({"session_id": "x", "words": []}))
    assert exc.value.key == "duration"


def test_manifest_rejects_wrong_schema_and_short_duration():
    with pytest.raises(ParseError):
        read_manifest(_line([], schema="other/2"))
    words = [{"word": "a", "onset": 9.9, "duration": 0.5, "speaker": "A"}]
    with pytest.raises(ParseError):
        read_manifest(_line(words))


def test_manifest_round_trip(rng):
    from conftest import random_session

    sessions = [random_session(rng, sid=f"s{i}") for i in range(20)]
    back = read_manifest(write_manifest(sessions))
    for a, b in zip(sessions, back):
        assert a.words == b.words and a.segments == b.segments and a.duration == b.duration


def test_session_invariants():
    seg = SpeakerSegment("s", 1, 0.0, 1.0, "A")
    with pytest.raises(ValidationError):
        SessionAnnotation("s", [seg], [WordEntry("x", 0.0, 0.1, "B")], 2.0)
    with pytest.raises(ValidationError):
        SessionAnnotation("s", [seg], [], 0.5)


# ---------------------------------------------------------------- tensors


def test_tensor_layout_size():
    blob = write_tensor([2, 3], [1, 2, 3, 4, 5, 6])
    assert len(blob) == 7 + 16 + 24
    assert blob[:7] == b"MTMT\x01\x01\x02"
    assert struct.unpack("<2Q", blob[7:23]) == (2, 3)
    assert struct.unpack("<6f", blob[23:]) == (1, 2, 3, 4, 5, 6)


def test_tensor_round_trip_bitwise(rng):
    x = rng.standard_normal((4, 7)).astype(np.float32)
    x[0, 0] = -0.0
    dims, y = read_tensor(write_tensor(x.shape, x))
    assert dims == (4, 7)
    assert y.tobytes() == x.tobytes()


@given(st.lists(st.floats(width=32, allow_nan=False, allow_infinity=False), min_size=1, max_size=64))
def test_tensor_round_trip_all_finite_floats(vals):
    x = np.array(vals, dtype=np.float32)
    _, y = read_tensor(write_tensor([len(vals)], x))
    assert y.tobytes() == x.tobytes()


def test_tensor_error_variants():
    blob = write_tensor([2, 2], np.zeros(4))
    with pytest.raises(BadMagicError):
        read_tensor(b"XXXX" + blob[4:])
    with pytest.raises(UnsupportedVersionError):
        read_tensor(blob[:4] + b"\x02" + blob[5:])
    with pytest.raises(UnsupportedDtypeError):
        read_tensor(blob[:5] + b"\x07" + blob[6:])
    with pytest.raises(TruncatedTensorError):
        read_tensor(blob[:-1])
    with pytest.raises(TruncatedTensorError):
        read_tensor(blob[:10])
    with pytest.raises(TensorFormatError):
        read_tensor(blob + b"\x00")
    with pytest.raises(ValidationError):
        write_tensor([2, 2], np.zeros(5))
    with pytest.raises(ValidationError):
        write_tensor([], [])


def test_tensor_files_with_sidecar(tmp_path):
    x = np.arange(6, dtype=np.float32).reshape(2, 3)
    save_tensor(tmp_path / "x.mtmt", x, {"frame_rate": 12.5})
    y, meta = load_tensor(tmp_path / "x.mtmt")
    assert np.array_equal(x, y) and meta == {"frame_rate": 12.5}
