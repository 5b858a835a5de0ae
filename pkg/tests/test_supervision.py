import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtmt.errors import CapacityError, DimensionError, ValidationError
from mtmt.manifest_io import SessionAnnotation, SpeakerSegment
from mtmt.supervision import (
    ActivityMatrix,
    DiarizerNoiseConfig,
    MixConfig,
    ato_order,
    build_activity,
    mix_supervision,
    simulate_diarizer,
)


def seg(spk, onset, dur, sid="s"):
    return SpeakerSegment(sid, 1, onset, dur, spk)


def session(segs, duration):
    return SessionAnnotation("s", segs, [], duration)


def test_ato_basic_and_order_independent():
    a = ato_order([seg("A", 0.5, 1.0), seg("B", 2.0, 1.0)])
    b = ato_order([seg("B", 2.0, 1.0), seg("A", 0.5, 1.0)])
    assert a.mapping == b.mapping == {"A": 0, "B": 1}


def test_ato_tie_is_lexicographic():
    assert ato_order([seg("B", 1.0, 1.0), seg("A", 1.0, 1.0)]).mapping == {"A": 0, "B": 1}


def test_ato_capacity_and_empty():
    segs = [seg(c, i, 1.0) for i, c in enumerate("ABCDE")]
    with pytest.raises(CapacityError):
        ato_order(segs)
    assert len(ato_order(segs, max_speakers=5)) == 5
    with pytest.raises(ValidationError):
        ato_order([])


@settings(max_examples=100, deadline=None)
@given(st.permutations(list(range(6))))
def test_ato_invariant_to_permutation(perm):
    segs = [seg("CBAACB"[i], [3.0, 1.0, 2.0, 0.5, 0.5, 4.0][i], 0.3) for i in range(6)]
    base = ato_order(segs).mapping
    assert ato_order([segs[i] for i in perm]).mapping == base


def test_build_activity_frames():
    act = build_activity(session([seg("A", 0.0, 0.16)], 0.4), 12.5)
    assert act.values.shape == (4, 5)
    assert act.values[0].tolist() == [1, 1, 0, 0, 0]
    assert act.speaker_order == ("A", None, None, None)


def test_build_activity_empty_session():
    act = build_activity(session([], 1.0), 12.5)
    assert act.values.shape == (4, 13) and not act.values.any()


def test_build_activity_overlap_two_ones():
    act = build_activity(session([seg("A", 0.0, 0.32), seg("B", 0.24, 0.4)], 1.0), 12.5)
    assert act.values[:, 3].tolist() == [1, 1, 0, 0]
    assert act.is_binary()


def test_build_activity_min_overlap_rule():
    # covers 10% of frame 1 and all of frame 0
    s = session([seg("A", 0.0, 0.088)], 0.4)
    assert build_activity(s, 12.5).values[0, :2].tolist() == [1, 1]
    assert build_activity(s, 12.5, min_overlap=0.5).values[0, :2].tolist() == [1, 0]


def test_build_activity_monotone(rng):
    for _ in range(50):
        segs = [seg(str(rng.choice(list("ABC"))), float(rng.uniform(0, 5)), float(rng.uniform(0.05, 2))) for _ in range(5)]
        order = ato_order(segs + [seg("A", 0, 1), seg("B", 0, 1), seg("C", 0, 1)])
        before = build_activity(session(segs, 8.0), 12.5, order)
        extra = seg(str(rng.choice(list("ABC"))), float(rng.uniform(0, 5)), float(rng.uniform(0.05, 2)))
        after = build_activity(session(segs + [extra], 8.0), 12.5, order)
        assert np.all(after.values >= before.values)


def _truth(K=4, T=200, seed=0):
    v = (np.random.default_rng(seed).random((K, T)) < 0.4).astype(float)
    return ActivityMatrix(v, 12.5, tuple("ABCD"[:K]))


def test_diarizer_identity_config():
    t = _truth()
    out = simulate_diarizer(t, DiarizerNoiseConfig(seed=99))
    assert np.array_equal(out.values, t.values)


def test_diarizer_full_miss():
    out = simulate_diarizer(_truth(), DiarizerNoiseConfig(miss_prob=1.0))
    assert not out.values.any()


def test_diarizer_miss_rate_monte_carlo():
    t = ActivityMatrix(np.ones((1, 10_000)), 12.5, ("A",))
    out = simulate_diarizer(t, DiarizerNoiseConfig(miss_prob=0.2, seed=3))
    assert abs(out.values.mean() - 0.8) <= 0.02


def test_diarizer_false_alarm_rate():
    t = ActivityMatrix(np.zeros((2, 10_000)), 12.5, ("A", "B"))
    out = simulate_diarizer(t, DiarizerNoiseConfig(false_alarm_prob=0.1, seed=4))
    assert abs(out.values.mean() - 0.1) <= 0.01


def test_diarizer_confusion_swaps_columns():
    v = np.zeros((2, 5000))
    v[0] = 1
    t = ActivityMatrix(v, 12.5, ("A", "B"))
    out = simulate_diarizer(t, DiarizerNoiseConfig(confusion_prob=0.3, seed=5)).values
    assert np.all(out.sum(axis=0) == 1)  # swaps preserve column content
    assert abs(out[1].mean() - 0.3) <= 0.03


def test_diarizer_jitter_and_smoothing_bounded_and_reproducible():
    cfg = DiarizerNoiseConfig(0.1, 0.05, 0.05, 0.2, 5, seed=11)
    a = simulate_diarizer(_truth(), cfg).values
    b = simulate_diarizer(_truth(), cfg).values
    assert a.tobytes() == b.tobytes()
    assert a.min() >= 0 and a.max() <= 1
    assert not np.array_equal(a, simulate_diarizer(_truth(), DiarizerNoiseConfig(0.1, 0.05, 0.05, 0.2, 5, seed=12)).values)


def test_diarizer_rejects_soft_input_and_bad_config():
    soft = ActivityMatrix(np.full((1, 4), 0.5), 12.5, ("A",))
    with pytest.raises(ValidationError):
        simulate_diarizer(soft, DiarizerNoiseConfig())
    with pytest.raises(ValidationError):
        DiarizerNoiseConfig(smoothing_window=2)
    with pytest.raises(ValidationError):
        DiarizerNoiseConfig(miss_prob=1.5)


def _pair(T=20_000):
    ones = ActivityMatrix(np.ones((4, T)), 12.5, tuple("ABCD"))
    zeros = ActivityMatrix(np.zeros((4, T)), 12.5, tuple("ABCD"))
    return ones, zeros


def test_mix_degenerate_probabilities():
    t = _truth(T=500)
    d = simulate_diarizer(t, DiarizerNoiseConfig(0.2, 0.1, 0.1, 0.0, 3, seed=1))
    assert mix_supervision(t, d, MixConfig(1.0, 7)).values.tobytes() == t.values.tobytes()
    assert mix_supervision(t, d, MixConfig(0.0, 7)).values.tobytes() == d.values.tobytes()


def test_mix_half_statistics():
    ones, zeros = _pair()
    out = mix_supervision(ones, zeros, MixConfig(0.5, 21)).values
    assert abs(out.mean() - 0.5) <= 0.02
    # whole column comes from one source
    assert np.all((out.min(axis=0) == out.max(axis=0)))


def test_mix_shape_mismatch():
    ones, _ = _pair(10)
    other = ActivityMatrix(np.zeros((4, 11)), 12.5, tuple("ABCD"))
    with pytest.raises(DimensionError):
        mix_supervision(ones, other, MixConfig())
    with pytest.raises(DimensionError):
        mix_supervision(ones, ActivityMatrix(np.zeros((4, 10)), 25.0, tuple("ABCD")), MixConfig())


def test_activity_bounds_enforced():
    with pytest.raises(ValidationError):
        ActivityMatrix(np.full((1, 3), 1.5), 12.5, ("A",))
