import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bogdetect.classifier import ClassModel, score_histogram
from bogdetect.codebook import Codebook, assign_many, bog_histogram
from bogdetect.descriptor import DescriptorParams, descriptor_matrix
from bogdetect.detector import (
    OnlineDetector,
    ScoreArray,
    SmoothingBuffer,
    SmoothingParams,
    _masked_segments,
    detect_offline,
    detect_online,
    frame_scores,
    kadane_max_subarray,
    project_scores,
    smooth,
)
from bogdetect.skeleton import SkeletonSequence

from conftest import random_positions


def brute_max(x):
    # earliest start, then shortest interval
    best = None
    for s in range(len(x)):
        for e in range(s, len(x)):
            v = sum(x[s : e + 1])
            if best is None or v > best[2]:
                best = (s, e, v)
    return best


def masking_oracle(x, theta):
    x = [float(v) for v in x]
    out = []
    while True:
        finite = [i for i, v in enumerate(x) if np.isfinite(v)]
        if not finite:
            break
        best = None
        for s in finite:
            tot = 0.0
            for e in range(s, len(x)):
                if not np.isfinite(x[e]):
                    break
                tot += x[e]
                if best is None or tot > best[2]:
                    best = (s, e, tot)
        if best[2] < theta:
            break
        out.append(best)
        for i in range(best[0], best[1] + 1):
            x[i] = -np.inf
    return sorted(out)


# maximum subarray

def test_kadane_all_negative():
    assert kadane_max_subarray([-1, -2, -3]) == (0, 0, -1)


def test_kadane_worked_example():
    assert kadane_max_subarray([1, -2, 3, 4, -1]) == (2, 3, 7)


def test_kadane_ties():
    assert kadane_max_subarray([2, -2, 2]) == (0, 0, 2)
    assert kadane_max_subarray([0, 0, 1]) == (0, 2, 1)
    assert kadane_max_subarray([-1, 0, 1]) == (1, 2, 1)
    assert kadane_max_subarray([1, 0, 0]) == (0, 0, 1)


def test_kadane_empty():
    with pytest.raises(ValueError):
        kadane_max_subarray([])


def test_kadane_accepts_score_array():
    assert kadane_max_subarray(ScoreArray([-1.0, 3.0, -1.0])) == (1, 1, 3.0)


@given(st.lists(st.integers(-10, 10), min_size=1, max_size=40))
def test_kadane_matches_brute_force(x):
    assert kadane_max_subarray(x) == brute_max(x)


def test_kadane_real_values(rng):
    for _ in range(100):
        x = rng.normal(size=rng.integers(1, 30))
        s, e, v = kadane_max_subarray(x)
        assert v == pytest.approx(brute_max(list(x))[2], abs=1e-9)
        assert v == pytest.approx(x[s : e + 1].sum(), abs=1e-9)


# smoothing

def test_smooth_window3_example():
    assert smooth(np.array([0.0, 4.0, 0.0]), SmoothingParams(3))[1] == 2.0


def test_smooth_window1_identity(rng):
    x = rng.normal(size=10)
    np.testing.assert_array_equal(smooth(x, SmoothingParams(1)), x)


def test_smooth_constant_unchanged():
    np.testing.assert_allclose(smooth(np.full(9, 3.5), SmoothingParams(7)), 3.5)


def test_smooth_window5_weights():
    x = np.zeros(9)
    x[4] = 8.0
    out = smooth(x, SmoothingParams(5))
    np.testing.assert_allclose(out[2:7], [1, 1, 4, 1, 1])


def test_smooth_uniform_variant():
    x = np.array([0.0, 3.0, 0.0, 0.0])
    np.testing.assert_allclose(smooth(x, SmoothingParams(3, anchor_weighted=False))[:2], [1.0, 1.0])


def test_smooth_rejects_even_window():
    with pytest.raises(ValueError):
        SmoothingParams(4)


@given(
    n=st.integers(1, 30),
    w=st.sampled_from([1, 3, 5, 7]),
    anchor=st.booleans(),
    seed=st.integers(0, 2**16),
)
def test_smoothing_buffer_matches_batch(n, w, anchor, seed):
    p = SmoothingParams(w, anchor)
    x = np.random.default_rng(seed).normal(size=(2, n))
    buf = SmoothingBuffer(p)
    got = [r for r in (buf.push(x[:, t]) for t in range(n)) if r is not None]
    got.extend(buf.flush())
    assert [t for t, _ in got] == list(range(n))
    np.testing.assert_allclose(np.stack([v for _, v in got], axis=1), smooth(x, p), atol=1e-12)


# per-frame scores

def _setup(rng, n_frames=15, K=12):
    seq = SkeletonSequence.from_array(random_positions(rng, n_frames))
    D = descriptor_matrix(seq, _topo())
    cb = Codebook(D[rng.choice(n_frames, K, replace=True)] + 1e-3 * rng.normal(size=(K, D.shape[1])))
    return seq, D, cb


def _topo():
    from bogdetect.skeleton import SkeletonTopology

    return SkeletonTopology.kinect()


def test_zero_weights_give_zero_scores(rng):
    seq, _, cb = _setup(rng)
    s = frame_scores(seq, cb, ClassModel(0, np.zeros(cb.K)), 3)
    assert np.all(s.scores == 0)


def test_hard_binning_scores(rng):
    seq, D, cb = _setup(rng)
    w = rng.normal(size=cb.K)
    s = frame_scores(seq, cb, ClassModel(0, w), 1)
    np.testing.assert_array_equal(s.scores, w[assign_many(D, cb, 1)[:, 0]])


def test_decomposition_identity(rng):
    seq, D, cb = _setup(rng)
    for m in (1, 3, 5):
        model = ClassModel(0, rng.normal(size=cb.K), bias=rng.normal())
        s = frame_scores(seq, cb, model, m)
        whole = score_histogram(bog_histogram(D, cb, m), model)
        assert abs(s.scores.sum() + model.bias - whole) <= 1e-9 * max(1.0, abs(whole))


def test_frame_scores_K_mismatch(rng):
    seq, _, cb = _setup(rng)
    with pytest.raises(ValueError):
        frame_scores(seq, cb, ClassModel(0, np.zeros(cb.K + 1)), 1)


def test_project_scores_multi_class(rng):
    idx = rng.integers(0, 6, size=(10, 2))
    W = rng.normal(size=(3, 6))
    S = project_scores(idx, W)
    for c in range(3):
        np.testing.assert_allclose(S[c], W[c, idx[:, 0]] + 0.5 * W[c, idx[:, 1]])
    with pytest.raises(ValueError):
        project_scores(np.array([[6]]), W)


# offline detection

def test_offline_all_negative():
    assert detect_offline(-np.ones(10), 1.0) == []


def test_offline_two_bumps():
    x = np.array([-1, 2, 3, 2, -20, -20, 1, 4, 1, -1], dtype=float)
    ev = detect_offline(x, 5.0, class_id=3)
    assert [(e.start_frame, e.end_frame, e.score) for e in ev] == [(1, 3, 7.0), (6, 8, 6.0)]
    assert all(e.class_id == 3 and e.trigger_frame == e.end_frame for e in ev)


def test_offline_threshold_inclusive():
    (ev,) = detect_offline(np.array([-1.0, 2.0, 3.0, -1.0]), 5.0)
    assert (ev.start_frame, ev.end_frame, ev.score) == (1, 2, 5.0)
    assert detect_offline(np.array([-1.0, 2.0, 3.0, -1.0]), 5.0 + 1e-9) == []


def test_offline_class_from_score_array():
    ev = detect_offline(ScoreArray([1.0, 1.0], class_id=7), 1.5)
    assert ev[0].class_id == 7


@given(
    st.lists(st.integers(-6, 6), min_size=1, max_size=30),
    st.integers(1, 8),
)
def test_offline_matches_masking_oracle(x, theta):
    got = [(e.start_frame, e.end_frame, e.score) for e in detect_offline(np.array(x, float), theta)]
    assert got == masking_oracle(x, theta)


@given(st.lists(st.integers(-6, 6), min_size=1, max_size=30), st.integers(-4, 0))
def test_offline_nonpositive_threshold_matches_oracle(x, theta):
    got = [(e.start_frame, e.end_frame, e.score) for e in detect_offline(np.array(x, float), theta)]
    assert got == masking_oracle(x, theta)


def test_offline_events_disjoint_and_above_threshold(rng):
    for _ in range(50):
        x = rng.normal(size=200)
        ev = detect_offline(x, 1.0)
        for a, b in itertools.pairwise(ev):
            assert a.end_frame < b.start_frame
        assert all(e.score >= 1.0 for e in ev)


def test_linear_and_heap_paths_agree(rng):
    # quarter-multiples are exact in binary, so equal-sum ties are real ties
    # and both paths must break them the same way
    for _ in range(300):
        x = np.round(4 * rng.normal(size=rng.integers(1, 80))) / 4
        theta = float(rng.uniform(0.1, 3))
        fast = [(e.start_frame, e.end_frame) for e in detect_offline(x, theta)]
        assert fast == sorted(_masked_segments(x, theta))


def test_linear_and_heap_paths_agree_on_reals(rng):
    for _ in range(100):
        x = rng.normal(size=rng.integers(1, 200))
        fast = detect_offline(x, 0.5)
        slow = sorted(_masked_segments(x, 0.5))
        assert [(e.start_frame, e.end_frame) for e in fast] == slow
        np.testing.assert_allclose([e.score for e in fast], [x[a : b + 1].sum() for a, b in slow], atol=1e-9)


# online detection

def test_online_worked_example():
    (ev,) = detect_online([[-1, -2, 2, -1, 3, 4, 1, 2, -3]], [7.0])
    assert (ev.start_frame, ev.end_frame, ev.trigger_frame, ev.score) == (2, 7, 8, 11.0)


def test_online_hand_run():
    (ev,) = detect_online([[-1, 5, 5, -2]], [7.0])
    assert (ev.start_frame, ev.end_frame, ev.trigger_frame, ev.score) == (1, 2, 3, 10.0)


def test_online_all_positive_never_fires():
    assert detect_online([np.ones(100)], [3.0]) == []


def test_online_below_threshold_never_fires():
    assert detect_online([[1, 1, -1, 1, 1, -1]], [3.5]) == []


def test_online_peak_is_first_frame_of_maximum():
    (ev,) = detect_online([[4, 4, 0, -1]], [7.0])
    assert ev.end_frame == 1 and ev.trigger_frame == 3


def test_online_patience():
    x = [[3, 3, -1, 2, 2, -1, -1, 0]]
    (ev,) = detect_online(x, [5.0], patience=2)
    assert (ev.start_frame, ev.end_frame, ev.score, ev.trigger_frame) == (0, 4, 9.0, 6)
    (first,) = detect_online(x, [5.0], patience=1)[:1]
    assert first.trigger_frame == 2


def test_online_reset_all_classes():
    S = np.array([[3, 3, -1, 0, 0], [0, 2, 2, 2, -1]], dtype=float)
    ev = detect_online(S, [5.0, 5.0])
    # class 0 fires at frame 2 and resets class 1, whose later sum 2 stays below 5
    assert [(e.class_id, e.trigger_frame) for e in ev] == [(0, 2)]


def test_online_simultaneous_fire_tie_break():
    S = np.array([[4, 4, -1], [5, 4, -1], [4, 5, -1]], dtype=float)
    (ev,) = detect_online(S, [7.0, 7.0, 7.0], class_ids=[10, 11, 12])
    assert ev.class_id == 11 and ev.score == 9.0
    (ev,) = detect_online(S[[0, 0]], [7.0, 7.0], class_ids=[4, 2])
    assert ev.class_id == 2


def test_online_class_ids_reordered():
    S = np.array([[-1, -1, -1], [4, 4, -1]], dtype=float)
    (ev,) = detect_online(S, [1.0, 7.0], class_ids=[9, 3])
    assert ev.class_id == 3


def test_online_out_of_order():
    det = OnlineDetector([1.0])
    det.push([0.5], frame=0)
    with pytest.raises(ValueError):
        det.push([0.5], frame=2)


def test_online_armed_implies_peak_above_threshold(rng):
    det = OnlineDetector([2.0, 3.0])
    for _ in range(500):
        det.push(rng.normal(size=2))
        assert np.all(det.peak[det.armed] >= det.thresholds[det.armed])


def test_online_running_sum_is_kadane_prefix(rng):
    x = rng.normal(size=60)
    det = OnlineDetector([np.inf])
    run = None
    for v in x:
        det.push([v])
        run = v if run is None or run < 0 else run + v
        assert det.running[0] == pytest.approx(run)
