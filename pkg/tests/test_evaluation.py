import json

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from bogdetect.evaluation import (
    EvalConfig,
    average_precision,
    evaluate,
    evaluate_streams,
    fscore,
    match_detections,
    mean_ap,
    overlap_ratio,
    to_action_point_segments,
)
from bogdetect.skeleton import Annotation, DetectionEvent


def ev(c, s, e, score=1.0, trig=None):
    return DetectionEvent(c, s, e, score, e if trig is None else trig)


def test_overlap_examples():
    assert overlap_ratio((1, 10), (6, 15)) == pytest.approx(5 / 15)
    assert overlap_ratio((3, 8), (3, 8)) == 1.0
    assert overlap_ratio((0, 4), (5, 9)) == 0.0
    assert overlap_ratio((2, 2), (2, 2)) == 1.0


def test_overlap_symmetric_and_bounded(rng):
    for _ in range(200):
        a = tuple(sorted(rng.integers(0, 30, 2)))
        b = tuple(sorted(rng.integers(0, 30, 2)))
        r = overlap_ratio(a, b)
        assert 0 <= r <= 1 and r == overlap_ratio(b, a)


def test_fscore_examples():
    assert fscore(1, 0, 0) == (1.0, 1.0, 1.0)
    assert fscore(0, 3, 2) == (0.0, 0.0, 0.0)
    p, r, f = fscore(3, 1, 2)
    assert (p, r) == (0.75, 0.6) and f == pytest.approx(2 / 3)


def test_fscore_degrades_monotonically():
    for tp in range(4):
        for fp in range(4):
            for fn in range(4):
                p, r, f = fscore(tp, fp, fn)
                p2, _, f2 = fscore(tp, fp + 1, fn)
                _, r3, f3 = fscore(tp, fp, fn + 1)
                assert p2 <= p and f2 <= f and r3 <= r and f3 <= f


def test_perfect_detections():
    ann = [Annotation(0, 0, 9), Annotation(0, 20, 29)]
    res = match_detections([ev(0, 0, 9), ev(0, 20, 29)], ann)
    assert (res.tp, res.fp, res.fn) == (2, 0, 0)


def test_two_events_one_annotation():
    res = match_detections([ev(0, 0, 9), ev(0, 2, 8)], [Annotation(0, 0, 9)])
    assert (res.tp, res.fp, res.fn) == (1, 1, 0)


def test_class_mismatch_is_not_a_match():
    res = match_detections([ev(1, 0, 9)], [Annotation(0, 0, 9)])
    assert (res.tp, res.fp, res.fn) == (0, 1, 1)


def test_action_point_protocol():
    cfg = EvalConfig("action_point", latency_frames=10)
    ann = [Annotation(0, 0, 40, action_point=20)]
    assert match_detections([ev(0, 0, 5, trig=30)], ann, cfg).tp == 1
    assert match_detections([ev(0, 0, 5, trig=31)], ann, cfg).tp == 0
    assert match_detections([ev(0, 0, 5, trig=10)], ann, cfg).tp == 1
    # without an action point the end frame stands in
    assert match_detections([ev(0, 0, 5, trig=45)], [Annotation(0, 0, 40)], cfg).tp == 1


def test_overlap_threshold_boundary():
    ann = [Annotation(0, 1, 10)]
    e = ev(0, 6, 15)  # IoU 1/3
    assert match_detections([e], ann, EvalConfig(overlap_ratio=1 / 3)).tp == 1
    assert match_detections([e], ann, EvalConfig(overlap_ratio=0.34)).tp == 0


def optimal_tp(events, anns, cfg):
    M = np.zeros((len(events), len(anns)))
    for i, e in enumerate(events):
        for j, a in enumerate(anns):
            M[i, j] = match_detections([e], [a], cfg).tp
    if not M.size:
        return 0
    r, c = linear_sum_assignment(-M)
    return int(M[r, c].sum())


def test_greedy_equals_optimal_on_disjoint_annotations(rng):
    cfg = EvalConfig(overlap_ratio=0.2)
    for _ in range(300):
        n_ann = int(rng.integers(0, 5))
        anns, t = [], 0
        for _ in range(n_ann):
            s = t + int(rng.integers(2, 10))
            e = s + int(rng.integers(5, 20))
            anns.append(Annotation(0, s, e))
            t = e
        events = []
        for _ in range(int(rng.integers(0, 6))):
            s = int(rng.integers(0, t + 10))
            events.append(ev(0, s, s + int(rng.integers(3, 20))))
        events.sort(key=lambda x: x.trigger_frame)
        res = match_detections(events, anns, cfg)
        assert res.tp == optimal_tp(events, anns, cfg)
        assert res.tp <= min(len(events), len(anns))
        assert res.fp == len(events) - res.tp and res.fn == len(anns) - res.tp


def test_evaluate_per_class_and_mean():
    anns = [Annotation(0, 0, 9), Annotation(1, 20, 29), Annotation(1, 40, 49)]
    events = [ev(0, 0, 9), ev(1, 20, 29), ev(1, 60, 70)]
    rep = evaluate(events, anns)
    by = {c.class_id: c for c in rep.per_class}
    assert (by[0].tp, by[0].fp, by[0].fn) == (1, 0, 0)
    assert (by[1].tp, by[1].fp, by[1].fn) == (1, 1, 1)
    assert rep.mean_fscore == pytest.approx((1.0 + 0.5) / 2)
    assert rep.std_fscore == pytest.approx(0.25)
    assert rep.totals == (2, 1, 1)


def test_evaluate_streams_sums_counts():
    a = ([ev(0, 0, 9)], [Annotation(0, 0, 9)])
    b = ([ev(0, 50, 59)], [Annotation(0, 0, 9)])
    rep = evaluate_streams([a, b])
    (c,) = rep.per_class
    assert (c.tp, c.fp, c.fn) == (1, 1, 1)


def test_ap_all_correct():
    anns = [Annotation(0, 0, 9), Annotation(0, 20, 29)]
    assert average_precision([ev(0, 0, 9, 2.0), ev(0, 20, 29, 1.0)], anns) == 1.0


def test_ap_none_correct():
    assert average_precision([ev(0, 50, 60)], [Annotation(0, 0, 9)]) == 0.0
    assert average_precision([], [Annotation(0, 0, 9)]) == 0.0


def test_ap_staircase_by_hand():
    anns = [Annotation(0, 0, 9), Annotation(0, 20, 29), Annotation(0, 40, 49)]
    ranked = [ev(0, 0, 9, 0.9), ev(0, 100, 110, 0.8), ev(0, 20, 29, 0.7), ev(0, 200, 210, 0.6)]
    # hits at ranks 1 and 3: (1/1 + 2/3) / 3
    assert average_precision(ranked, anns) == pytest.approx((1 + 2 / 3) / 3)


def test_mean_ap_over_classes():
    anns = [Annotation(0, 0, 9), Annotation(1, 20, 29)]
    assert mean_ap([ev(0, 0, 9)], anns) == pytest.approx(0.5)


def test_action_point_segments():
    out = to_action_point_segments([Annotation(2, 5, 40, 17), Annotation(1, 0, 9)])
    assert (out[0].start_frame, out[0].end_frame) == (5, 17)
    assert out[1] == Annotation(1, 0, 9)


def test_eval_config_validation():
    with pytest.raises(ValueError):
        EvalConfig("bogus")
    with pytest.raises(ValueError):
        EvalConfig(overlap_ratio=0)


def test_report_outputs(tmp_path):
    rep = evaluate([ev(0, 0, 9)], [Annotation(0, 0, 9), Annotation(1, 10, 19)])
    rep.write_csv(tmp_path / "r.csv")
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0] == "class,precision,recall,fscore" and len(rows) == 3
    rep.write_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["mean_fscore"] == pytest.approx(0.5)
    assert "mean F" in rep.table()
