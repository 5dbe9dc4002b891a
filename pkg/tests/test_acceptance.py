"""Acceptance checks; each prints one ``criterion N: PASS|FAIL`` line.

Run with ``pytest tests/test_acceptance.py -v``; the status lines go straight
to the terminal, independent of output capture.
"""

import json
import os
import re
import time
from pathlib import Path

import numpy as np
import pytest

from bogdetect.bench import bench_bundle, run_bench
from bogdetect.classifier import ClassModel, score_histogram
from bogdetect.cli import main
from bogdetect.codebook import Codebook, bog_histogram
from bogdetect.config import PipelineConfig
from bogdetect.descriptor import DescriptorParams, descriptor_matrix
from bogdetect.detector import detect_offline, detect_online, frame_scores, kadane_max_subarray
from bogdetect.io import read_msr_action3d
from bogdetect.pipeline import TrainParams, recognition_accuracy, train_recognizer
from bogdetect.skeleton import SkeletonSequence, SkeletonTopology
from bogdetect.sweep import recognition_curve

from conftest import random_positions

TOPO = SkeletonTopology.kinect()


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

    return emit


def brute_force(x):
    # all intervals via prefix sums; earliest start, then shortest, among ties
    c = np.concatenate([[0], np.cumsum(x)])
    n = len(x)
    best = None
    for s in range(n):
        sums = c[s + 1 :] - c[s]
        e = int(np.argmax(sums))
        if best is None or sums[e] > best[2]:
            best = (s, s + e, int(sums[e]))
    return best


def test_criterion_1_kadane_oracle(report):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        x = rng.integers(-10, 11, size=int(rng.integers(1, 513)))
        s, e, v = kadane_max_subarray(x)
        if (s, e, int(v)) != brute_force(x):
            mismatches += 1
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 10
    report(1, ok, f"{mismatches} mismatches in 1000 arrays, {dt:.2f} s")
    assert mismatches == 0 and dt < 10


def test_criterion_2_decomposition_identity(report):
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(5, 60))
        K = int(rng.integers(2, 40))
        m = int(rng.integers(1, min(K, 5) + 1))
        pos = random_positions(rng, n)
        seq = SkeletonSequence.from_array(pos)
        D = descriptor_matrix(seq, TOPO)
        cb = Codebook(rng.normal(scale=0.3, size=(K, D.shape[1])) + D[rng.integers(0, n, K)])
        model = ClassModel(0, rng.normal(size=K), bias=float(rng.normal()))
        s = frame_scores(seq, cb, model, m, DescriptorParams(), TOPO)
        whole = score_histogram(bog_histogram(D, cb, m), model)
        rel = abs(s.scores.sum() + model.bias - whole) / max(1.0, abs(whole))
        worst = max(worst, rel)
    report(2, worst <= 1e-9, f"max relative gap {worst:.2e} over 100 triples")
    assert worst <= 1e-9


def test_criterion_3_descriptor_contract(report):
    rng = np.random.default_rng(303)
    J3 = 3 * TOPO.joint_count
    length_ok = descriptor_matrix(random_positions(rng, 5), TOPO).shape[1] == 250
    trans, scale = 0.0, 0.0
    for _ in range(100):
        pos = random_positions(rng, 5)
        D = descriptor_matrix(pos, TOPO)
        Dt = descriptor_matrix(pos + rng.normal(scale=10, size=3), TOPO)
        ref = pos[:, TOPO.reference_joint : TOPO.reference_joint + 1]
        Ds = descriptor_matrix(ref + rng.uniform(0.2, 5) * (pos - ref), TOPO)
        trans = max(trans, np.abs(Dt[2] - D[2]).max())
        scale = max(scale, np.abs(Ds[2, :J3] - D[2, :J3]).max())
    still = descriptor_matrix(np.repeat(random_positions(rng, 1), 7, axis=0), TOPO)
    zero = bool(np.all(still[:, J3 : 3 * J3] == 0) and np.all(still[:, 3 * J3 + TOPO.angle_count :] == 0))
    ok = length_ok and trans <= 1e-9 and scale <= 1e-9 and zero
    report(3, ok, f"dim 250={length_ok}, translation {trans:.1e}, scale {scale:.1e}, stationary zeros={zero}")
    assert ok


def single_run_array(rng):
    lead = -rng.integers(1, 6, size=int(rng.integers(1, 15)))
    run = rng.integers(1, 8, size=int(rng.integers(1, 30)))
    tail = -rng.integers(1, 6, size=int(rng.integers(1, 15)))
    return np.concatenate([lead, run, tail]).astype(float), len(lead), len(lead) + len(run) - 1


def test_criterion_4_online_offline_agreement(report):
    rng = np.random.default_rng(404)
    agree = 0
    for _ in range(200):
        x, s, e = single_run_array(rng)
        theta = float(rng.uniform(0.5, x[s : e + 1].sum()))
        on = detect_online(x[None], [theta], patience=1)
        off = detect_offline(x, theta)
        ok = (
            len(on) == 1
            and len(off) == 1
            and (on[0].start_frame, on[0].end_frame, on[0].score)
            == (off[0].start_frame, off[0].end_frame, off[0].score)
            == (s, e, x[s : e + 1].sum())
        )
        agree += ok
    report(4, agree == 200, f"agreement {agree}/200")
    assert agree == 200


def test_criterion_5_repetition_splitting(report):
    rng = np.random.default_rng(505)
    good = 0
    for _ in range(50):
        b1 = rng.integers(1, 6, size=int(rng.integers(3, 12))).astype(float)
        b2 = rng.integers(1, 6, size=int(rng.integers(3, 12))).astype(float)
        theta = 0.8 * min(b1.sum(), b2.sum())
        gap_total = float(rng.uniform(1, 0.9 * min(b1.sum(), b2.sum())))
        width = int(rng.integers(1, 4))
        gap = np.full(width, -gap_total / width)
        x = np.concatenate([[-5.0, -5.0], b1, gap, b2, [-5.0, -5.0]])
        on = detect_online(x[None], [theta], patience=1)
        off = detect_offline(x, theta)
        good += len(on) == 2 and len(off) == 1
    report(5, good == 50, f"online 2 / offline 1 in {good}/50 arrays")
    assert good == 50


def test_criterion_6_end_to_end(tmp_path, report):
    t0 = time.perf_counter()
    base = ["-o", f"paths.workdir={tmp_path}", "-o", "codebook.K=200", "-o", "codebook.m=3"]
    for cmd in ("synth", "extract", "train-codebook", "train", "detect-online"):
        assert main([cmd] + base) == 0, cmd
    scores = {}
    for ratio in (0.2, 0.5):
        assert main(["eval", "--mode", "online"] + base + ["-o", f"evaluation.overlap_ratio={ratio}"]) == 0
        scores[ratio] = json.loads((tmp_path / "report_online.json").read_text())["mean_fscore"]
    dt = time.perf_counter() - t0
    ok = scores[0.2] >= 0.90 and scores[0.5] >= 0.80 and dt < 300
    report(6, ok, f"F@0.2={scores[0.2]:.3f}  F@0.5={scores[0.5]:.3f}  {dt:.0f} s")
    assert ok


def test_criterion_7_streaming_cost(report):
    cfg = PipelineConfig()
    spec = cfg.synthetic_spec()
    params = TrainParams(K=cfg.bench.K, m=3, smoothing=cfg.smoothing_params())
    bundle = bench_bundle(TOPO, cfg.descriptor_params(), params, spec)
    res = run_bench(bundle, cfg.bench.lengths, spec, cfg.bench.repeats)
    report(
        7,
        res.ok,
        f"online ratio {res.online_ratio:.3f} in [0.8, 1.25], offline doubling "
        f"{res.offline_doubling_ratio:.3f} <= 2.5, ~{res.online_fps:.0f} frames/s",
    )
    assert res.ok


def test_criterion_8_soft_binning_spread(report):
    cfg = PipelineConfig()
    train, test = cfg.recognition_task().data()
    params = TrainParams(K=cfg.sweep.m_sweep_K, smoothing=cfg.smoothing_params())
    p1, p3 = recognition_curve(
        train, test, TOPO, cfg.descriptor_params(), params, "m", (1, 3), cfg.sweep.seeds
    )
    ok = p3.std <= p1.std
    report(
        8,
        ok,
        f"std m=3 {p3.std:.4f} <= std m=1 {p1.std:.4f} (means {p3.mean:.3f}, {p1.mean:.3f})",
    )
    assert ok


MSR_ENV = "BOGDETECT_MSR_ACTION3D"


def _msr_clips(root: Path):
    pat = re.compile(r"a(\d+)_s(\d+)_e(\d+)_skeleton3D\.txt$")
    train, test = [], []
    for p in sorted(root.glob("*_skeleton3D.txt")):
        mt = pat.search(p.name)
        if not mt:
            continue
        action, subject = int(mt.group(1)), int(mt.group(2))
        seq = read_msr_action3d(p, TOPO)
        # cross-subject split: odd subjects train, even subjects test
        (train if subject % 2 else test).append((seq, action))
    return train, test


@pytest.mark.skipif(not os.environ.get(MSR_ENV), reason=f"set {MSR_ENV} to the skeleton folder")
def test_criterion_9_msr_action3d(report):
    train, test = _msr_clips(Path(os.environ[MSR_ENV]))
    accs = []
    for seed in range(5):
        params = TrainParams(K=2500, m=3, seed=seed)
        bundle = train_recognizer(train, TOPO, DescriptorParams.msr_action3d(), params)
        accs.append(recognition_accuracy(bundle, test))
    mean = float(np.mean(accs))
    # shortfalls are reported, not failed: the exact triplet list and solver
    # settings behind the reference accuracy are not known
    report(9, mean >= 0.90, f"recognition {mean:.4f} +- {np.std(accs):.4f} (detection AP not run)")
