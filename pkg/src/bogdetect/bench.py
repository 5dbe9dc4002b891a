"""Timing harness for streaming and offline detection cost.

Per-frame streaming cost should not depend on how much history the stream
has accumulated, and offline detection should scale linearly in the number
of frames. Both are measured on synthetic streams; absolute throughput is
machine-dependent and only reported.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .descriptor import DescriptorParams
from .pipeline import DetectorBundle, TrainParams, detect_stream, train_detector
from .skeleton import SkeletonSequence, SkeletonTopology
from .stream import per_frame_seconds
from .synthetic import SyntheticSpec, generate_corpus, generate_synthetic

ONLINE_RATIO_BOUNDS = (0.8, 1.25)
OFFLINE_DOUBLING_LIMIT = 2.5


@dataclass(frozen=True)
class BenchResult:
    lengths: tuple[int, ...]
    online_seconds_per_frame: tuple[float, ...]
    online_ratio: float
    online_fps: float
    offline_seconds: tuple[float, ...]
    offline_doubling_ratio: float
    online_ok: bool
    offline_ok: bool

    @property
    def ok(self) -> bool:
        return self.online_ok and self.offline_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d

    def summary(self) -> str:
        per = ", ".join(
            f"N={n}: {s * 1e6:.1f} us/frame" for n, s in zip(self.lengths, self.online_seconds_per_frame)
        )
        return "\n".join(
            [
                f"online  {per}",
                f"online  cost ratio (longest/shortest) = {self.online_ratio:.3f} "
                f"(bounds {ONLINE_RATIO_BOUNDS[0]}..{ONLINE_RATIO_BOUNDS[1]}) "
                f"{'PASS' if self.online_ok else 'FAIL'}",
                f"online  throughput ~ {self.online_fps:.0f} frames/s",
                f"offline N vs 2N runtime ratio = {self.offline_doubling_ratio:.3f} "
                f"(limit {OFFLINE_DOUBLING_LIMIT}) {'PASS' if self.offline_ok else 'FAIL'}",
            ]
        )


def long_stream(n_frames: int, spec: SyntheticSpec) -> SkeletonSequence:
    """A synthetic stream of exactly ``n_frames`` frames."""
    mean_len = (sum(spec.instance_length) + sum(spec.pause_length)) / 2
    n_inst = int(n_frames / mean_len) + 2
    seq, _ = generate_synthetic(replace(spec, n_instances=n_inst, schedule=None))
    while len(seq) < n_frames:
        n_inst *= 2
        seq, _ = generate_synthetic(replace(spec, n_instances=n_inst, schedule=None))
    return seq.slice(0, n_frames - 1)


def bench_bundle(
    topo: SkeletonTopology, dparams: DescriptorParams, params: TrainParams, spec: SyntheticSpec
) -> DetectorBundle:
    corpus = generate_corpus(4, spec, seed=spec.seed + 7)
    return train_detector(corpus, topo, dparams, params)


def _best_time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return float(best)


def run_bench(
    bundle: DetectorBundle,
    lengths: Sequence[int] = (10_000, 40_000),
    spec: SyntheticSpec = SyntheticSpec(),
    repeats: int = 3,
    patience: int = 1,
) -> BenchResult:
    lengths = tuple(sorted(int(n) for n in lengths))
    if len(lengths) < 2:
        raise ValueError("need at least two stream lengths")
    streams = {n: long_stream(n, spec) for n in lengths}

    per_frame = tuple(
        per_frame_seconds(bundle, streams[n].positions, patience, repeats) for n in lengths
    )
    ratio = per_frame[-1] / per_frame[0]

    # offline: the shortest length against twice that length
    n0 = lengths[0]
    s1 = streams[n0]
    s2 = long_stream(2 * n0, spec)
    t1 = _best_time(lambda: detect_stream(bundle, s1, "offline"), repeats)
    t2 = _best_time(lambda: detect_stream(bundle, s2, "offline"), repeats)
    doubling = t2 / t1

    return BenchResult(
        lengths=lengths,
        online_seconds_per_frame=per_frame,
        online_ratio=float(ratio),
        online_fps=float(1.0 / np.mean(per_frame)),
        offline_seconds=(t1, t2),
        offline_doubling_ratio=float(doubling),
        online_ok=bool(ONLINE_RATIO_BOUNDS[0] <= ratio <= ONLINE_RATIO_BOUNDS[1]),
        offline_ok=bool(doubling <= OFFLINE_DOUBLING_LIMIT),
    )
