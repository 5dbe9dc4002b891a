"""End-to-end training and inference over annotated skeleton streams."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional, Sequence

import numpy as np

from .classifier import (
    HARD_NEGATIVE,
    NATURAL_NEGATIVE,
    POSITIVE,
    ClassModel,
    TrainingItem,
    TrainingSet,
    classify_recognition,
    hard_negative_spans,
    learn_threshold,
    train_linear,
)
from .codebook import Codebook, assign_many, histogram_from_indices, train_codebook
from .descriptor import DescriptorParams, descriptor_matrix
from .detector import (
    SmoothingParams,
    detect_offline,
    detect_online,
    kadane_max_subarray,
    project_scores,
    smooth,
    weight_matrix,
)
from .evaluation import EvalConfig, EvalReport, evaluate_streams, mean_ap
from .skeleton import Annotation, DetectionEvent, SkeletonSequence, SkeletonTopology

log = logging.getLogger(__name__)

HardNegativeMode = Literal["instance_plus_pause", "two_instance_concat", "none"]


@dataclass(frozen=True)
class TrainParams:
    K: int = 2500
    m: int = 3
    seed: int = 0
    subsample: float = 1.0
    kmeans_iters: int = 100
    reg: float = 1e-4
    epochs: int = 200
    pos_weight: float = 1.0
    hard_negatives: HardNegativeMode = "instance_plus_pause"
    smoothing: SmoothingParams = field(default_factory=SmoothingParams)


@dataclass(frozen=True)
class DetectorBundle:
    """Everything a detector needs at test time."""

    topo: SkeletonTopology
    descriptor: DescriptorParams
    codebook: Codebook
    models: tuple[ClassModel, ...]
    m: int
    smoothing: SmoothingParams

    @property
    def class_ids(self) -> list[int]:
        return [mdl.class_id for mdl in self.models]


def gaps(annotations: Sequence[Annotation], n_frames: int) -> list[tuple[int, int]]:
    """Unannotated frame spans of a stream, as closed intervals."""
    out = []
    t = 0
    for a in sorted(annotations, key=lambda a: a.start_frame):
        if a.start_frame > t:
            out.append((t, a.start_frame - 1))
        t = max(t, a.end_frame + 1)
    if t < n_frames:
        out.append((t, n_frames - 1))
    return out


def learn_codebook(
    descriptors: Iterable[np.ndarray], params: TrainParams
) -> Codebook:
    X = np.concatenate(list(descriptors), axis=0)
    return train_codebook(
        X, params.K, params.seed, max_iters=params.kmeans_iters, subsample=params.subsample
    )


def _max_sub(x: np.ndarray) -> float:
    return kadane_max_subarray(x)[2]


def train_detector(
    corpus: Sequence[tuple[SkeletonSequence, Sequence[Annotation]]],
    topo: SkeletonTopology,
    dparams: DescriptorParams,
    params: TrainParams,
    codebook: Optional[Codebook] = None,
    descriptors: Optional[Sequence[np.ndarray]] = None,
) -> DetectorBundle:
    """Codebook, one-vs-all models and thresholds from annotated streams.

    Per class, positives are its annotated instances; natural negatives are
    instances of other classes and unannotated spans; hard negatives follow
    ``params.hard_negatives``. Thresholds are learned on max-subarray sums of
    the smoothed per-frame scores inside each positive instance versus each
    natural negative span.
    """
    if descriptors is None:
        descriptors = [descriptor_matrix(seq, topo, dparams) for seq, _ in corpus]
    if codebook is None:
        codebook = learn_codebook(descriptors, params)
        log.info("codebook: K=%d from %d frames", codebook.K, sum(len(d) for d in descriptors))
    assigns = [assign_many(D, codebook, params.m) for D in descriptors]

    spans: list[tuple[int, int, int, int]] = []  # (seq, class or -1, start, end)
    hard: list[tuple[int, int, int, int]] = []
    for i, (seq, anns) in enumerate(corpus):
        for a in anns:
            spans.append((i, a.class_id, a.start_frame, a.end_frame))
        for s, e in gaps(anns, len(seq)):
            spans.append((i, -1, s, e))
        if params.hard_negatives != "none":
            for cid, s, e in hard_negative_spans(anns, params.hard_negatives):
                hard.append((i, cid, s, e))

    hist = {sp: histogram_from_indices(assigns[sp[0]][sp[2] : sp[3] + 1], codebook.K) for sp in spans}
    hard_hist = {sp: histogram_from_indices(assigns[sp[0]][sp[2] : sp[3] + 1], codebook.K) for sp in hard}
    class_ids = sorted({cid for _, cid, _, _ in spans if cid >= 0})

    models = []
    for cid in class_ids:
        ts = TrainingSet()
        for sp, h in hist.items():
            pos = sp[1] == cid
            ts.add(TrainingItem(h, pos, POSITIVE if pos else NATURAL_NEGATIVE, sp[1], sp[2:]))
        for sp, h in hard_hist.items():
            if sp[1] == cid:
                ts.add(TrainingItem(h, False, HARD_NEGATIVE, cid, sp[2:]))
        w, b = train_linear(ts, params.reg, params.epochs, params.seed, params.pos_weight)
        models.append(ClassModel(cid, w, b, 0.0))

    W = weight_matrix(models)
    smoothed = [smooth(project_scores(A, W), params.smoothing) for A in assigns]
    tuned = []
    for k, mdl in enumerate(models):
        pos, neg = [], []
        for i, cid, s, e in spans:
            v = _max_sub(smoothed[i][k, s : e + 1])
            (pos if cid == mdl.class_id else neg).append(v)
        theta = learn_threshold(pos, neg)
        tuned.append(mdl.with_threshold(theta))
        log.info("class %d: bias=%.3f threshold=%.3f", mdl.class_id, mdl.bias, theta)
    return DetectorBundle(topo, dparams, codebook, tuple(tuned), params.m, params.smoothing)


def score_stream(
    bundle: DetectorBundle, seq: SkeletonSequence, descriptors: Optional[np.ndarray] = None
) -> np.ndarray:
    """Smoothed per-frame scores ``(C, n)`` for every class in ``bundle``."""
    D = descriptor_matrix(seq, bundle.topo, bundle.descriptor) if descriptors is None else descriptors
    A = assign_many(D, bundle.codebook, bundle.m)
    return smooth(project_scores(A, weight_matrix(bundle.models)), bundle.smoothing)


def detect_stream(
    bundle: DetectorBundle,
    seq: SkeletonSequence,
    mode: Literal["online", "offline"] = "online",
    patience: int = 1,
    descriptors: Optional[np.ndarray] = None,
) -> list[DetectionEvent]:
    S = score_stream(bundle, seq, descriptors)
    if mode == "online":
        return detect_online(S, [m.threshold for m in bundle.models], bundle.class_ids, patience)
    events: list[DetectionEvent] = []
    for k, mdl in enumerate(bundle.models):
        events.extend(detect_offline(S[k], mdl.threshold, mdl.class_id))
    events.sort(key=lambda e: (e.start_frame, e.class_id))
    return events


def evaluate_detector(
    bundle: DetectorBundle,
    corpus: Sequence[tuple[SkeletonSequence, Sequence[Annotation]]],
    cfg: EvalConfig = EvalConfig(),
    mode: Literal["online", "offline"] = "online",
    patience: int = 1,
) -> tuple[EvalReport, list[list[DetectionEvent]]]:
    detections = [detect_stream(bundle, seq, mode, patience) for seq, _ in corpus]
    pairs = [(ev, list(anns)) for ev, (_, anns) in zip(detections, corpus)]
    report = evaluate_streams(pairs, cfg, bundle.class_ids)
    if cfg.protocol == "overlap":
        report.mean_ap = pooled_mean_ap(pairs, cfg.overlap_ratio)
    return report, detections


def pooled_mean_ap(pairs, overlap: float) -> float:
    """Mean AP with every stream's events ranked together in one list."""
    # shift streams apart so intervals from different streams never overlap
    events, anns, offset = [], [], 0
    for ev, an in pairs:
        end = max([e.trigger_frame for e in ev] + [a.end_frame for a in an] + [0])
        events += [
            DetectionEvent(e.class_id, e.start_frame + offset, e.end_frame + offset, e.score, e.trigger_frame + offset)
            for e in ev
        ]
        anns += [
            Annotation(a.class_id, a.start_frame + offset, a.end_frame + offset,
                       None if a.action_point is None else a.action_point + offset)
            for a in an
        ]
        offset += end + 10
    return mean_ap(events, anns, overlap)


def train_recognizer(
    train: Sequence[tuple[SkeletonSequence, int]],
    topo: SkeletonTopology,
    dparams: DescriptorParams,
    params: TrainParams,
) -> DetectorBundle:
    """One-vs-all models on whole pre-segmented clips (no hard negatives)."""
    descs = [descriptor_matrix(seq, topo, dparams) for seq, _ in train]
    cb = learn_codebook(descs, params)
    H = [histogram_from_indices(assign_many(D, cb, params.m), cb.K) for D in descs]
    labels = [c for _, c in train]
    models = []
    for cid in sorted(set(labels)):
        ts = TrainingSet([TrainingItem(h, y == cid, POSITIVE if y == cid else NATURAL_NEGATIVE, y)
                          for h, y in zip(H, labels)])
        w, b = train_linear(ts, params.reg, params.epochs, params.seed, params.pos_weight)
        models.append(ClassModel(cid, w, b))
    return DetectorBundle(topo, dparams, cb, tuple(models), params.m, params.smoothing)


def recognition_accuracy(
    bundle: DetectorBundle, test: Sequence[tuple[SkeletonSequence, int]]
) -> float:
    hits = 0
    for seq, cid in test:
        D = descriptor_matrix(seq, bundle.topo, bundle.descriptor)
        h = histogram_from_indices(assign_many(D, bundle.codebook, bundle.m), bundle.codebook.K)
        hits += classify_recognition(h, bundle.models) == cid
    return hits / len(test)
