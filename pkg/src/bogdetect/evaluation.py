"""Detection scoring under the action-point and interval-overlap protocols."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence

import numpy as np

from .skeleton import Annotation, DetectionEvent

Interval = tuple[int, int]


@dataclass(frozen=True)
class EvalConfig:
    protocol: Literal["action_point", "overlap"] = "overlap"
    latency_frames: int = 10  # 333 ms at 30 fps
    overlap_ratio: float = 0.2

    def __post_init__(self) -> None:
        if self.protocol not in ("action_point", "overlap"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.latency_frames < 0:
            raise ValueError("latency_frames must be non-negative")
        if not 0 < self.overlap_ratio <= 1:
            raise ValueError("overlap_ratio must be in (0, 1]")


@dataclass(frozen=True)
class ClassScore:
    class_id: int
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    fscore: float


@dataclass
class EvalReport:
    per_class: list[ClassScore] = field(default_factory=list)
    mean_fscore: float = 0.0
    std_fscore: float = 0.0
    mean_ap: Optional[float] = None
    config: Optional[EvalConfig] = None

    @property
    def totals(self) -> tuple[int, int, int]:
        return (
            sum(c.tp for c in self.per_class),
            sum(c.fp for c in self.per_class),
            sum(c.fn for c in self.per_class),
        )

    def table(self) -> str:
        lines = [f"{'class':>6} {'TP':>5} {'FP':>5} {'FN':>5} {'P':>7} {'R':>7} {'F':>7}"]
        for c in self.per_class:
            lines.append(
                f"{c.class_id:>6} {c.tp:>5} {c.fp:>5} {c.fn:>5} "
                f"{c.precision:>7.3f} {c.recall:>7.3f} {c.fscore:>7.3f}"
            )
        lines.append(f"mean F = {self.mean_fscore:.3f} +- {self.std_fscore:.3f}")
        if self.mean_ap is not None:
            lines.append(f"mean AP = {self.mean_ap:.3f}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config) if self.config else None,
            "per_class": [asdict(c) for c in self.per_class],
            "mean_fscore": self.mean_fscore,
            "std_fscore": self.std_fscore,
            "mean_ap": self.mean_ap,
        }

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["class", "precision", "recall", "fscore"])
            for c in self.per_class:
                w.writerow([c.class_id, c.precision, c.recall, c.fscore])

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def overlap_ratio(a: Interval, b: Interval) -> float:
    """Intersection over union of two closed frame intervals."""
    inter = min(a[1], b[1]) - max(a[0], b[0]) + 1
    if inter <= 0:
        return 0.0
    union = (a[1] - a[0] + 1) + (b[1] - b[0] + 1) - inter
    return inter / union


def fscore(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def _quality(ev: DetectionEvent, ann: Annotation, cfg: EvalConfig) -> Optional[float]:
    """Match quality (higher is better), or None when the pair does not match."""
    if ev.class_id != ann.class_id:
        return None
    if cfg.protocol == "action_point":
        ap = ann.action_point if ann.action_point is not None else ann.end_frame
        dist = abs(ev.trigger_frame - ap)
        return -float(dist) if dist <= cfg.latency_frames else None
    ov = overlap_ratio((ev.start_frame, ev.end_frame), (ann.start_frame, ann.end_frame))
    return ov if ov >= cfg.overlap_ratio else None


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[int, int], ...]  # (event index, annotation index)


def match_detections(
    events: Sequence[DetectionEvent],
    annotations: Sequence[Annotation],
    cfg: EvalConfig = EvalConfig(),
) -> MatchResult:
    """Greedy one-to-one matching in event order.

    Each event claims the best still-unmatched annotation it satisfies
    (largest overlap, or closest action point; lower index on ties).
    """
    free = [True] * len(annotations)
    pairs = []
    for i, ev in enumerate(events):
        best_j, best_q = -1, None
        for j, ann in enumerate(annotations):
            if not free[j]:
                continue
            q = _quality(ev, ann, cfg)
            if q is not None and (best_q is None or q > best_q):
                best_j, best_q = j, q
        if best_j >= 0:
            free[best_j] = False
            pairs.append((i, best_j))
    tp = len(pairs)
    return MatchResult(tp, len(events) - tp, len(annotations) - tp, tuple(pairs))


def evaluate(
    events: Sequence[DetectionEvent],
    annotations: Sequence[Annotation],
    cfg: EvalConfig = EvalConfig(),
    class_ids: Optional[Iterable[int]] = None,
) -> EvalReport:
    """Per-class precision/recall/F plus their mean and standard deviation.

    Events of all classes are pooled and ordered by trigger frame before
    matching. Classes default to those present in either input.
    """
    ids = sorted(
        set(class_ids)
        if class_ids is not None
        else {a.class_id for a in annotations} | {e.class_id for e in events}
    )
    per = []
    for cid in ids:
        ev = sorted(
            (e for e in events if e.class_id == cid), key=lambda e: (e.trigger_frame, e.start_frame)
        )
        an = [a for a in annotations if a.class_id == cid]
        res = match_detections(ev, an, cfg)
        p, r, f = fscore(res.tp, res.fp, res.fn)
        per.append(ClassScore(cid, res.tp, res.fp, res.fn, p, r, f))
    fs = np.array([c.fscore for c in per]) if per else np.zeros(0)
    return EvalReport(
        per,
        float(fs.mean()) if fs.size else 0.0,
        float(fs.std()) if fs.size else 0.0,
        None,
        cfg,
    )


def evaluate_streams(
    pairs: Sequence[tuple[Sequence[DetectionEvent], Sequence[Annotation]]],
    cfg: EvalConfig = EvalConfig(),
    class_ids: Optional[Iterable[int]] = None,
) -> EvalReport:
    """Like :func:`evaluate`, with TP/FP/FN summed over independent streams."""
    if class_ids is None:
        class_ids = {a.class_id for _, an in pairs for a in an} | {
            e.class_id for ev, _ in pairs for e in ev
        }
    ids = sorted(set(class_ids))
    counts = {cid: [0, 0, 0] for cid in ids}
    for ev, an in pairs:
        rep = evaluate(ev, an, cfg, ids)
        for c in rep.per_class:
            counts[c.class_id][0] += c.tp
            counts[c.class_id][1] += c.fp
            counts[c.class_id][2] += c.fn
    per = [ClassScore(cid, tp, fp, fn, *fscore(tp, fp, fn)) for cid, (tp, fp, fn) in counts.items()]
    fs = np.array([c.fscore for c in per]) if per else np.zeros(0)
    return EvalReport(
        per, float(fs.mean()) if fs.size else 0.0, float(fs.std()) if fs.size else 0.0, None, cfg
    )


def average_precision(
    events: Sequence[DetectionEvent], annotations: Sequence[Annotation], overlap: float = 0.2
) -> float:
    """Area under the precision/recall staircase for one class.

    Events are ranked by score (ties by trigger frame); each one that claims
    an unmatched annotation at ``>= overlap`` adds ``precision@k / n_gt``.
    """
    if not annotations:
        return 0.0
    ranked = sorted(events, key=lambda e: (-e.score, e.trigger_frame, e.start_frame))
    cfg = EvalConfig("overlap", overlap_ratio=overlap)
    free = [True] * len(annotations)
    tp = 0
    ap = 0.0
    for k, ev in enumerate(ranked, start=1):
        best_j, best_q = -1, None
        for j, ann in enumerate(annotations):
            if free[j]:
                q = _quality(ev, ann, cfg)
                if q is not None and (best_q is None or q > best_q):
                    best_j, best_q = j, q
        if best_j >= 0:
            free[best_j] = False
            tp += 1
            ap += tp / k
    return ap / len(annotations)


def mean_ap(
    events: Sequence[DetectionEvent], annotations: Sequence[Annotation], overlap: float = 0.2
) -> float:
    """Mean of per-class AP over the classes that have ground truth."""
    ids = sorted({a.class_id for a in annotations})
    if not ids:
        return 0.0
    return float(
        np.mean(
            [
                average_precision(
                    [e for e in events if e.class_id == c],
                    [a for a in annotations if a.class_id == c],
                    overlap,
                )
                for c in ids
            ]
        )
    )


def to_action_point_segments(annotations: Iterable[Annotation]) -> list[Annotation]:
    """Truncate each annotated instance at its action point.

    Used when start/end annotations are combined with action-point ground
    truth: the gesture is taken to run from its start frame to its action point.
    """
    out = []
    for a in annotations:
        end = a.action_point if a.action_point is not None else a.end_frame
        out.append(Annotation(a.class_id, a.start_frame, end, a.action_point))
    return out
