"""One-vs-all linear models over bag-of-gesturelets histograms."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .codebook import histogram_from_indices
from .skeleton import Annotation

POSITIVE = "positive"
NATURAL_NEGATIVE = "natural_negative"
HARD_NEGATIVE = "hard_negative"


@dataclass(frozen=True, eq=False)
class ClassModel:
    class_id: int
    weights: np.ndarray
    bias: float = 0.0
    threshold: float = 0.0

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64).ravel()
        if not np.all(np.isfinite(w)):
            raise ValueError("model weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    def with_threshold(self, threshold: float) -> "ClassModel":
        return replace(self, threshold=threshold)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClassModel):
            return NotImplemented
        return (
            self.class_id == other.class_id
            and self.bias == other.bias
            and self.threshold == other.threshold
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True)
class TrainingItem:
    histogram: np.ndarray
    positive: bool
    provenance: str = NATURAL_NEGATIVE
    class_id: int = -1
    span: tuple[int, int] | None = None


@dataclass
class TrainingSet:
    items: list[TrainingItem] = field(default_factory=list)

    def add(self, item: TrainingItem) -> None:
        self.items.append(item)

    def extend(self, items: Iterable[TrainingItem]) -> None:
        self.items.extend(items)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked histograms and labels in {-1, +1}."""
        if not self.items:
            raise ValueError("training set is empty")
        X = np.stack([np.asarray(it.histogram, dtype=np.float64) for it in self.items])
        y = np.array([1.0 if it.positive else -1.0 for it in self.items])
        return X, y

    def validate(self) -> None:
        n_pos = sum(it.positive for it in self.items)
        if n_pos == 0 or n_pos == len(self.items):
            raise ValueError(
                f"training set needs both classes, got {n_pos} positive / "
                f"{len(self.items) - n_pos} negative"
            )


def hinge_objective(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, reg: float, cost: np.ndarray | None = None
) -> float:
    margins = np.maximum(0.0, 1.0 - y * (X @ w + b))
    if cost is not None:
        margins = margins * cost
    return float(margins.mean() + reg * (w @ w))


def train_linear(
    ts: TrainingSet,
    reg: float = 1e-4,
    epochs: int = 200,
    seed: int = 0,
    pos_weight: float = 1.0,
    tol: float = 1e-10,
) -> tuple[np.ndarray, float]:
    """Linear SVM: minimise ``mean(c_i * hinge_i) + reg * ||w||^2``.

    Solved by dual coordinate descent over the training items, visiting them
    in a fresh seeded permutation each epoch, until the largest projected
    gradient falls below ``tol`` or ``epochs`` passes are done. Features are
    rescaled by their largest norm and the bias is learned as the weight of a
    constant unit feature, so it shares the (very small) regularisation of
    the rescaled weights. Positives have cost ``pos_weight``, negatives 1.
    """
    ts.validate()
    X, y = ts.arrays()
    n = X.shape[0]
    scale = max(1.0, float(np.sqrt((X * X).sum(axis=1)).max()))
    U = np.hstack([X / scale, np.ones((n, 1))])
    # with v = w * scale: reg * ||w||^2 == lam * ||v||^2
    lam = reg / (scale * scale)
    upper = np.where(y > 0, pos_weight, 1.0) / (2.0 * lam * n)
    q = np.einsum("ij,ij->i", U, U)

    rng = np.random.default_rng(seed)
    alpha = np.zeros(n)
    v = np.zeros(U.shape[1])
    rows = [U[i] for i in range(n)]
    for _ in range(epochs):
        worst = 0.0
        for i in rng.permutation(n):
            g = y[i] * float(rows[i] @ v) - 1.0
            a = alpha[i]
            if a == 0.0:
                pg = min(g, 0.0)
            elif a >= upper[i]:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg == 0.0:
                continue
            worst = max(worst, abs(pg))
            a_new = min(max(a - g / q[i], 0.0), upper[i])
            if a_new != a:
                v += (a_new - a) * y[i] * rows[i]
                alpha[i] = a_new
        if worst < tol:
            break
    return v[:-1] / scale, float(v[-1])


def score_histogram(h: np.ndarray, model: ClassModel) -> float:
    h = np.asarray(h, dtype=np.float64)
    if h.shape != model.weights.shape:
        raise ValueError(f"histogram length {h.shape} != model K {model.K}")
    return float(model.weights @ h + model.bias)


def classify_recognition(h: np.ndarray, models: Sequence[ClassModel]) -> int:
    """Class with the highest linear score; equal scores go to the lower class id."""
    if not models:
        raise ValueError("need at least one model")
    ranked = sorted(models, key=lambda m: m.class_id)
    scores = [score_histogram(h, m) for m in ranked]
    return ranked[int(np.argmax(scores))].class_id


def hard_negative_spans(
    annotations: Sequence[Annotation],
    mode: Literal["instance_plus_pause", "two_instance_concat"],
) -> list[tuple[int, int, int]]:
    """``(class_id, start, end)`` spans of the hard negatives in one sequence."""
    ann = sorted(annotations, key=lambda a: a.start_frame)
    out = []
    for cur, nxt in zip(ann, ann[1:]):
        if mode == "instance_plus_pause":
            if nxt.start_frame - cur.end_frame > 1:
                out.append((cur.class_id, cur.start_frame, nxt.start_frame - 1))
        elif mode == "two_instance_concat":
            if cur.class_id == nxt.class_id:
                out.append((cur.class_id, cur.start_frame, nxt.end_frame))
        else:
            raise ValueError(f"unknown hard negative mode {mode!r}")
    return out


def make_hard_negatives(
    sequences: Iterable[tuple[np.ndarray, Sequence[Annotation]]],
    mode: Literal["instance_plus_pause", "two_instance_concat"],
    K: int,
) -> list[TrainingItem]:
    """Hard negatives from annotated sequences.

    Each sequence is given as its ``(n_frames, m)`` nearest-cluster array
    (see :func:`bogdetect.codebook.assign_many`) and its annotations. The
    returned items carry the class they are hard for in ``class_id``.
    """
    out: list[TrainingItem] = []
    for assignments, annotations in sequences:
        for cid, s, e in hard_negative_spans(annotations, mode):
            h = histogram_from_indices(assignments[s : e + 1], K)
            out.append(TrainingItem(h, False, HARD_NEGATIVE, cid, (s, e)))
    if not out:
        warnings.warn(f"no hard negatives could be built in mode {mode!r}", stacklevel=2)
    return out


def threshold_errors(theta: float, pos: np.ndarray, neg: np.ndarray) -> int:
    return int(np.sum(pos < theta) + np.sum(neg >= theta))


def threshold_candidates(scores_pos: Sequence[float], scores_neg: Sequence[float]) -> np.ndarray:
    merged = np.sort(np.concatenate([np.asarray(scores_pos, float), np.asarray(scores_neg, float)]))
    mids = (merged[:-1] + merged[1:]) / 2.0
    # the two sentinels cover "accept everything" and "reject everything"
    return np.concatenate([[merged[0] - 1.0], mids, [merged[-1] + 1.0]])


def learn_threshold(scores_pos: Sequence[float], scores_neg: Sequence[float]) -> float:
    """Threshold minimising ``#(pos < t) + #(neg >= t)``; the largest such candidate wins."""
    pos = np.asarray(scores_pos, dtype=np.float64)
    neg = np.asarray(scores_neg, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need at least one positive and one negative score")
    cand = threshold_candidates(pos, neg)
    errs = np.array([threshold_errors(t, pos, neg) for t in cand])
    best = cand[errs == errs.min()]
    return float(best.max())


def save_model(model: ClassModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(
            f"# bogdetect model class_id={model.class_id} K={model.K} "
            f"threshold={model.threshold!r} bias={model.bias!r}\n"
        )
        for v in model.weights:
            fh.write(repr(float(v)) + "\n")


def load_model(path: str | Path) -> ClassModel:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# bogdetect model"):
            raise ValueError(f"{path}: not a model file")
        meta = dict(tok.split("=", 1) for tok in header.split()[3:])
        w = np.array([float(line) for line in fh if line.strip()])
    if w.shape[0] != int(meta["K"]):
        raise ValueError(f"{path}: header says K={meta['K']}, found {w.shape[0]} weights")
    return ClassModel(int(meta["class_id"]), w, float(meta["bias"]), float(meta["threshold"]))
