"""Per-frame score projection, smoothing, and linear-time detection.

A linear model over bag-of-gesturelets histograms decomposes over frames:
the score of any interval minus the bias is the sum of per-frame scores,
where a frame contributes ``sum_i w[c_i] / i`` over its ``m`` nearest
clusters. Finding the best interval is then a maximum-subarray problem.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .classifier import ClassModel
from .codebook import Codebook, assign_many, vote_weights
from .descriptor import DescriptorParams, descriptor_matrix
from .skeleton import DetectionEvent, SkeletonSequence, SkeletonTopology


@dataclass(frozen=True, eq=False)
class ScoreArray:
    scores: np.ndarray
    class_id: int = 0

    def __post_init__(self) -> None:
        s = np.array(self.scores, dtype=np.float64).ravel()
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    def __len__(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class SmoothingParams:
    window: int = 5
    anchor_weighted: bool = True

    def __post_init__(self) -> None:
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"smoothing window must be odd and >= 1, got {self.window}")

    @property
    def half(self) -> int:
        return (self.window - 1) // 2


def weight_matrix(models: Sequence[ClassModel]) -> np.ndarray:
    W = np.stack([m.weights for m in models])
    if len({m.K for m in models}) != 1:
        raise ValueError("models disagree on codebook size")
    return W


def project_scores(assignments: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Per-frame scores ``(C, n)`` from ``(n, m)`` nearest-cluster indices and ``(C, K)`` weights."""
    assignments = np.asarray(assignments, dtype=np.intp)
    W = np.atleast_2d(W)
    if assignments.size and assignments.max() >= W.shape[1]:
        raise ValueError(f"cluster index {assignments.max()} outside model K={W.shape[1]}")
    votes = vote_weights(assignments.shape[1])
    out = W[:, assignments[:, 0]] * votes[0]
    for r in range(1, assignments.shape[1]):
        out = out + W[:, assignments[:, r]] * votes[r]
    return out


def frame_scores(
    seq: SkeletonSequence,
    cb: Codebook,
    model: ClassModel,
    m: int,
    params: DescriptorParams = DescriptorParams(),
    topo: Optional[SkeletonTopology] = None,
) -> ScoreArray:
    """Bias-free per-frame contributions of ``model`` over ``seq``."""
    topo = topo or SkeletonTopology.kinect()
    if model.K != cb.K:
        raise ValueError(f"model K={model.K} does not match codebook K={cb.K}")
    idx = assign_many(descriptor_matrix(seq, topo, params), cb, m)
    return ScoreArray(project_scores(idx, model.weights[None])[0], model.class_id)


def smooth(scores, p: SmoothingParams = SmoothingParams()):
    """Anchor-weighted moving average with clamped edges.

    The centre frame carries weight ``window - 1`` (its neighbour count) and
    each neighbour weight 1, normalised to sum to one; with
    ``anchor_weighted=False`` all frames in the window weigh the same. Works along the last
    axis, so a ``(C, n)`` matrix smooths every class at once.
    """
    is_array = isinstance(scores, ScoreArray)
    x = np.asarray(scores.scores if is_array else scores, dtype=np.float64)
    h = p.half
    if h == 0:
        out = x.copy()
    else:
        n = x.shape[-1]
        t = np.arange(n)
        acc = np.zeros_like(x)
        for d in range(1, h + 1):
            acc = acc + (x[..., np.clip(t - d, 0, n - 1)] + x[..., np.clip(t + d, 0, n - 1)])
        out = _combine(x, acc, p)
    return ScoreArray(out, scores.class_id) if is_array else out


def _combine(centre, neighbour_sum, p: SmoothingParams):
    if not p.anchor_weighted:
        return (centre + neighbour_sum) / p.window
    return ((p.window - 1) * centre + neighbour_sum) / (2.0 * (p.window - 1))


class SmoothingBuffer:
    """Streaming form of :func:`smooth` with ``half`` frames of delay."""

    def __init__(self, p: SmoothingParams = SmoothingParams()):
        self.p = p
        self._buf: deque[np.ndarray] = deque(maxlen=2 * p.half + 1)
        self._seen = 0
        self._emitted = 0

    def _emit(self, centre: int, last: int) -> np.ndarray:
        h = self.p.half
        first = self._seen - len(self._buf)
        get = lambda i: self._buf[min(max(i, 0), last) - first]  # noqa: E731
        x = get(centre)
        if h == 0:
            out = np.array(x, dtype=np.float64, copy=True)
        else:
            acc = np.zeros_like(x)
            for d in range(1, h + 1):
                acc = acc + (get(centre - d) + get(centre + d))
            out = _combine(x, acc, self.p)
        self._emitted += 1
        return out

    def push(self, scores: np.ndarray) -> Optional[tuple[int, np.ndarray]]:
        self._buf.append(np.asarray(scores, dtype=np.float64))
        self._seen += 1
        centre = self._seen - 1 - self.p.half
        if centre < 0:
            return None
        return centre, self._emit(centre, self._seen - 1)

    def flush(self):
        while self._emitted < self._seen:
            c = self._emitted
            yield c, self._emit(c, self._seen - 1)


def kadane_max_subarray(scores) -> tuple[int, int, float]:
    """Best contiguous interval ``(start, end, sum)`` in one pass.

    Among equal sums the earliest start wins, then the shortest interval.
    ``-inf`` entries act as barriers that no finite-sum interval crosses.
    """
    x = scores.scores if isinstance(scores, ScoreArray) else scores
    x = np.asarray(x, dtype=np.float64).tolist()
    if not x:
        raise ValueError("kadane_max_subarray needs a non-empty array")
    run, run_start = x[0], 0
    best, best_start, best_end = x[0], 0, 0
    for i in range(1, len(x)):
        v = x[i]
        if run < 0:
            run, run_start = v, i
        else:
            run += v
        if run > best:
            best, best_start, best_end = run, run_start, i
    return best_start, best_end, best


def detect_offline(
    scores, threshold: float, class_id: Optional[int] = None
) -> list[DetectionEvent]:
    """Repeated max-subarray search with removal of detected intervals.

    Semantically: find :func:`kadane_max_subarray`, emit it if its sum is
    ``>= threshold``, mask it with ``-inf`` and repeat. For finite scores and
    a positive threshold the whole decomposition is built in a single
    left-to-right pass (linear time); otherwise the masking loop is run
    directly over a heap of segments.
    """
    if isinstance(scores, ScoreArray):
        cid = scores.class_id if class_id is None else class_id
        x = scores.scores
    else:
        cid = 0 if class_id is None else class_id
        x = np.asarray(scores, dtype=np.float64)
    if threshold > 0 and np.all(np.isfinite(x)):
        spans = _maximal_segments(x.tolist())
    else:
        spans = _masked_segments(x, threshold)
    events = []
    for s, e in spans:
        total = float(np.cumsum(x[s : e + 1])[-1])  # same summation order as the scan
        if total >= threshold:
            events.append(DetectionEvent(cid, s, e, total, e))
    events.sort(key=lambda ev: ev.start_frame)
    return events


def _maximal_segments(x: list[float]) -> list[tuple[int, int]]:
    # Single-pass decomposition into maximal-scoring segments over prefix
    # sums (all-maximal-subsequences construction). Comparisons are chosen so
    # that ties resolve exactly like the masking loop (earliest start, then
    # shortest); zero scores open segments so leading zeros are kept.
    starts: list[int] = []
    ends: list[int] = []
    lows: list[float] = []
    highs: list[float] = []
    links: list[int] = []
    cum = 0.0
    for i, v in enumerate(x):
        low = cum
        cum += v
        if v < 0:
            continue
        s, high = i, cum
        while True:
            j = len(starts) - 1
            while j >= 0 and lows[j] > low:
                j = links[j]
            if j < 0 or highs[j] >= high:
                starts.append(s)
                ends.append(i)
                lows.append(low)
                highs.append(high)
                links.append(j)
                break
            s, low = starts[j], lows[j]
            del starts[j:], ends[j:], lows[j:], highs[j:], links[j:]
    return [(s, e) for s, e, lo, hi in zip(starts, ends, lows, highs) if hi > lo]


def _masked_segments(x: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    # Untouched segments keep their cached optimum; only the two remainders
    # of a split segment are rescanned.
    heap: list[tuple[float, int, int, int, int]] = []
    out = []

    def push(lo: int, hi: int) -> None:
        if lo > hi:
            return
        s, e, total = kadane_max_subarray(x[lo : hi + 1])
        if total >= threshold:
            heapq.heappush(heap, (-total, lo + s, lo + e, lo, hi))

    if x.shape[0]:
        push(0, x.shape[0] - 1)
    while heap:
        _, s, e, lo, hi = heapq.heappop(heap)
        out.append((s, e))
        push(lo, s - 1)
        push(e + 1, hi)
    return out


class OnlineDetector:
    """Greedy multi-class streaming detector over smoothed per-frame scores.

    For each class it runs the Kadane recurrence on the incoming scores. A
    class arms once its best sum ending at the current frame reaches its
    threshold; while armed it remembers the peak sum, the peak frame and the
    interval start. After ``patience`` consecutive negative frames an armed
    class fires with interval ``[start, peak frame]``, and every class is reset
    so the search restarts on the next frame. If several classes fire on the
    same frame the one with the highest peak wins, then the lower class id.
    """

    def __init__(
        self,
        thresholds: Sequence[float],
        class_ids: Optional[Sequence[int]] = None,
        patience: int = 1,
    ):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.thresholds = np.asarray(thresholds, dtype=np.float64).ravel()
        c = self.thresholds.shape[0]
        ids = np.arange(c) if class_ids is None else np.asarray(class_ids)
        if ids.shape[0] != c:
            raise ValueError("need one class id per threshold")
        order = np.argsort(ids, kind="stable")
        self.class_ids = ids[order]
        self.thresholds = self.thresholds[order]
        self._order = order
        self.patience = patience
        self.frame = 0
        self.reset()

    @classmethod
    def from_models(cls, models: Sequence[ClassModel], patience: int = 1) -> "OnlineDetector":
        return cls([m.threshold for m in models], [m.class_id for m in models], patience)

    def reset(self) -> None:
        c = self.thresholds.shape[0]
        self.started = np.zeros(c, dtype=bool)
        self.running = np.zeros(c)
        self.start = np.zeros(c, dtype=np.int64)
        self.armed = np.zeros(c, dtype=bool)
        self.peak = np.full(c, -np.inf)
        self.peak_frame = np.zeros(c, dtype=np.int64)
        self.peak_start = np.zeros(c, dtype=np.int64)
        self.neg_run = np.zeros(c, dtype=np.int64)

    def push(self, scores, frame: Optional[int] = None) -> Optional[DetectionEvent]:
        """Consume one frame of per-class scores (ordered as the constructor's class ids)."""
        if frame is not None and frame != self.frame:
            raise ValueError(f"expected frame {self.frame}, got {frame}")
        s = np.asarray(scores, dtype=np.float64).ravel()[self._order]
        t = self.frame
        self.frame += 1

        restart = ~self.started | (self.running < 0)
        self.running = np.where(restart, s, self.running + s)
        self.start = np.where(restart, t, self.start)
        self.started[:] = True

        newly = ~self.armed & (self.running >= self.thresholds)
        self.armed |= newly
        rising = newly | (self.armed & (self.running > self.peak))
        self.peak = np.where(rising, self.running, self.peak)
        self.peak_frame = np.where(rising, t, self.peak_frame)
        self.peak_start = np.where(rising, self.start, self.peak_start)
        self.neg_run = np.where(self.armed & (s < 0), self.neg_run + 1, 0)

        fire = self.armed & (self.neg_run >= self.patience)
        if not fire.any():
            return None
        cand = np.where(fire, self.peak, -np.inf)
        k = int(np.argmax(cand))
        ev = DetectionEvent(
            int(self.class_ids[k]),
            int(self.peak_start[k]),
            int(self.peak_frame[k]),
            float(self.peak[k]),
            t,
        )
        self.reset()
        return ev


def detect_online(
    score_matrix: np.ndarray,
    thresholds: Sequence[float],
    class_ids: Optional[Sequence[int]] = None,
    patience: int = 1,
) -> list[DetectionEvent]:
    """Run :class:`OnlineDetector` over a ``(C, n)`` matrix of smoothed scores."""
    S = np.atleast_2d(np.asarray(score_matrix, dtype=np.float64))
    det = OnlineDetector(thresholds, class_ids, patience)
    events = []
    for t in range(S.shape[1]):
        ev = det.push(S[:, t])
        if ev is not None:
            events.append(ev)
    return events
