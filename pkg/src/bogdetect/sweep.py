"""Recognition accuracy as a function of codebook size and soft-binning width.

Clips are pre-segmented single instances; each codebook seed gives one
accuracy, so every sweep point carries a mean and a spread over seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

from .classifier import (
    NATURAL_NEGATIVE,
    POSITIVE,
    ClassModel,
    TrainingItem,
    TrainingSet,
    classify_recognition,
    train_linear,
)
from .codebook import Codebook, assign_many, histogram_from_indices, train_codebook
from .descriptor import DescriptorParams, descriptor_matrix
from .pipeline import TrainParams
from .skeleton import SkeletonSequence, SkeletonTopology
from .synthetic import SyntheticSpec, generate_instances

Clips = Sequence[tuple[SkeletonSequence, int]]


@dataclass(frozen=True)
class RecognitionTask:
    spec: SyntheticSpec
    train_clips: int = 8
    test_clips: int = 30
    data_seed: int = 1

    def data(self) -> tuple[list, list]:
        train = generate_instances(self.train_clips, self.spec, seed=self.data_seed)
        test = generate_instances(self.test_clips, self.spec, seed=self.data_seed + 1000)
        return train, test


@dataclass(frozen=True)
class SweepPoint:
    value: int
    accuracies: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))


def _accuracy(
    cb: Codebook, m: int, Dtr: list, ytr: list, Dte: list, yte: list, params: TrainParams
) -> float:
    H = [histogram_from_indices(assign_many(D, cb, m), cb.K) for D in Dtr]
    models = []
    for cid in sorted(set(ytr)):
        ts = TrainingSet(
            [TrainingItem(h, y == cid, POSITIVE if y == cid else NATURAL_NEGATIVE, y) for h, y in zip(H, ytr)]
        )
        w, b = train_linear(ts, params.reg, params.epochs, params.seed, params.pos_weight)
        models.append(ClassModel(cid, w, b))
    hits = sum(
        classify_recognition(histogram_from_indices(assign_many(D, cb, m), cb.K), models) == y
        for D, y in zip(Dte, yte)
    )
    return hits / len(yte)


def recognition_curve(
    train: Clips,
    test: Clips,
    topo: SkeletonTopology,
    dparams: DescriptorParams,
    params: TrainParams,
    param: Literal["K", "m"],
    values: Sequence[int],
    seeds: Sequence[int],
) -> list[SweepPoint]:
    """Accuracy for each value of ``param`` and each codebook seed.

    Everything but ``param`` and the codebook seed comes from ``params``.
    Descriptors are computed once; codebooks are shared across ``m`` values.
    """
    if param not in ("K", "m"):
        raise ValueError(f"can only sweep K or m, not {param!r}")
    Dtr = [descriptor_matrix(s, topo, dparams) for s, _ in train]
    Dte = [descriptor_matrix(s, topo, dparams) for s, _ in test]
    ytr = [c for _, c in train]
    yte = [c for _, c in test]
    X = np.concatenate(Dtr, axis=0)
    cache: dict[tuple[int, int], Codebook] = {}

    def codebook(K: int, seed: int) -> Codebook:
        if (K, seed) not in cache:
            cache[(K, seed)] = train_codebook(
                X, K, seed, max_iters=params.kmeans_iters, subsample=params.subsample
            )
        return cache[(K, seed)]

    out = []
    for v in values:
        p = replace(params, **{param: int(v)})
        accs = tuple(
            _accuracy(codebook(p.K, int(s)), p.m, Dtr, ytr, Dte, yte, p) for s in seeds
        )
        out.append(SweepPoint(int(v), accs))
    return out
