"""Codebook learning and soft-binned bag-of-gesturelets histograms."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray  # (K, D)
    seed: int = 0
    subsample: float = 1.0

    def __post_init__(self) -> None:
        c = np.array(self.centroids, dtype=np.float64)
        if c.ndim != 2:
            raise ValueError("centroids must be a (K, D) array")
        if c.shape[0] < 2:
            raise ValueError("a codebook needs K >= 2")
        if not np.all(np.isfinite(c)):
            raise ValueError("centroids must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        sq = np.einsum("ij,ij->i", c, c)
        sq.setflags(write=False)
        object.__setattr__(self, "_sqnorm", sq)

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Codebook):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.subsample == other.subsample
            and np.array_equal(self.centroids, other.centroids)
        )

    def sq_distances(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"descriptor dim {X.shape[1]} != codebook dim {self.dim}")
        d = np.einsum("ij,ij->i", X, X)[:, None] - 2.0 * (X @ self.centroids.T) + self._sqnorm
        return np.maximum(d, 0.0)


@dataclass(frozen=True)
class SoftAssignment:
    """The ``m`` nearest clusters of one gesturelet; rank ``i`` votes ``1/i``."""

    clusters: tuple[int, ...]
    weights: tuple[float, ...]

    def __iter__(self):
        return iter(zip(self.clusters, self.weights))

    def __len__(self) -> int:
        return len(self.clusters)


def vote_weights(m: int) -> np.ndarray:
    return 1.0 / np.arange(1, m + 1, dtype=np.float64)


def harmonic(m: int) -> float:
    return float(vote_weights(m).sum())


def _kmeanspp(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[chosen].copy()


def train_codebook(
    descriptors: np.ndarray,
    K: int,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-6,
    subsample: float = 1.0,
) -> Codebook:
    """Euclidean k-means with seeded k-means++ initialisation.

    Parameters
    ----------
    descriptors : array, shape (n, D)
    K : int
        Number of centroids; ``n`` must be at least ``K`` after subsampling.
    seed : int
        Drives both the optional subsampling and the initial seeding.
    max_iters, tol
        Lloyd iterations stop once no centroid moves more than ``tol``.
    subsample : float
        Fraction of descriptors, drawn without replacement, used for clustering.

    Empty clusters are re-seeded from the points farthest from their centroid.
    """
    X = np.asarray(descriptors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("descriptors must be a 2-D array")
    if not 0 < subsample <= 1:
        raise ValueError("subsample must be in (0, 1]")
    rng = np.random.default_rng(seed)
    if subsample < 1:
        keep = max(K, int(round(subsample * X.shape[0])))
        X = X[np.sort(rng.choice(X.shape[0], size=min(keep, X.shape[0]), replace=False))]
    if X.shape[0] < K:
        raise ValueError(f"need at least K={K} descriptors, got {X.shape[0]}")

    C = _kmeanspp(X, K, rng)
    for it in range(max_iters):
        cb = Codebook(C, seed, subsample)
        d = cb.sq_distances(X)
        labels = np.argmin(d, axis=1)
        counts = np.bincount(labels, minlength=K)
        onehot = sparse.csr_matrix(
            (np.ones(X.shape[0]), (labels, np.arange(X.shape[0]))), shape=(K, X.shape[0])
        )
        sums = onehot @ X
        new = C.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        empty = np.flatnonzero(~filled)
        if empty.size:
            own = d[np.arange(X.shape[0]), labels]
            far = np.argsort(-own, kind="stable")[: empty.size]
            new[empty] = X[far]
        shift = np.max(np.sqrt(np.sum((new - C) ** 2, axis=1)))
        C = new
        if shift < tol:
            log.debug("k-means converged after %d iterations", it + 1)
            break
    return Codebook(C, seed, subsample)


def assign_many(X: np.ndarray, cb: Codebook, m: int) -> np.ndarray:
    """Indices of the ``m`` nearest centroids per row, nearest first -> ``(n, m)``.

    Equidistant centroids are ranked by lower index.
    """
    if not 1 <= m <= cb.K:
        raise ValueError(f"m must be in [1, {cb.K}], got {m}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = np.empty((X.shape[0], m), dtype=np.intp)
    # blocks of rows keep the distance matrix cache-sized
    for lo in range(0, X.shape[0], _BLOCK):
        d = cb.sq_distances(X[lo : lo + _BLOCK])
        rows = np.arange(d.shape[0])
        for r in range(m):
            j = np.argmin(d, axis=1)
            out[lo : lo + d.shape[0], r] = j
            d[rows, j] = np.inf
    return out


def soft_assign(d: np.ndarray, cb: Codebook, m: int) -> SoftAssignment:
    idx = assign_many(np.asarray(d)[None], cb, m)[0]
    return SoftAssignment(tuple(int(i) for i in idx), tuple(float(w) for w in vote_weights(m)))


def histogram_from_indices(idx: np.ndarray, K: int) -> np.ndarray:
    """Histogram of an ``(n, m)`` nearest-cluster array under 1/i voting."""
    idx = np.asarray(idx, dtype=np.intp).reshape(-1, np.shape(idx)[-1] if np.ndim(idx) else 1)
    w = np.broadcast_to(vote_weights(idx.shape[1]), idx.shape)
    return np.bincount(idx.ravel(), weights=w.ravel(), minlength=K).astype(np.float64)


def build_histogram(assignments: Iterable[SoftAssignment], K: int) -> np.ndarray:
    h = np.zeros(K, dtype=np.float64)
    for a in assignments:
        for k, w in a:
            h[k] += w
    return h


def bog_histogram(descriptors: np.ndarray, cb: Codebook, m: int) -> np.ndarray:
    """Bag-of-gesturelets histogram of a whole (sub)sequence of descriptors."""
    return histogram_from_indices(assign_many(descriptors, cb, m), cb.K)


def save_codebook(cb: Codebook, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# bogdetect codebook D={cb.dim} K={cb.K} seed={cb.seed} subsample={cb.subsample!r}\n")
        for row in cb.centroids:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_codebook(path) -> Codebook:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# bogdetect codebook"):
            raise ValueError(f"{path}: not a codebook file")
        meta = dict(tok.split("=", 1) for tok in header.split()[3:])
        rows = [[float(v) for v in line.split()] for line in fh if line.strip()]
    C = np.array(rows, dtype=np.float64)
    D, K = int(meta["D"]), int(meta["K"])
    if C.shape != (K, D):
        raise ValueError(f"{path}: header says K={K}, D={D}, body has shape {C.shape}")
    return Codebook(C, int(meta["seed"]), float(meta.get("subsample", "1.0")))

