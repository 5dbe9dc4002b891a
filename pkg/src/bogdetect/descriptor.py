"""Per-frame gesturelet descriptor.

Layout of one descriptor, for ``J`` joints and ``A`` angle triplets::

    [ P (3J) | alpha*dP (3J) | beta*ddP (3J) | psi*Theta (A) | psi*dTheta (A) ]

``P`` is the hip-relative pose rescaled to unit norm, ``Theta`` are the joint
angles in radians. Derivatives are central differences on the normalized
quantities, with edge frames repeated at the sequence boundaries.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .skeleton import SkeletonFrame, SkeletonSequence, SkeletonTopology

EPS = 1e-8
_BLOCK = 2048


@dataclass(frozen=True)
class DescriptorParams:
    alpha: float = 1.0
    beta: float = 1.0
    psi: float = 1.7
    window_half: int = 2

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0 and self.psi > 0):
            raise ValueError("alpha, beta and psi must be positive")
        if self.window_half < 1:
            raise ValueError("window_half must be >= 1")

    @property
    def velocity_step(self) -> int:
        # 1 for the default half-window of 2: dX(t) = X(t+1) - X(t-1)
        return max(1, self.window_half // 2)

    @classmethod
    def msr_action3d(cls) -> "DescriptorParams":
        return cls(alpha=1.0, beta=1.0, psi=1.7)

    @classmethod
    def msrc12(cls) -> "DescriptorParams":
        return cls(alpha=0.375, beta=0.3, psi=0.2)


@dataclass(frozen=True)
class GestureletDescriptor:
    frame_index: int
    values: np.ndarray


def _normalize_rows(rel: np.ndarray) -> np.ndarray:
    norm = np.sqrt(np.sum(rel * rel, axis=-1, keepdims=True))
    ok = norm >= EPS
    return np.where(ok, rel / np.where(ok, norm, 1.0), 0.0)


def normalize_poses(positions: np.ndarray, reference_joint: int) -> np.ndarray:
    """Hip-relative, unit-norm pose vectors for an ``(N, J, 3)`` array -> ``(N, 3J)``."""
    positions = np.asarray(positions, dtype=np.float64)
    rel = positions - positions[:, reference_joint : reference_joint + 1, :]
    return _normalize_rows(rel.reshape(positions.shape[0], -1))


def joint_angles(positions: np.ndarray, triplets: np.ndarray) -> np.ndarray:
    """Angles at each triplet vertex for an ``(N, J, 3)`` array -> ``(N, A)``.

    Angles lie in ``[0, pi]``. A triplet with a zero-length arm yields 0.
    """
    positions = np.asarray(positions, dtype=np.float64)
    triplets = np.asarray(triplets, dtype=np.intp).reshape(-1, 3)
    u = positions[:, triplets[:, 0]] - positions[:, triplets[:, 1]]
    w = positions[:, triplets[:, 2]] - positions[:, triplets[:, 1]]
    nu = np.sqrt(np.sum(u * u, axis=-1))
    nw = np.sqrt(np.sum(w * w, axis=-1))
    # atan2 keeps precision near 0 and pi where arccos does not
    c0 = u[..., 1] * w[..., 2] - u[..., 2] * w[..., 1]
    c1 = u[..., 2] * w[..., 0] - u[..., 0] * w[..., 2]
    c2 = u[..., 0] * w[..., 1] - u[..., 1] * w[..., 0]
    cross = np.sqrt(c0 * c0 + c1 * c1 + c2 * c2)
    dot = np.sum(u * w, axis=-1)
    ang = np.arctan2(cross, dot)
    return np.where((nu < EPS) | (nw < EPS), 0.0, ang)


def normalize_pose(frame: SkeletonFrame, topo: SkeletonTopology) -> np.ndarray:
    return normalize_poses(frame.joints[None], topo.reference_joint)[0]


def compute_angles(frame: SkeletonFrame, topo: SkeletonTopology) -> np.ndarray:
    return joint_angles(frame.joints[None], np.array(topo.angle_triplets))[0]


def _assemble(
    pose: np.ndarray,
    ang: np.ndarray,
    idx_prev1: np.ndarray,
    idx_next1: np.ndarray,
    idx_prev2: np.ndarray,
    idx_next2: np.ndarray,
    centre: np.ndarray,
    params: DescriptorParams,
) -> np.ndarray:
    # shared by batch and streaming paths so both produce identical bits
    dp = pose[idx_next1] - pose[idx_prev1]
    ddp = (pose[idx_next2] + pose[idx_prev2]) - 2.0 * pose[centre]
    dth = ang[idx_next1] - ang[idx_prev1]
    return np.concatenate(
        [
            pose[centre],
            params.alpha * dp,
            params.beta * ddp,
            params.psi * ang[centre],
            params.psi * dth,
        ],
        axis=-1,
    )


def descriptor_matrix(
    seq: SkeletonSequence | np.ndarray,
    topo: SkeletonTopology,
    params: DescriptorParams = DescriptorParams(),
) -> np.ndarray:
    """Descriptors for every frame, shape ``(N, 9J + 2A)``."""
    positions = seq.positions if isinstance(seq, SkeletonSequence) else np.asarray(seq, float)
    n = positions.shape[0]
    if n == 0:
        raise ValueError("cannot extract descriptors from an empty sequence")
    if positions.shape[1] != topo.joint_count:
        raise ValueError(
            f"sequence has {positions.shape[1]} joints, topology expects {topo.joint_count}"
        )
    triplets = np.array(topo.angle_triplets, dtype=np.intp)
    # row-wise work in cache-sized blocks keeps the per-frame cost flat in N
    pose = np.empty((n, 3 * topo.joint_count))
    ang = np.empty((n, topo.angle_count))
    for lo in range(0, n, _BLOCK):
        hi = min(n, lo + _BLOCK)
        pose[lo:hi] = normalize_poses(positions[lo:hi], topo.reference_joint)
        ang[lo:hi] = joint_angles(positions[lo:hi], triplets)
    k1, k2 = params.velocity_step, params.window_half
    out = np.empty((n, topo.descriptor_dim))
    for lo in range(0, n, _BLOCK):
        t = np.arange(lo, min(n, lo + _BLOCK))
        clip = lambda a: np.clip(a, 0, n - 1)  # noqa: E731
        out[lo : lo + t.size] = _assemble(
            pose, ang, clip(t - k1), clip(t + k1), clip(t - k2), clip(t + k2), t, params
        )
    return out


def compute_descriptor(
    seq: SkeletonSequence,
    t: int,
    topo: SkeletonTopology,
    params: DescriptorParams = DescriptorParams(),
) -> GestureletDescriptor:
    """Descriptor of a single frame ``t``; touches only its temporal window."""
    n = len(seq)
    if not 0 <= t < n:
        raise IndexError(f"frame {t} out of range [0, {n})")
    h = params.window_half
    window = np.clip(np.arange(t - h, t + h + 1), 0, n - 1)
    positions = np.stack([seq.frames[i].joints for i in window])
    values = _window_descriptor(positions, topo, params)
    return GestureletDescriptor(t, values)


def _window_descriptor(
    positions: np.ndarray, topo: SkeletonTopology, params: DescriptorParams
) -> np.ndarray:
    pose = normalize_poses(positions, topo.reference_joint)
    ang = joint_angles(positions, np.array(topo.angle_triplets, dtype=np.intp))
    return _from_window(pose, ang, params)


def _from_window(pose: np.ndarray, ang: np.ndarray, params: DescriptorParams) -> np.ndarray:
    h = params.window_half
    k1 = params.velocity_step
    c = np.array([h])
    return _assemble(
        pose, ang, c - k1, c + k1, c - h, c + h, c, params
    )[0]


class StreamingDescriptor:
    """Incremental descriptor extraction with ``window_half`` frames of look-ahead.

    ``push`` returns the descriptor of frame ``t - window_half`` once frame
    ``t`` has arrived; ``flush`` drains the tail by repeating the last frame.
    Output matches :func:`descriptor_matrix` on the full sequence.
    """

    def __init__(self, topo: SkeletonTopology, params: DescriptorParams = DescriptorParams()):
        self.topo = topo
        self.params = params
        self._triplets = np.array(topo.angle_triplets, dtype=np.intp)
        h = params.window_half
        self._pose: deque[np.ndarray] = deque(maxlen=2 * h + 1)
        self._ang: deque[np.ndarray] = deque(maxlen=2 * h + 1)
        self._seen = 0
        self._emitted = 0

    def _per_frame(self, joints: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        joints = np.asarray(joints, dtype=np.float64)[None]
        if joints.shape[1] != self.topo.joint_count:
            raise ValueError(
                f"frame has {joints.shape[1]} joints, topology expects {self.topo.joint_count}"
            )
        return (
            normalize_poses(joints, self.topo.reference_joint)[0],
            joint_angles(joints, self._triplets)[0],
        )

    def _emit(self, centre: int, last: int) -> np.ndarray:
        h = self.params.window_half
        first_buffered = self._seen - len(self._pose)
        idx = np.clip(np.arange(centre - h, centre + h + 1), 0, last) - first_buffered
        pose = np.stack([self._pose[i] for i in idx])
        ang = np.stack([self._ang[i] for i in idx])
        self._emitted += 1
        return _from_window(pose, ang, self.params)

    def push(self, joints: np.ndarray) -> Optional[GestureletDescriptor]:
        p, a = self._per_frame(joints)
        self._pose.append(p)
        self._ang.append(a)
        self._seen += 1
        centre = self._seen - 1 - self.params.window_half
        if centre < 0:
            return None
        return GestureletDescriptor(centre, self._emit(centre, self._seen - 1))

    def flush(self) -> Iterator[GestureletDescriptor]:
        while self._emitted < self._seen:
            centre = self._emitted
            yield GestureletDescriptor(centre, self._emit(centre, self._seen - 1))

    @property
    def latency(self) -> int:
        return self.params.window_half
