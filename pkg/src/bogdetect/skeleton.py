"""Skeleton streams, topologies, annotations and detection events.

Frame indices are 0-based and every interval is closed (``[start, end]``).
Loaders that read 1-based sources translate at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

KINECT_JOINTS: tuple[str, ...] = (
    "hip_center",
    "spine",
    "shoulder_center",
    "head",
    "shoulder_left",
    "elbow_left",
    "wrist_left",
    "hand_left",
    "shoulder_right",
    "elbow_right",
    "wrist_right",
    "hand_right",
    "hip_left",
    "knee_left",
    "ankle_left",
    "foot_left",
    "hip_right",
    "knee_right",
    "ankle_right",
    "foot_right",
)

# (a, vertex, b) by joint name. Joint flexion first, then inter-limb angles.
DEFAULT_ANGLE_TRIPLETS: tuple[tuple[str, str, str], ...] = (
    ("shoulder_left", "elbow_left", "wrist_left"),
    ("shoulder_right", "elbow_right", "wrist_right"),
    ("elbow_left", "wrist_left", "hand_left"),
    ("elbow_right", "wrist_right", "hand_right"),
    ("shoulder_center", "shoulder_left", "elbow_left"),
    ("shoulder_center", "shoulder_right", "elbow_right"),
    ("hip_left", "shoulder_left", "elbow_left"),
    ("hip_right", "shoulder_right", "elbow_right"),
    ("hip_left", "knee_left", "ankle_left"),
    ("hip_right", "knee_right", "ankle_right"),
    ("knee_left", "ankle_left", "foot_left"),
    ("knee_right", "ankle_right", "foot_right"),
    ("hip_center", "hip_left", "knee_left"),
    ("hip_center", "hip_right", "knee_right"),
    ("shoulder_left", "hip_left", "knee_left"),
    ("shoulder_right", "hip_right", "knee_right"),
    ("spine", "shoulder_center", "head"),
    ("hip_center", "spine", "shoulder_center"),
    ("head", "shoulder_center", "shoulder_left"),
    ("head", "shoulder_center", "shoulder_right"),
    ("elbow_left", "shoulder_center", "elbow_right"),
    ("hand_left", "shoulder_center", "hand_right"),
    ("wrist_left", "spine", "wrist_right"),
    ("knee_left", "hip_center", "knee_right"),
    ("ankle_left", "hip_center", "ankle_right"),
    ("hand_left", "shoulder_left", "head"),
    ("hand_right", "shoulder_right", "head"),
    ("spine", "hip_center", "hand_left"),
    ("spine", "hip_center", "hand_right"),
    ("elbow_left", "spine", "hip_center"),
    ("elbow_right", "spine", "hip_center"),
    ("knee_left", "hip_center", "spine"),
    ("knee_right", "hip_center", "spine"),
    ("hand_left", "hip_left", "foot_left"),
    ("hand_right", "hip_right", "foot_right"),
)


class Joint(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class SkeletonTopology:
    """Joint layout plus the angle triplets used by the descriptor.

    ``angle_triplets`` holds joint ids ``(a, vertex, b)``; the angle is
    measured at ``vertex``.
    """

    joint_names: tuple[str, ...]
    reference_joint: int
    angle_triplets: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        n = len(self.joint_names)
        if n == 0:
            raise ValueError("topology needs at least one joint")
        if len(set(self.joint_names)) != n:
            raise ValueError("joint names must be unique")
        if not 0 <= self.reference_joint < n:
            raise ValueError(f"reference_joint {self.reference_joint} out of range [0, {n})")
        for i, (a, v, b) in enumerate(self.angle_triplets):
            for j in (a, v, b):
                if not 0 <= j < n:
                    raise ValueError(f"triplet {i} references unknown joint {j}")
            if a == v or b == v:
                raise ValueError(f"triplet {i} reuses its vertex joint {v}")

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    @property
    def angle_count(self) -> int:
        return len(self.angle_triplets)

    @property
    def descriptor_dim(self) -> int:
        return 9 * self.joint_count + 2 * self.angle_count

    def joint_id(self, name: str) -> int:
        return self.joint_names.index(name)

    @classmethod
    def from_names(
        cls,
        joint_names: Sequence[str],
        reference_joint: str,
        angle_triplets: Iterable[Sequence[str]],
    ) -> "SkeletonTopology":
        names = tuple(joint_names)
        idx = {n: i for i, n in enumerate(names)}
        try:
            triplets = tuple(tuple(idx[j] for j in t) for t in angle_triplets)
            ref = idx[reference_joint]
        except KeyError as exc:
            raise ValueError(f"unknown joint name {exc.args[0]!r}") from None
        for t in triplets:
            if len(t) != 3:
                raise ValueError(f"angle triplet must name 3 joints, got {t}")
        return cls(names, ref, triplets)  # type: ignore[arg-type]

    @classmethod
    def kinect(cls) -> "SkeletonTopology":
        """20-joint Kinect v1 layout with the default 35 angle triplets."""
        return cls.from_names(KINECT_JOINTS, "hip_center", DEFAULT_ANGLE_TRIPLETS)


@dataclass(frozen=True)
class SkeletonFrame:
    index: int
    joints: np.ndarray  # (J, 3)

    def __post_init__(self) -> None:
        arr = np.array(self.joints, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"joints must have shape (J, 3), got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "joints", arr)

    def joint(self, j: int) -> Joint:
        return Joint(*(float(v) for v in self.joints[j]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SkeletonFrame):
            return NotImplemented
        return self.index == other.index and np.array_equal(self.joints, other.joints)


@dataclass(frozen=True, eq=False)
class SkeletonSequence:
    frames: tuple[SkeletonFrame, ...]
    fps: float = 30.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.fps > 0:
            raise ValueError("fps must be positive")

    @classmethod
    def from_array(cls, positions: np.ndarray, fps: float = 30.0) -> "SkeletonSequence":
        """Build a sequence from an ``(N, J, 3)`` array, indexing frames from 0."""
        positions = np.asarray(positions, dtype=np.float64)
        if positions.ndim != 3 or positions.shape[2] != 3:
            raise ValueError(f"positions must have shape (N, J, 3), got {positions.shape}")
        return cls(tuple(SkeletonFrame(i, p) for i, p in enumerate(positions)), fps)

    def __len__(self) -> int:
        return len(self.frames)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SkeletonSequence):
            return NotImplemented
        return self.fps == other.fps and self.frames == other.frames

    @cached_property
    def positions(self) -> np.ndarray:
        """Stacked ``(N, J, 3)`` joint array. Frames must share a joint count."""
        if not self.frames:
            return np.zeros((0, 0, 3))
        arr = np.stack([f.joints for f in self.frames])
        arr.setflags(write=False)
        return arr

    def slice(self, start: int, end: int) -> "SkeletonSequence":
        """Frames ``[start, end]`` (inclusive), re-indexed from 0."""
        return SkeletonSequence.from_array(self.positions[start : end + 1], self.fps)


@dataclass(frozen=True)
class Annotation:
    class_id: int
    start_frame: int
    end_frame: int
    action_point: Optional[int] = None

    def __post_init__(self) -> None:
        if self.start_frame > self.end_frame:
            raise ValueError(f"annotation start {self.start_frame} > end {self.end_frame}")
        if self.action_point is not None and not (
            self.start_frame <= self.action_point <= self.end_frame
        ):
            raise ValueError(
                f"action point {self.action_point} outside [{self.start_frame}, {self.end_frame}]"
            )

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class DetectionEvent:
    class_id: int
    start_frame: int
    end_frame: int
    score: float
    trigger_frame: int

    def __post_init__(self) -> None:
        if not self.start_frame <= self.end_frame <= self.trigger_frame:
            raise ValueError(
                "detection requires start <= end <= trigger, got "
                f"{self.start_frame}, {self.end_frame}, {self.trigger_frame}"
            )


@dataclass(frozen=True)
class Violation:
    frame: int
    message: str
    joint: Optional[int] = None


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_sequence(seq: SkeletonSequence, topo: SkeletonTopology) -> ValidationResult:
    """Check frame numbering, joint counts and finiteness. Never raises."""
    out: list[Violation] = []
    if len(seq) == 0:
        out.append(Violation(-1, "sequence is empty"))
    for pos, frame in enumerate(seq.frames):
        if frame.index != pos:
            out.append(Violation(frame.index, f"expected frame index {pos}, got {frame.index}"))
        if frame.joints.shape[0] != topo.joint_count:
            out.append(
                Violation(
                    frame.index,
                    f"frame has {frame.joints.shape[0]} joints, topology expects {topo.joint_count}",
                )
            )
        bad = np.argwhere(~np.isfinite(frame.joints))
        for j in sorted({int(r[0]) for r in bad}):
            name = topo.joint_names[j] if j < topo.joint_count else str(j)
            out.append(Violation(frame.index, f"non-finite coordinate at joint {name}", joint=j))
    return ValidationResult(tuple(out))


def frames_to_seconds(frames: int, fps: float = 30.0) -> float:
    return frames / fps


def seconds_to_frames(seconds: float, fps: float = 30.0) -> int:
    return int(math.floor(seconds * fps + 0.5))
