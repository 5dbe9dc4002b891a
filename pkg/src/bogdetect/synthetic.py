"""Seeded synthetic skeleton streams with exact annotations.

A fixed standing skeleton idles (with sensor noise and slight sway) between
action instances. Each class moves its own joint group along a class-specific
direction with a class-specific sinusoid, so classes are separable by
construction. Instances are time-normalised, so lengths can vary freely.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .skeleton import KINECT_JOINTS, Annotation, SkeletonSequence

PAUSE = "pause"

# Standing pose, metres, sensor frame (x right, y up, z away from the sensor).
NEUTRAL_POSE: dict[str, tuple[float, float, float]] = {
    "hip_center": (0.0, 0.95, 3.0),
    "spine": (0.0, 1.15, 3.0),
    "shoulder_center": (0.0, 1.45, 3.0),
    "head": (0.0, 1.65, 3.0),
    "shoulder_left": (-0.20, 1.40, 3.0),
    "elbow_left": (-0.25, 1.12, 3.0),
    "wrist_left": (-0.27, 0.88, 3.0),
    "hand_left": (-0.28, 0.80, 3.0),
    "shoulder_right": (0.20, 1.40, 3.0),
    "elbow_right": (0.25, 1.12, 3.0),
    "wrist_right": (0.27, 0.88, 3.0),
    "hand_right": (0.28, 0.80, 3.0),
    "hip_left": (-0.10, 0.90, 3.0),
    "knee_left": (-0.11, 0.50, 3.0),
    "ankle_left": (-0.11, 0.10, 3.0),
    "foot_left": (-0.11, 0.05, 2.92),
    "hip_right": (0.10, 0.90, 3.0),
    "knee_right": (0.11, 0.50, 3.0),
    "ankle_right": (0.11, 0.10, 3.0),
    "foot_right": (0.11, 0.05, 2.92),
}

# Joint groups driven by successive classes, with a per-joint lever factor.
JOINT_GROUPS: tuple[dict[str, float], ...] = (
    {"elbow_left": 0.5, "wrist_left": 0.85, "hand_left": 1.0},
    {"elbow_right": 0.5, "wrist_right": 0.85, "hand_right": 1.0},
    {"knee_right": 0.5, "ankle_right": 0.9, "foot_right": 1.0},
    {"knee_left": 0.5, "ankle_left": 0.9, "foot_left": 1.0},
    {"head": 0.6, "shoulder_center": 0.4, "shoulder_left": 0.3, "shoulder_right": 0.3},
)


def neutral_skeleton() -> np.ndarray:
    return np.array([NEUTRAL_POSE[name] for name in KINECT_JOINTS], dtype=np.float64)


@dataclass(frozen=True)
class ClassSignature:
    """Displacement ``lever * (amp * sin(pi u) * direction + wiggle * sin(2 pi f u + phase) * wiggle_dir)``."""

    joints: tuple[int, ...]
    levers: tuple[float, ...]
    direction: tuple[float, float, float]
    amplitude: float
    frequency: float
    phase: float
    wiggle: float
    wiggle_direction: tuple[float, float, float]

    def displacement(
        self, u: np.ndarray, style: tuple[np.ndarray, np.ndarray] | None = None
    ) -> np.ndarray:
        """Offsets for the driven joints at normalised times ``u`` -> ``(len(u), n_joints, 3)``.

        ``style`` optionally adds perturbations to the main and wiggle directions.
        """
        u = np.asarray(u, dtype=np.float64)[:, None]
        d = np.asarray(self.direction)
        wd = np.asarray(self.wiggle_direction)
        if style is not None:
            d = d + style[0]
            d = d / np.linalg.norm(d)
            wd = wd + style[1]
            wd = wd / np.linalg.norm(wd)
        main = self.amplitude * np.sin(np.pi * u) * d
        osc = self.wiggle * np.sin(2 * np.pi * self.frequency * u + self.phase) * wd
        base = main + osc
        return base[:, None, :] * np.asarray(self.levers)[None, :, None]


def default_signatures(n_classes: int, seed: int = 0) -> list[ClassSignature]:
    rng = np.random.default_rng(seed)
    names = list(KINECT_JOINTS)
    sigs = []
    for c in range(n_classes):
        group = JOINT_GROUPS[c % len(JOINT_GROUPS)]
        d = rng.normal(size=3)
        d[1] = abs(d[1]) + 0.5  # lift rather than push into the floor
        d /= np.linalg.norm(d)
        wd = np.cross(d, rng.normal(size=3))
        wd /= np.linalg.norm(wd)
        sigs.append(
            ClassSignature(
                joints=tuple(names.index(j) for j in group),
                levers=tuple(group.values()),
                direction=tuple(float(v) for v in d),
                amplitude=0.45,
                frequency=1.0 + c // len(JOINT_GROUPS),
                phase=float(rng.uniform(0, 2 * np.pi)),
                wiggle=0.12,
                wiggle_direction=tuple(float(v) for v in wd),
            )
        )
    return sigs


ScheduleItem = Union[int, str]


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 3
    signatures: Optional[tuple[ClassSignature, ...]] = None
    instance_length: tuple[int, int] = (35, 60)
    pause_length: tuple[int, int] = (25, 45)
    noise: float = 0.004
    amplitude_jitter: float = 0.15
    style_jitter: float = 0.0
    sway: float = 0.01
    seed: int = 0
    schedule: Optional[tuple[ScheduleItem, ...]] = None
    n_instances: int = 6
    pad: bool = True
    fps: float = 30.0

    def resolved_signatures(self) -> tuple[ClassSignature, ...]:
        if self.signatures is not None:
            return tuple(self.signatures)
        return tuple(default_signatures(self.n_classes))


def _random_schedule(spec: SyntheticSpec, rng: np.random.Generator) -> list[ScheduleItem]:
    out: list[ScheduleItem] = []
    for i in range(spec.n_instances):
        if i:
            out.append(PAUSE)
        out.append(int(rng.integers(spec.n_classes)))
    return out


def generate_synthetic(spec: SyntheticSpec) -> tuple[SkeletonSequence, list[Annotation]]:
    """One unsegmented stream and its exact annotations.

    ``schedule`` lists class ids and ``"pause"`` tokens in stream order;
    instances that follow each other without a pause token are concatenated
    directly. With ``pad`` the stream starts and ends with a pause. Without a
    schedule, ``n_instances`` random classes are separated by pauses.
    """
    rng = np.random.default_rng(spec.seed)
    sigs = spec.resolved_signatures()
    schedule = list(spec.schedule) if spec.schedule is not None else _random_schedule(spec, rng)
    if spec.pad:
        schedule = [PAUSE] + schedule + [PAUSE]
    if not schedule:
        schedule = [PAUSE]

    base = neutral_skeleton()
    chunks: list[np.ndarray] = []
    annotations: list[Annotation] = []
    t = 0
    for item in schedule:
        if item == PAUSE:
            n = int(rng.integers(spec.pause_length[0], spec.pause_length[1] + 1))
            chunks.append(np.repeat(base[None], n, axis=0))
        else:
            c = int(item)
            if not 0 <= c < len(sigs):
                raise ValueError(f"schedule names class {c}, only {len(sigs)} defined")
            n = int(rng.integers(spec.instance_length[0], spec.instance_length[1] + 1))
            sig = sigs[c]
            u = (np.arange(n) + 0.5) / n
            scale = 1.0 + rng.uniform(-spec.amplitude_jitter, spec.amplitude_jitter)
            frames = np.repeat(base[None], n, axis=0)
            style = None
            if spec.style_jitter > 0:
                style = (
                    rng.normal(scale=spec.style_jitter, size=3),
                    rng.normal(scale=spec.style_jitter, size=3),
                )
            frames[:, list(sig.joints)] += scale * sig.displacement(u, style)
            chunks.append(frames)
            annotations.append(Annotation(c, t, t + n - 1, t + n // 2))
        t += n

    pos = np.concatenate(chunks, axis=0)
    if spec.sway > 0:
        # slow whole-body sway so the idle pose is not perfectly static
        k = np.arange(pos.shape[0])
        ph = rng.uniform(0, 2 * np.pi, size=2)
        sway = np.stack(
            [np.sin(2 * np.pi * k / 90.0 + ph[0]), np.zeros_like(k, float), np.sin(2 * np.pi * k / 130.0 + ph[1])],
            axis=1,
        )
        pos = pos + spec.sway * sway[:, None, :]
    if spec.noise > 0:
        pos = pos + rng.normal(scale=spec.noise, size=pos.shape)
    return SkeletonSequence.from_array(pos, spec.fps), annotations


def generate_corpus(
    n_sequences: int, spec: SyntheticSpec, seed: Optional[int] = None
) -> list[tuple[SkeletonSequence, list[Annotation]]]:
    """Several independent streams; stream ``i`` uses seed ``seed * 1000 + i``."""
    base = spec.seed if seed is None else seed
    out = []
    for i in range(n_sequences):
        out.append(generate_synthetic(replace(spec, seed=base * 1000 + i)))
    return out


def generate_instances(
    n_per_class: int, spec: SyntheticSpec, seed: Optional[int] = None
) -> list[tuple[SkeletonSequence, int]]:
    """Pre-segmented single-instance clips for recognition experiments."""
    base = spec.seed if seed is None else seed
    out = []
    for c in range(spec.n_classes):
        for i in range(n_per_class):
            s = replace(spec, seed=base * 100_000 + c * 1000 + i, schedule=(c,), pad=False)
            seq, _ = generate_synthetic(s)
            out.append((seq, c))
    return out
