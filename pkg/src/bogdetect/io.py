"""Text formats for sequences, annotations, topologies and detections.

Skeleton text: one frame per line, ``frame_index x1 y1 z1 ... xJ yJ zJ``.
Annotation CSV: ``class_id,start_frame,end_frame,action_point`` (action point
may be empty). Detection CSV: ``class_id,start_frame,end_frame,trigger_frame,score``.
Floats are written with ``repr`` so every file round-trips exactly.
"""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional, Sequence

import numpy as np
import yaml

from .skeleton import (
    KINECT_JOINTS,
    Annotation,
    DetectionEvent,
    SkeletonFrame,
    SkeletonSequence,
    SkeletonTopology,
)

PathLike = str | Path

# Native joint order of the MSR-Action3D skeleton files, mapped to topology names.
MSR_ACTION3D_ORDER: tuple[str, ...] = (
    "shoulder_right",
    "shoulder_left",
    "shoulder_center",
    "spine",
    "hip_right",
    "hip_left",
    "hip_center",
    "elbow_right",
    "elbow_left",
    "wrist_right",
    "wrist_left",
    "hand_right",
    "hand_left",
    "knee_right",
    "knee_left",
    "ankle_right",
    "ankle_left",
    "foot_right",
    "foot_left",
    "head",
)


class DataError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: Optional[PathLike] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


def format_frame(index: int, joints: np.ndarray) -> str:
    return " ".join([str(index)] + [repr(float(v)) for v in np.asarray(joints).ravel()])


def parse_frame_line(line: str, joint_count: int, lineno: Optional[int] = None, path=None):
    parts = line.split()
    expected = 1 + 3 * joint_count
    if len(parts) != expected:
        raise DataError(
            f"expected frame index plus {3 * joint_count} coordinates, got {len(parts)} fields",
            path,
            lineno,
        )
    try:
        idx = int(parts[0])
        vals = np.array([float(v) for v in parts[1:]], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"unparseable value ({exc})", path, lineno) from None
    return idx, vals.reshape(joint_count, 3)


def write_sequence(seq: SkeletonSequence, path_or_file: PathLike | IO[str]) -> None:
    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, "w") as fh:
            write_sequence(seq, fh)
        return
    for f in seq.frames:
        path_or_file.write(format_frame(f.index, f.joints) + "\n")


def iter_frames(
    fh: IO[str], joint_count: int = 20, path: Optional[PathLike] = None
) -> Iterator[SkeletonFrame]:
    """Frames from an open skeleton-text stream, skipping blank and ``#`` lines."""
    for lineno, line in enumerate(fh, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        idx, joints = parse_frame_line(s, joint_count, lineno, path)
        yield SkeletonFrame(idx, joints)


def read_skeleton_text(path: PathLike, joint_count: int = 20, fps: float = 30.0) -> SkeletonSequence:
    with open(path) as fh:
        frames = list(iter_frames(fh, joint_count, path))
    for pos, f in enumerate(frames):
        if f.index != pos:
            raise DataError(f"frame index {f.index} where {pos} was expected", path)
    return SkeletonSequence(tuple(frames), fps)


def _reorder(native: np.ndarray, order: Sequence[str], topo: SkeletonTopology) -> np.ndarray:
    try:
        perm = [list(order).index(name) for name in topo.joint_names]
    except ValueError as exc:
        raise DataError(f"native joint order lacks a topology joint ({exc})") from None
    return native[:, perm]


def read_msr_action3d(
    path: PathLike,
    topo: Optional[SkeletonTopology] = None,
    order: Sequence[str] = MSR_ACTION3D_ORDER,
    fps: float = 30.0,
) -> SkeletonSequence:
    """MSR-Action3D ``*_skeleton3D.txt``: ``J`` rows of ``x y z c`` per frame."""
    topo = topo or SkeletonTopology.kinect()
    j = len(order)
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataError(f"expected 4 fields (x y z confidence), got {len(parts)}", path, lineno)
            try:
                rows.append([float(v) for v in parts[:3]])
            except ValueError as exc:
                raise DataError(f"unparseable value ({exc})", path, lineno) from None
    if not rows or len(rows) % j:
        raise DataError(f"{len(rows)} joint rows is not a multiple of {j}", path)
    native = np.array(rows).reshape(-1, j, 3)
    return SkeletonSequence.from_array(_reorder(native, order, topo), fps)


def read_msrc12(path: PathLike, topo: Optional[SkeletonTopology] = None, fps: float = 30.0):
    """MSRC-12 ``.csv``: a timestamp followed by ``x y z w`` for 20 joints in Kinect order."""
    topo = topo or SkeletonTopology.kinect()
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.replace(",", " ").split()
            if not parts:
                continue
            if len(parts) != 81:
                raise DataError(f"expected 81 fields, got {len(parts)}", path, lineno)
            try:
                vals = np.array([float(v) for v in parts[1:]]).reshape(20, 4)[:, :3]
            except ValueError as exc:
                raise DataError(f"unparseable value ({exc})", path, lineno) from None
            rows.append(vals)
    if not rows:
        raise DataError("no frames", path)
    return SkeletonSequence.from_array(_reorder(np.stack(rows), KINECT_JOINTS, topo), fps)


def load_sequence(
    path: PathLike,
    format: str = "skeleton_text",
    topo: Optional[SkeletonTopology] = None,
    fps: float = 30.0,
) -> SkeletonSequence:
    topo = topo or SkeletonTopology.kinect()
    if format == "skeleton_text":
        return read_skeleton_text(path, topo.joint_count, fps)
    if format in ("msr_action3d", "dataset_native"):
        return read_msr_action3d(path, topo, fps=fps)
    if format == "msrc12":
        return read_msrc12(path, topo, fps)
    raise ValueError(f"unknown sequence format {format!r}")


def write_annotations(annotations: Iterable[Annotation], path: PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class_id", "start_frame", "end_frame", "action_point"])
        for a in annotations:
            w.writerow(
                [a.class_id, a.start_frame, a.end_frame, "" if a.action_point is None else a.action_point]
            )


def read_annotations(path: PathLike, one_based: bool = False) -> list[Annotation]:
    """Read an annotation CSV; ``one_based`` shifts 1-based frame numbers to 0-based."""
    shift = 1 if one_based else 0
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip() == "class_id":
                continue
            if len(row) not in (3, 4):
                raise DataError(f"expected 3 or 4 columns, got {len(row)}", path, lineno)
            try:
                cid, s, e = int(row[0]), int(row[1]) - shift, int(row[2]) - shift
                ap = row[3].strip() if len(row) == 4 else ""
                out.append(Annotation(cid, s, e, int(ap) - shift if ap else None))
            except ValueError as exc:
                raise DataError(str(exc), path, lineno) from None
    return out


DETECTION_HEADER = ["class_id", "start_frame", "end_frame", "trigger_frame", "score"]


def detection_row(ev: DetectionEvent) -> str:
    return f"{ev.class_id},{ev.start_frame},{ev.end_frame},{ev.trigger_frame},{ev.score!r}"


def write_detections(events: Iterable[DetectionEvent], path_or_file: PathLike | IO[str]) -> None:
    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, "w") as fh:
            write_detections(events, fh)
        return
    path_or_file.write(",".join(DETECTION_HEADER) + "\n")
    for ev in events:
        path_or_file.write(detection_row(ev) + "\n")


def read_detections(path: PathLike) -> list[DetectionEvent]:
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0] == "class_id":
                continue
            try:
                cid, s, e, trig = (int(v) for v in row[:4])
                out.append(DetectionEvent(cid, s, e, float(row[4]), trig))
            except (ValueError, IndexError) as exc:
                raise DataError(str(exc), path, lineno) from None
    return out


def topology_to_dict(topo: SkeletonTopology) -> dict:
    names = topo.joint_names
    return {
        "joints": list(names),
        "reference_joint": names[topo.reference_joint],
        "angle_triplets": [[names[a], names[v], names[b]] for a, v, b in topo.angle_triplets],
    }


def save_topology(topo: SkeletonTopology, path: PathLike) -> None:
    text = (
        "# Skeleton topology.\n"
        "# joints: joint names in file column order\n"
        "# reference_joint: poses are expressed relative to this joint\n"
        "# angle_triplets: [a, vertex, b]; the angle is measured at the vertex\n"
    )
    text += yaml.safe_dump(topology_to_dict(topo), sort_keys=False, default_flow_style=None)
    Path(path).write_text(text)


def load_topology(path: PathLike) -> SkeletonTopology:
    data = yaml.safe_load(Path(path).read_text())
    try:
        return SkeletonTopology.from_names(
            data["joints"], data["reference_joint"], data["angle_triplets"]
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"invalid topology file ({exc})", path) from None


def write_descriptors(D: np.ndarray, path: PathLike) -> None:
    """Debug dump: ``frame_index v1 ... vD`` per line."""
    with open(path, "w") as fh:
        for i, row in enumerate(D):
            fh.write(" ".join([str(i)] + [repr(float(v)) for v in row]) + "\n")


def read_descriptors(path: PathLike) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if int(parts[0]) != len(rows):
                raise DataError(f"descriptor row {parts[0]} out of order", path, lineno)
            rows.append([float(v) for v in parts[1:]])
    return np.array(rows, dtype=np.float64)


def sequence_to_text(seq: SkeletonSequence) -> str:
    buf = _io.StringIO()
    write_sequence(seq, buf)
    return buf.getvalue()
