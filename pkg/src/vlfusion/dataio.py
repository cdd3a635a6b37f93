"""Pipeline inputs: detections, LiDAR scans and ground-truth poses.

File formats (all little-endian / UTF-8; see ``docs/formats.md``):

detections (text)
    ``t class_id confidence x1 y1 x2 y2 source`` per line; tracked output adds
    a trailing ``track_id``. Blank lines and ``#`` comments are ignored.
scans (binary)
    repeated ``<f8 scan_t, <u4 count`` headers, each followed by ``count``
    records of ``<f4 x, <f4 y, <f4 z, <f8 t``.
poses (text)
    ``t subject tx ty tz qw qx qy qz`` per line.
"""

from __future__ import annotations

import bisect
import math
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .geometry import (
    HELMET_1,
    HELMET_2,
    SENSOR_MARKERS,
    WORLD,
    RigidTransform,
    quat_normalize,
    slerp,
)

# MS-COCO indices emitted by the detectors
CLASS_NAMES = {0: "person", 1: "bicycle", 2: "car", 3: "motorcycle", 5: "bus", 7: "truck"}
PEDESTRIAN = 0
VEHICLE = 2


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class OrderingError(DataError):
    pass


class Source(str, Enum):
    RGB = "rgb"
    EVENT = "event"


class Subject(str, Enum):
    SENSOR_RIG = "sensor_rig"
    HELMET_1 = "helmet_1"
    HELMET_2 = "helmet_2"

    @property
    def frame(self) -> str:
        return {"sensor_rig": SENSOR_MARKERS, "helmet_1": HELMET_1, "helmet_2": HELMET_2}[self.value]


def fmt_float(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


# --------------------------------------------------------------------------
# detections


class Detection2D(NamedTuple):
    t: float
    bbox: tuple  # (x1, y1, x2, y2) pixels
    class_id: int
    confidence: float
    source: Source = Source.RGB
    track_id: int | None = None

    @property
    def area(self) -> float:
        x1, y1, x2, y2 = self.bbox
        return (x2 - x1) * (y2 - y1)


def make_detection(t, bbox, class_id, confidence, source=Source.RGB, track_id=None) -> Detection2D:
    """Validated constructor; raises ``ValueError`` on invariant violations."""
    x1, y1, x2, y2 = (float(c) for c in bbox)
    if not all(math.isfinite(c) for c in (x1, y1, x2, y2)):
        raise ValueError("bbox coordinates must be finite")
    if not (x1 < x2 and y1 < y2):
        raise ValueError(f"bbox ({x1}, {y1}, {x2}, {y2}) has non-positive area")
    confidence = float(confidence)
    if not 0.0 <= confidence <= 1.0:
        raise ValueError(f"confidence {confidence} outside [0, 1]")
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("timestamp must be finite")
    return Detection2D(t, (x1, y1, x2, y2), int(class_id), confidence, Source(source), track_id)


def format_detection(d: Detection2D) -> str:
    fields = [fmt_float(d.t), str(d.class_id), fmt_float(d.confidence), *(fmt_float(c) for c in d.bbox), d.source.value]
    if d.track_id is not None:
        fields.append(str(d.track_id))
    return " ".join(fields)


def parse_detections(lines: Iterable[str], path="<detections>") -> list[Detection2D]:
    out = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (8, 9):
            raise ParseError(path, line_no, f"expected 8 or 9 fields, got {len(parts)}")
        try:
            t = float(parts[0])
            class_id = int(parts[1])
            conf = float(parts[2])
            bbox = [float(c) for c in parts[3:7]]
            source = Source(parts[7])
            track_id = int(parts[8]) if len(parts) == 9 else None
            det = make_detection(t, bbox, class_id, conf, source, track_id)
        except ValueError as exc:
            raise ParseError(path, line_no, str(exc)) from None
        out.append(det)
    # stable sort keeps file order for equal timestamps
    return sorted(out, key=lambda d: d.t)


def load_detections(path) -> list[Detection2D]:
    with open(path, encoding="utf-8") as fh:
        return parse_detections(fh, path)


def write_detections(path, detections: Iterable[Detection2D], header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for h in header:
            fh.write(f"# {h}\n")
        for d in detections:
            fh.write(format_detection(d) + "\n")


def group_frames(detections: Sequence[Detection2D]) -> list[tuple[float, list[Detection2D]]]:
    """Group a time-sorted detection stream into ``(t, dets)`` frames."""
    frames: list[tuple[float, list[Detection2D]]] = []
    for d in detections:
        if frames and frames[-1][0] == d.t:
            frames[-1][1].append(d)
        else:
            if frames and d.t < frames[-1][0]:
                raise OrderingError("detections are not time-ordered")
            frames.append((d.t, [d]))
    return frames


def fill_frame_gaps(frames, frame_period: float | None):
    """Insert empty frames where consecutive timestamps skip whole periods.

    Detection files only contain frames with at least one detection; the
    trackers still need to see the empty frames in between to age tracks.
    """
    if not frame_period or not frames:
        return list(frames)
    out = [frames[0]]
    for t, dets in frames[1:]:
        prev = out[-1][0]
        n_missing = int(round((t - prev) / frame_period)) - 1
        for k in range(1, n_missing + 1):
            out.append((prev + k * frame_period, []))
        out.append((t, dets))
    return out


# --------------------------------------------------------------------------
# LiDAR scans

_SCAN_HEADER = struct.Struct("<dI")
SCAN_POINT_DTYPE = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("t", "<f8")])


@dataclass(frozen=True)
class LidarScan:
    scan_t: float
    points: np.ndarray  # structured SCAN_POINT_DTYPE

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.dtype != SCAN_POINT_DTYPE:
            pts = np.asarray(pts, dtype=SCAN_POINT_DTYPE)
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_arrays(cls, scan_t, xyz, t) -> "LidarScan":
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        pts = np.empty(xyz.shape[0], dtype=SCAN_POINT_DTYPE)
        pts["x"], pts["y"], pts["z"] = xyz[:, 0], xyz[:, 1], xyz[:, 2]
        pts["t"] = t
        return cls(float(scan_t), pts)

    @property
    def xyz(self) -> np.ndarray:
        return np.stack([self.points["x"], self.points["y"], self.points["z"]], axis=1).astype(np.float64)

    def __len__(self):
        return self.points.shape[0]


def _check_scan(scan: LidarScan, index: int, path):
    pts = scan.points
    if not math.isfinite(scan.scan_t):
        raise DataError(f"{path}: scan {index} has a non-finite timestamp")
    if pts.size:
        if not (np.all(np.isfinite(pts["x"])) and np.all(np.isfinite(pts["y"])) and np.all(np.isfinite(pts["z"]))):
            raise DataError(f"{path}: scan {index} has non-finite coordinates")
        if np.any(np.diff(pts["t"]) < 0):
            raise OrderingError(f"{path}: scan {index} point timestamps decrease")


def load_scans(path) -> list[LidarScan]:
    with open(path, "rb") as fh:
        data = fh.read()
    scans = []
    offset = 0
    while offset < len(data):
        if offset + _SCAN_HEADER.size > len(data):
            raise DataError(f"{path}: truncated scan header at byte {offset}")
        scan_t, count = _SCAN_HEADER.unpack_from(data, offset)
        offset += _SCAN_HEADER.size
        nbytes = count * SCAN_POINT_DTYPE.itemsize
        if offset + nbytes > len(data):
            raise DataError(f"{path}: truncated scan {len(scans)} ({count} points announced)")
        pts = np.frombuffer(data, dtype=SCAN_POINT_DTYPE, count=count, offset=offset)
        offset += nbytes
        scan = LidarScan(scan_t, pts)
        _check_scan(scan, len(scans), path)
        if scans and scan.scan_t < scans[-1].scan_t:
            raise OrderingError(f"{path}: scan {len(scans)} is earlier than its predecessor")
        scans.append(scan)
    return scans


def write_scans(path, scans: Iterable[LidarScan]) -> None:
    with open(path, "wb") as fh:
        for scan in scans:
            fh.write(_SCAN_HEADER.pack(float(scan.scan_t), len(scan)))
            fh.write(np.ascontiguousarray(scan.points, dtype=SCAN_POINT_DTYPE).tobytes())


# --------------------------------------------------------------------------
# ground-truth poses


class GroundTruthPose(NamedTuple):
    t: float
    subject: Subject
    pose: RigidTransform  # T_W^{M_subject}


def format_pose(p: GroundTruthPose) -> str:
    tr = p.pose.translation
    q = p.pose.rotation
    return " ".join(
        [fmt_float(p.t), p.subject.value, *(fmt_float(c) for c in tr), *(f"{c:.12f}" for c in q)]
    )


def parse_poses(lines: Iterable[str], path="<poses>") -> list[GroundTruthPose]:
    out = []
    last: dict[Subject, float] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 9:
            raise ParseError(path, line_no, f"expected 9 fields, got {len(parts)}")
        try:
            t = float(parts[0])
            subject = Subject(parts[1])
            vals = [float(c) for c in parts[2:]]
            pose = RigidTransform(vals[3:], vals[:3], WORLD, subject.frame)
        except ValueError as exc:
            raise ParseError(path, line_no, str(exc)) from None
        if subject in last and t <= last[subject]:
            raise ParseError(path, line_no, f"timestamps for {subject.value} must strictly increase")
        last[subject] = t
        out.append(GroundTruthPose(t, subject, pose))
    return out


def load_poses(path) -> list[GroundTruthPose]:
    with open(path, encoding="utf-8") as fh:
        return parse_poses(fh, path)


def write_poses(path, poses: Iterable[GroundTruthPose]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in poses:
            fh.write(format_pose(p) + "\n")


class PoseTrack:
    """Time-indexed poses of one subject, for repeated interpolation."""

    def __init__(self, poses: Sequence[GroundTruthPose], subject):
        subject = Subject(subject)
        self.subject = subject
        self.samples = [p for p in poses if p.subject == subject]
        self.times = [p.t for p in self.samples]

    def __bool__(self):
        return bool(self.samples)

    def at(self, t: float, slack: float = 0.010) -> RigidTransform:
        if not self.samples:
            raise DataError(f"no poses recorded for {self.subject.value}")
        t0, t1 = self.times[0], self.times[-1]
        if t < t0 - slack or t > t1 + slack:
            raise DataError(f"t={t} outside the {self.subject.value} span [{t0}, {t1}]")
        if t <= t0:
            return self.samples[0].pose
        if t >= t1:
            return self.samples[-1].pose
        i = bisect.bisect_right(self.times, t) - 1
        a, b = self.samples[i], self.samples[i + 1]
        if t == a.t:
            return a.pose
        alpha = (t - a.t) / (b.t - a.t)
        q = quat_normalize(slerp(a.pose.rotation, b.pose.rotation, alpha))
        tr = (1.0 - alpha) * a.pose.translation + alpha * b.pose.translation
        return RigidTransform(q, tr, a.pose.parent_frame, a.pose.child_frame)


def interpolate_pose(stream: Sequence[GroundTruthPose], subject, t: float) -> RigidTransform:
    """Pose of ``subject`` at ``t``: lerp on translation, slerp on rotation.

    Times up to 10 ms outside the recorded span clamp to the nearest end;
    anything further raises :class:`DataError`.
    """
    return PoseTrack(stream, subject).at(t)
