"""Detections -> SORT -> LiDAR fusion -> 3D Kalman tracks, plus the 3D track file format.

3D track file: ``t track_id class_id x y z vx vy vz`` per line (camera frame,
metres and m/s). A leading ``# tracks3d mode=<filtered|raw> source=<rgb|event>``
comment says how the positions were produced; raw lines carry zero velocity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import yaml

from .dataio import (
    Detection2D,
    LidarScan,
    ParseError,
    Source,
    fmt_float,
    fill_frame_gaps,
    group_frames,
)
from .evaluation import Estimate
from .fusion import FusionParams, fuse_box, project_scan, select_scan
from .geometry import CalibrationSet
from .sort2d import Sort, SortParams
from .track3d import Track3DParams, Tracker3D

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    detections: Path | None = None
    scans: Path | None = None
    calibration: Path | None = None
    poses: Path | None = None
    out: Path = Path("out")
    source: Source = Source.RGB
    raw_3d: bool = False
    frame_rate: float | None = None  # inserts empty frames between detection timestamps
    sort: dict = field(default_factory=dict)  # overrides of the per-source SortParams
    fusion: FusionParams = field(default_factory=FusionParams)
    track3d: Track3DParams = field(default_factory=Track3DParams)

    @property
    def sort_params(self) -> SortParams:
        return SortParams.for_source(self.source, **self.sort)

    def require_inputs(self, *names: str) -> None:
        for name in names:
            p = getattr(self, name)
            if p is None:
                raise ConfigError(f"missing required path: {name}")
            if not Path(p).is_file():
                raise ConfigError(f"{name} file not found: {p}")


def _section(doc, key, cls):
    sec = doc.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{key} must be a mapping")
    allowed = {f.name for f in fields(cls)}
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"unknown {key} option(s): {', '.join(sorted(unknown))}")
    return sec


def load_yaml(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return doc


def pipeline_config_from_dict(doc: dict, base_dir=".") -> PipelineConfig:
    """Build a config; relative paths resolve against ``base_dir``."""
    base = Path(base_dir)

    def path(key):
        v = doc.get(key)
        return None if v is None else (base / v if not Path(v).is_absolute() else Path(v))

    try:
        sort = _section(doc, "sort", SortParams)
        sort = {k: (tuple(v) if isinstance(v, list) else v) for k, v in sort.items()}
        cfg = PipelineConfig(
            detections=path("detections"),
            scans=path("scans"),
            calibration=path("calibration"),
            poses=path("poses"),
            out=path("out") or Path("out"),
            source=Source(doc.get("source", "rgb")),
            raw_3d=bool(doc.get("raw_3d", False)),
            frame_rate=float(doc["frame_rate"]) if doc.get("frame_rate") else None,
            sort=sort,
            fusion=FusionParams(**_section(doc, "fusion", FusionParams)),
            track3d=Track3DParams(**_section(doc, "track3d", Track3DParams)),
        )
        cfg.sort_params  # validate overrides early
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid pipeline config: {exc}") from None
    unknown = set(doc) - {f.name for f in fields(PipelineConfig)}
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return cfg


def with_overrides(cfg: PipelineConfig, **kw) -> PipelineConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


# --------------------------------------------------------------------------
# 3D track records


class Track3DRecord(NamedTuple):
    t: float
    track_id: int
    class_id: int
    position: tuple
    velocity: tuple


def format_track3d(r: Track3DRecord) -> str:
    return " ".join([fmt_float(r.t), str(r.track_id), str(r.class_id),
                     *(fmt_float(c) for c in r.position), *(fmt_float(c) for c in r.velocity)])


def write_tracks3d(path, records: Sequence[Track3DRecord], mode: str, source: Source,
                   header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# tracks3d mode={mode} source={Source(source).value}\n")
        for h in header:
            fh.write(f"# {h}\n")
        for r in records:
            fh.write(format_track3d(r) + "\n")


def load_tracks3d(path):
    """Returns ``(records, meta)`` where ``meta`` holds the header's key=value pairs."""
    records, meta = [], {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line[1:].split()[:1] == ["tracks3d"]:
                    meta.update(kv.split("=", 1) for kv in line[1:].split()[1:] if "=" in kv)
                continue
            parts = line.split()
            if len(parts) != 9:
                raise ParseError(path, line_no, f"expected 9 fields, got {len(parts)}")
            try:
                vals = [float(c) for c in parts]
                rec = Track3DRecord(vals[0], int(parts[1]), int(parts[2]), tuple(vals[3:6]), tuple(vals[6:9]))
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from None
            if not all(np.isfinite(vals)):
                raise ParseError(path, line_no, "non-finite value")
            records.append(rec)
    return records, meta


def records_to_estimates(records: Sequence[Track3DRecord]) -> list[Estimate]:
    return [Estimate(r.t, r.track_id, np.array(r.position), r.class_id) for r in records]


# --------------------------------------------------------------------------
# the pipeline


@dataclass
class PipelineResult:
    tracks2d: list  # Detection2D with track_id
    tracks3d: list  # Track3DRecord
    frames: int = 0
    fused: int = 0
    skipped: int = 0  # emitted boxes without a usable scan or enough points


def run_pipeline(detections: Sequence[Detection2D], scans: Sequence[LidarScan], calib: CalibrationSet,
                 sort_params: SortParams, fusion: FusionParams = FusionParams(),
                 track3d: Track3DParams = Track3DParams(), raw_3d: bool = False,
                 frame_rate: float | None = None) -> PipelineResult:
    frames = group_frames(detections)
    if frame_rate:
        frames = fill_frame_gaps(frames, 1.0 / frame_rate)
    times = [s.scan_t for s in scans]
    tracker = Sort(sort_params)
    filters = Tracker3D(track3d)
    projected: dict[int, tuple] = {}
    res = PipelineResult([], [])
    for t, dets in frames:
        emitted = tracker.step(dets, t)
        dead = list(tracker.deleted_ids)
        res.frames += 1
        res.tracks2d.extend(emitted)
        scan = select_scan(scans, t, fusion.scan_time_tolerance, times) if emitted else None
        fused = []
        if scan is not None:
            key = id(scan)
            if key not in projected:
                projected = {key: project_scan(scan, calib, fusion.apply_distortion)}
            for box in emitted:
                p = fuse_box(scan, calib, box.bbox, fusion, projected[key])
                if p is None:
                    res.skipped += 1
                    continue
                fused.append((box.track_id, p, t, box.class_id))
        else:
            res.skipped += len(emitted)
        res.fused += len(fused)
        if raw_3d:
            for track_id, p, ft, cls in fused:
                res.tracks3d.append(Track3DRecord(float(ft), track_id, cls, tuple(p), (0.0, 0.0, 0.0)))
        else:
            for e in filters.manage(fused, dead):
                res.tracks3d.append(Track3DRecord(e.t, e.track_id, e.class_id,
                                                  tuple(e.position), tuple(e.velocity)))
    log.info("%d frames, %d 2D boxes, %d fused, %d skipped",
             res.frames, len(res.tracks2d), res.fused, res.skipped)
    return res

