"""Detector-vs-reference precision/recall sweeps and 3D position error metrics.

Per frame, candidates are matched one-to-one to reference boxes of the same
class. The matching maximizes the number of pairs at or above the IoU
threshold (total IoU breaks ties), so TP is the size of a maximum matching in
the "same class and IoU >= threshold" graph. That makes TP non-increasing both
in the IoU threshold and when low-confidence candidates are removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .assignment import linear_assignment
from .dataio import (
    DataError,
    Detection2D,
    GroundTruthPose,
    PoseTrack,
    Subject,
    fill_frame_gaps,
)
from .geometry import CalibrationSet, compose, invert
from .sort2d import Sort, SortParams

IOU_GRID = tuple(round(0.5 + 0.05 * i, 2) for i in range(9))  # 0.5 .. 0.9
CONF_GRID = tuple(round(0.3 + 0.05 * i, 2) for i in range(13))  # 0.3 .. 0.9
REFERENCE_MIN_CONFIDENCE = 0.5


@dataclass(frozen=True)
class PrCell:
    iou_threshold: float
    confidence_threshold: float
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0


def match_frame(reference: Sequence[Detection2D], candidate: Sequence[Detection2D],
                iou_threshold: float) -> tuple[int, int, int]:
    """``(tp, fp, fn)`` for one frame."""
    n_ref, n_cand = len(reference), len(candidate)
    if n_ref == 0 or n_cand == 0:
        return 0, n_cand, n_ref
    ious = kernels.iou_matrix([d.bbox for d in reference], [d.bbox for d in candidate])
    same = np.array([r.class_id for r in reference])[:, None] == np.array([c.class_id for c in candidate])[None, :]
    ok = same & (ious >= iou_threshold)
    if not ok.any():
        return 0, n_cand, n_ref
    score = np.where(ok, 1.0 + ious, 0.0)
    tp = sum(1 for i, j in linear_assignment(score, maximize=True) if ok[i, j])
    return tp, n_cand - tp, n_ref - tp


FramePair = tuple  # (t, reference dets, candidate dets)


def pair_frames(reference: Sequence[Detection2D], candidate: Sequence[Detection2D],
                frame_period: float | None = None, time_tol: float = 1e-6) -> list[FramePair]:
    """Align two detection streams into frames keyed by timestamp.

    Timestamps within ``time_tol`` are the same frame. With ``frame_period``,
    frames skipped by both streams are inserted empty.
    """
    events = sorted([(d.t, 0, d) for d in reference] + [(d.t, 1, d) for d in candidate],
                    key=lambda e: (e[0], e[1]))
    frames: list[list] = []
    for t, which, d in events:
        if not frames or t - frames[-1][0] > time_tol:
            frames.append([t, [], []])
        frames[-1][1 + which].append(d)
    out = [(f[0], f[1], f[2]) for f in frames]
    if frame_period:
        filled = fill_frame_gaps([(t, (r, c)) for t, r, c in out], frame_period)
        out = [(t, *(rc if rc else ([], []))) for t, rc in filled]
    return out


def _filter(dets, min_conf):
    return [d for d in dets if d.confidence >= min_conf - 1e-12]


def pr_sweep(frames: Sequence[FramePair], iou_grid: Sequence[float] = IOU_GRID,
             conf_grid: Sequence[float] = CONF_GRID,
             reference_min_confidence: float = REFERENCE_MIN_CONFIDENCE) -> list[PrCell]:
    """Precision/recall for every (confidence, IoU) cell, accumulated over frames."""
    cells = []
    refs = [_filter(r, reference_min_confidence) for _, r, _ in frames]
    for conf in conf_grid:
        cands = [_filter(c, conf) for _, _, c in frames]
        cells.extend(_sweep_iou(refs, cands, iou_grid, conf))
    return cells


def _sweep_iou(refs, cands, iou_grid, conf):
    out = []
    for thr in iou_grid:
        tp = fp = fn = 0
        for r, c in zip(refs, cands):
            a, b, e = match_frame(r, c, thr)
            tp += a
            fp += b
            fn += e
        out.append(PrCell(float(thr), float(conf), tp, fp, fn))
    return out


def track_stream(frames: Iterable[tuple[float, list[Detection2D]]], params: SortParams) -> list[list[Detection2D]]:
    """SORT output per frame for ``(t, dets)`` frames."""
    tracker = Sort(params)
    return [tracker.step(dets, t) for t, dets in frames]


def pair_sweep_with_tracking(frames: Sequence[FramePair], tracker_params: SortParams,
                             iou_grid: Sequence[float] = IOU_GRID,
                             conf_grid: Sequence[float] = CONF_GRID,
                             reference_min_confidence: float = REFERENCE_MIN_CONFIDENCE):
    """``(pure, tracked)`` cell tables.

    The tracked table runs SORT on the candidates that pass each confidence
    threshold and scores its emitted boxes instead of the raw detections.
    """
    pure = pr_sweep(frames, iou_grid, conf_grid, reference_min_confidence)
    refs = [_filter(r, reference_min_confidence) for _, r, _ in frames]
    tracked = []
    for conf in conf_grid:
        emitted = track_stream([(t, _filter(c, conf)) for t, _, c in frames], tracker_params)
        tracked.extend(_sweep_iou(refs, emitted, iou_grid, conf))
    return pure, tracked


def cell_lookup(cells: Iterable[PrCell]) -> dict:
    return {(round(c.confidence_threshold, 6), round(c.iou_threshold, 6)): c for c in cells}


# --------------------------------------------------------------------------
# 3D position errors


class AxisError(NamedTuple):
    mae: float
    rmse: float


@dataclass(frozen=True)
class ErrorReport:
    x: AxisError
    y: AxisError
    z: AxisError
    xz: AxisError
    n: int
    unassociated: int = 0

    def axis(self, name: str) -> AxisError:
        return getattr(self, name.lower())


def error_report(errors, unassociated: int = 0) -> ErrorReport:
    """Report from per-sample ``(dx, dy, dz)`` errors."""
    e = np.asarray(errors, dtype=np.float64).reshape(-1, 3)
    n = e.shape[0]
    if n == 0:
        nan = AxisError(math.nan, math.nan)
        return ErrorReport(nan, nan, nan, nan, 0, unassociated)

    def stats(v):
        v = np.abs(v)
        return AxisError(float(v.mean()), float(math.sqrt(float((v * v).mean()))))

    planar = np.hypot(e[:, 0], e[:, 2])
    return ErrorReport(stats(e[:, 0]), stats(e[:, 1]), stats(e[:, 2]), stats(planar), n, unassociated)


class Estimate(NamedTuple):
    t: float
    track_id: int
    position: np.ndarray
    class_id: int | None = None


PERSON_SUBJECTS = (Subject.HELMET_1, Subject.HELMET_2)


def ground_truth_in_camera(calib: CalibrationSet, rig: PoseTrack, person: PoseTrack, t: float) -> np.ndarray:
    """Helmet origin in the camera frame: T_C^{M_S} (T_W^{M_S})^-1 T_W^{M_i} applied to 0."""
    T = compose(compose(calib.T_C_MS, invert(rig.at(t))), person.at(t))
    return np.array(T.translation)


def position_errors(estimates: Sequence[Estimate], gt: Sequence[GroundTruthPose], calib: CalibrationSet,
                    rig_poses: Sequence[GroundTruthPose] | None = None,
                    subject_for_class: dict | None = None, gate: float = 2.0) -> ErrorReport:
    """MAE/RMSE of camera-frame positions against motion-capture ground truth.

    ``rig_poses`` defaults to the ``sensor_rig`` entries of ``gt``. An estimate
    whose ``class_id`` maps to a subject in ``subject_for_class`` is compared to
    that person; otherwise to the nearest person within ``gate`` metres.
    """
    rig = PoseTrack(rig_poses if rig_poses is not None else gt, Subject.SENSOR_RIG)
    if not rig:
        raise DataError("no sensor_rig poses")
    people = {s: PoseTrack(gt, s) for s in PERSON_SUBJECTS}
    people = {s: p for s, p in people.items() if p}
    if not people:
        raise DataError("no helmet poses")
    lo = max(min(p.times[0] for p in people.values()), rig.times[0]) - 0.010
    hi = min(max(p.times[-1] for p in people.values()), rig.times[-1]) + 0.010
    subject_for_class = {int(k): Subject(v) for k, v in (subject_for_class or {}).items()}

    errors = []
    unassociated = 0
    overlap = False
    for est in estimates:
        if not lo <= est.t <= hi:
            continue
        overlap = True
        truth = {}
        for s, track in people.items():
            try:
                truth[s] = ground_truth_in_camera(calib, rig, track, est.t)
            except DataError:
                pass
        pos = np.asarray(est.position, dtype=np.float64)
        subject = subject_for_class.get(est.class_id) if est.class_id is not None else None
        if subject is not None and subject in truth:
            ref = truth[subject]
        else:
            best = None
            for s, p in truth.items():
                d = float(np.linalg.norm(pos - p))
                if d <= gate and (best is None or d < best[0]):
                    best = (d, p)
            if best is None:
                unassociated += 1
                continue
            ref = best[1]
        errors.append(pos - ref)
    if estimates and not overlap:
        raise DataError("estimates do not overlap the ground-truth time span")
    return error_report(errors, unassociated)
