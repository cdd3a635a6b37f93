"""SORT: constant-velocity Kalman filtering of boxes with Hungarian/IoU association.

State per track is ``[u, v, s, r, du, dv, ds]``: box centre, area and aspect
ratio (width / height) plus per-frame rates of the first three. The aspect
ratio has no rate.

Track lifecycle (one ``Sort.step`` per camera frame):

* a new track counts its birth detection as its first association;
* a matched track is emitted once ``hits >= min_hits``;
* an unmatched track coasts: its prediction is emitted when
  ``hits >= min_assoc_for_prediction``, for at most
  ``max_unmatched_predictions`` consecutive frames, after which it is removed;
* any track unmatched for more than ``max_age`` frames is removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .assignment import linear_assignment
from .dataio import Detection2D, Source


class DegenerateBoxError(ValueError):
    pass


class FrameOrderError(ValueError):
    pass


@dataclass(frozen=True)
class SortParams:
    max_age: int = 10
    max_unmatched_predictions: int = 5
    min_hits: int = 3
    min_assoc_for_prediction: int = 10
    iou_threshold: float = 0.3
    # Kalman noise; the usual SORT configuration
    observation_noise: tuple = (1.0, 1.0, 10.0, 0.01)
    process_noise: tuple = (1.0, 1.0, 1.0, 0.0001, 0.01, 0.01, 0.0001)
    initial_position_var: float = 10.0
    initial_velocity_factor: float = 1000.0

    def __post_init__(self):
        for name in ("max_age", "max_unmatched_predictions", "min_hits", "min_assoc_for_prediction"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in [0, 1]")

    @classmethod
    def rgb(cls, **kw) -> "SortParams":
        return cls(**{**dict(max_age=10, max_unmatched_predictions=5, min_hits=3,
                             min_assoc_for_prediction=10, iou_threshold=0.3), **kw})

    @classmethod
    def event(cls, **kw) -> "SortParams":
        return cls(**{**dict(max_age=10, max_unmatched_predictions=3, min_hits=1,
                             min_assoc_for_prediction=1, iou_threshold=0.3), **kw})

    @classmethod
    def for_source(cls, source, **kw) -> "SortParams":
        return cls.event(**kw) if Source(source) is Source.EVENT else cls.rgb(**kw)


def bbox_to_obs(b) -> np.ndarray:
    x1, y1, x2, y2 = (float(c) for c in b)
    w, h = x2 - x1, y2 - y1
    if not (w > 0 and h > 0):
        raise DegenerateBoxError(f"box ({x1}, {y1}, {x2}, {y2}) has non-positive size")
    return np.array([x1 + w / 2.0, y1 + h / 2.0, w * h, w / h])


def obs_to_bbox(z) -> tuple:
    u, v, s, r = (float(c) for c in z[:4])
    if not (s > 0 and r > 0):
        raise DegenerateBoxError(f"area {s} and aspect ratio {r} must be positive")
    w = math.sqrt(s * r)
    h = s / w
    return (u - w / 2.0, v - h / 2.0, u + w / 2.0, v + h / 2.0)


def iou(a, b) -> float:
    return float(kernels.iou_matrix([a], [b])[0, 0])


# constant-velocity model, dt = 1 frame
_F = np.eye(7)
_F[0, 4] = _F[1, 5] = _F[2, 6] = 1.0
_H = np.zeros((4, 7))
_H[0, 0] = _H[1, 1] = _H[2, 2] = _H[3, 3] = 1.0


@dataclass
class Track2D:
    id: int
    mean: np.ndarray
    cov: np.ndarray
    class_id: int
    confidence: float
    source: Source = Source.RGB
    hits: int = 1
    hit_streak: int = 1
    age: int = 0
    time_since_update: int = 0
    coasted: int = 0  # consecutive emitted predictions

    @property
    def bbox(self) -> tuple:
        return obs_to_bbox(self.mean[:4])


def new_track(track_id: int, det: Detection2D, params: SortParams) -> Track2D:
    mean = np.zeros(7)
    mean[:4] = bbox_to_obs(det.bbox)
    var = params.initial_position_var
    cov = np.diag([var] * 4 + [var * params.initial_velocity_factor] * 3)
    return Track2D(track_id, mean, cov, det.class_id, det.confidence, det.source)


def predict(track: Track2D, params: SortParams) -> tuple:
    """Propagate ``track`` one frame in place; returns the predicted bbox."""
    if track.mean[2] + track.mean[6] <= 0:
        track.mean[6] = 0.0  # keeps the area at its previous value
    track.mean = _F @ track.mean
    track.cov = _F @ track.cov @ _F.T + np.diag(params.process_noise)
    track.cov = 0.5 * (track.cov + track.cov.T)
    track.age += 1
    if track.time_since_update > 0:
        track.hit_streak = 0
    track.time_since_update += 1
    return track.bbox


def update(track: Track2D, det: Detection2D, params: SortParams) -> None:
    """Kalman update of ``track`` with the box of ``det``, in place."""
    z = bbox_to_obs(det.bbox)
    R = np.diag(params.observation_noise)
    P = track.cov
    S = _H @ P @ _H.T + R
    K = np.linalg.solve(S, _H @ P).T  # P H^T S^-1, S symmetric
    track.mean = track.mean + K @ (z - _H @ track.mean)
    # Joseph form keeps the covariance symmetric PSD
    I_KH = np.eye(7) - K @ _H
    track.cov = I_KH @ P @ I_KH.T + K @ R @ K.T
    track.cov = 0.5 * (track.cov + track.cov.T)
    if track.mean[2] <= 0 or track.mean[3] <= 0:
        track.mean[2:4] = z[2:4]
    track.hits += 1
    track.hit_streak += 1
    track.time_since_update = 0
    track.coasted = 0
    track.confidence = det.confidence


def associate(pred_boxes: Sequence, dets: Sequence[Detection2D], iou_threshold: float,
              track_classes: Sequence[int] | None = None):
    """Match predicted track boxes to detections.

    Maximizes total IoU with the Hungarian method; class mismatches score 0.
    Matches below ``iou_threshold`` are returned as unmatched.

    Returns ``(matches, unmatched_tracks, unmatched_dets)`` with ``matches`` a
    list of ``(track_index, det_index)``.
    """
    n, m = len(pred_boxes), len(dets)
    if n == 0 or m == 0:
        return [], list(range(n)), list(range(m))
    scores = kernels.iou_matrix(np.asarray(pred_boxes, dtype=np.float64),
                                np.asarray([d.bbox for d in dets], dtype=np.float64))
    if track_classes is not None:
        same = np.asarray(track_classes)[:, None] == np.asarray([d.class_id for d in dets])[None, :]
        scores = np.where(same, scores, 0.0)
    return gate_assignment(scores, iou_threshold)


def gate_assignment(scores, iou_threshold: float):
    scores = np.asarray(scores, dtype=np.float64)
    n, m = scores.shape
    matches = [(i, j) for i, j in linear_assignment(scores, maximize=True)
               if scores[i, j] >= iou_threshold]
    matched_t = {i for i, _ in matches}
    matched_d = {j for _, j in matches}
    return (
        matches,
        [i for i in range(n) if i not in matched_t],
        [j for j in range(m) if j not in matched_d],
    )


@dataclass
class Sort:
    """Single-owner SORT tracker. Call :meth:`step` once per frame, in time order."""

    params: SortParams = field(default_factory=SortParams)
    tracks: list = field(default_factory=list)
    next_id: int = 1
    frame_count: int = 0
    last_t: float | None = None
    deleted_ids: list = field(default_factory=list)

    def step(self, dets: Sequence[Detection2D], t: float | None = None) -> list[Detection2D]:
        """Advance one frame; returns the emitted boxes tagged with ``track_id``.

        Ids of tracks removed during this frame are left in ``deleted_ids``.
        """
        if t is None and dets:
            t = dets[0].t
        if t is not None:
            if self.last_t is not None and t < self.last_t:
                raise FrameOrderError(f"frame at t={t} precedes previous frame at t={self.last_t}")
            self.last_t = t
        self.frame_count += 1
        p = self.params
        self.deleted_ids = []

        preds = [predict(trk, p) for trk in self.tracks]
        matches, unmatched_trk, unmatched_det = associate(
            preds, dets, p.iou_threshold, [trk.class_id for trk in self.tracks]
        )
        out: list[tuple[int, Detection2D]] = []
        survivors = []
        matched = dict(matches)
        for i, trk in enumerate(self.tracks):
            if i in matched:
                update(trk, dets[matched[i]], p)
                survivors.append(trk)
                if trk.hits >= p.min_hits:
                    out.append((trk.id, self._emit(trk, t)))
                continue
            if trk.time_since_update > p.max_age:
                self.deleted_ids.append(trk.id)
                continue
            if trk.hits >= p.min_assoc_for_prediction:
                trk.coasted += 1
                if trk.coasted > p.max_unmatched_predictions:
                    self.deleted_ids.append(trk.id)
                    continue
                if trk.hits >= p.min_hits:
                    out.append((trk.id, self._emit(trk, t)))
            survivors.append(trk)
        for j in unmatched_det:
            trk = new_track(self.next_id, dets[j], p)
            self.next_id += 1
            survivors.append(trk)
            if trk.hits >= p.min_hits:
                out.append((trk.id, self._emit(trk, t)))
        self.tracks = survivors
        out.sort(key=lambda item: item[0])
        return [d for _, d in out]

    @staticmethod
    def _emit(trk: Track2D, t) -> Detection2D:
        return Detection2D(float(t) if t is not None else 0.0, tuple(float(c) for c in trk.bbox),
                           trk.class_id, float(trk.confidence), trk.source, trk.id)

    @property
    def live_ids(self) -> list[int]:
        return [trk.id for trk in self.tracks]


def run_sort(frames, params: SortParams | None = None) -> list[tuple[float, list[Detection2D], list[int]]]:
    """Run a fresh tracker over ``(t, dets)`` frames.

    Returns ``(t, emitted, deleted_ids)`` per frame.
    """
    tracker = Sort(params or SortParams())
    out = []
    for t, dets in frames:
        emitted = tracker.step(dets, t)
        out.append((t, emitted, list(tracker.deleted_ids)))
    return out
