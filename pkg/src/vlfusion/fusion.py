"""Pick the LiDAR points that belong to a tracked box and reduce them to one point.

Steps per tracked box:

1. project the scan into the image with T_C^L and the intrinsics and keep
   points in front of the camera that land strictly inside the box;
2. keep only the points inside a square centred on the box, whose area is a
   fraction ``k`` of the box area. ``k`` shrinks linearly as the box grows
   relative to the image, from ``k_max`` (tiny box) to ``k_min`` (full frame);
3. take the component-wise median of what is left.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .dataio import LidarScan
from .geometry import CalibrationSet, project_points, transform_point


class TooFewPointsError(ValueError):
    """Not enough points to produce a representative point this frame."""


@dataclass(frozen=True)
class FusionParams:
    k_min: float = 0.25
    k_max: float = 1.0
    min_points: int = 3
    scan_time_tolerance: float = 0.063  # half the 7.9 Hz scan period
    apply_distortion: bool = True

    def __post_init__(self):
        if not (0.0 < self.k_min <= self.k_max <= 1.0):
            raise ValueError("need 0 < k_min <= k_max <= 1")
        if self.min_points < 1:
            raise ValueError("min_points must be >= 1")
        if self.scan_time_tolerance < 0:
            raise ValueError("scan_time_tolerance must be non-negative")


class BoxPoints(NamedTuple):
    points: np.ndarray  # (N, 3) camera frame
    pixels: np.ndarray  # (N, 2)
    index: np.ndarray  # indices into the scan


def project_scan(scan: LidarScan, calib: CalibrationSet, apply_distortion: bool = True):
    """Camera-frame points of ``scan`` and their pixels; returns ``(pts, uv, valid)``."""
    pts = transform_point(calib.T_C_L, scan.xyz) if len(scan) else np.zeros((0, 3))
    uv, valid = project_points(calib.intrinsics, pts, apply_distortion)
    return pts, uv, valid


def points_in_bbox(scan: LidarScan, calib: CalibrationSet, bbox, apply_distortion: bool = True,
                   projected=None) -> BoxPoints:
    """Scan points whose projection lies strictly inside ``bbox``.

    ``projected`` may carry a cached :func:`project_scan` result for ``scan``.
    """
    pts, uv, valid = projected if projected is not None else project_scan(scan, calib, apply_distortion)
    x1, y1, x2, y2 = bbox
    with np.errstate(invalid="ignore"):
        inside = valid & (uv[:, 0] > x1) & (uv[:, 0] < x2) & (uv[:, 1] > y1) & (uv[:, 1] < y2)
    idx = np.flatnonzero(inside)
    return BoxPoints(pts[idx], uv[idx], idx)


def square_ratio(bbox, image_size, params: FusionParams) -> float:
    """Fraction ``k`` of the box area covered by the central square."""
    x1, y1, x2, y2 = bbox
    width, height = image_size
    rho = (x2 - x1) * (y2 - y1) / float(width * height)
    k = params.k_min + (params.k_max - params.k_min) * (1.0 - rho)
    return min(max(k, params.k_min), params.k_max)


def central_square(bbox, image_size, params: FusionParams) -> tuple:
    """The central square ``(x1, y1, x2, y2)``, clipped to the box."""
    x1, y1, x2, y2 = bbox
    k = square_ratio(bbox, image_size, params)
    half = 0.5 * math.sqrt(k * (x2 - x1) * (y2 - y1))
    cu, cv = 0.5 * (x1 + x2), 0.5 * (y1 + y2)
    return (max(cu - half, x1), max(cv - half, y1), min(cu + half, x2), min(cv + half, y2))


def central_square_filter(box_points: BoxPoints, bbox, image_size, params: FusionParams) -> BoxPoints:
    sx1, sy1, sx2, sy2 = central_square(bbox, image_size, params)
    uv = box_points.pixels
    keep = (uv[:, 0] >= sx1) & (uv[:, 0] <= sx2) & (uv[:, 1] >= sy1) & (uv[:, 1] <= sy2)
    return BoxPoints(box_points.points[keep], uv[keep], box_points.index[keep])


def median_point(points, min_points: int = 1) -> np.ndarray:
    """Component-wise median; the lower median for even counts."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = pts.shape[0]
    if n < max(min_points, 1):
        raise TooFewPointsError(f"{n} point(s), need at least {max(min_points, 1)}")
    return np.sort(pts, axis=0)[(n - 1) // 2]


def select_scan(scans: Sequence[LidarScan], t: float, tolerance: float,
                times: Sequence[float] | None = None) -> LidarScan | None:
    """Scan nearest in time to ``t`` within ``tolerance``; earlier scan on ties."""
    if not scans:
        return None
    times = [s.scan_t for s in scans] if times is None else times
    i = bisect.bisect_left(times, t)
    best = None
    for j in (i - 1, i):
        if 0 <= j < len(scans):
            d = abs(times[j] - t)
            if best is None or d < best[0]:
                best = (d, j)
    if best is None or best[0] > tolerance:
        return None
    return scans[best[1]]


def fuse_box(scan: LidarScan, calib: CalibrationSet, bbox, params: FusionParams,
             projected=None) -> np.ndarray | None:
    """Representative camera-frame point for ``bbox``, or None if too few points."""
    k = calib.intrinsics
    inside = points_in_bbox(scan, calib, bbox, params.apply_distortion, projected)
    square = central_square_filter(inside, bbox, (k.width, k.height), params)
    try:
        return median_point(square.points, params.min_points)
    except TooFewPointsError:
        return None
