"""Event streams and their tensor representation for recurrent event detectors.

Events are held as numpy structured arrays (``EVENT_DTYPE``) rather than
per-event objects; a DAVIS346 emits up to a million of them per second.

Binary event file layout (little-endian)::

    header  : 4s magic b"EVT1", u32 version (=1), u32 width, u32 height
    records : u16 x, u16 y, f64 t, i8 p   (13 bytes, packed)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dataio import DataError

EVENT_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<f8"), ("p", "i1")])
_HEADER = struct.Struct("<4sIII")
MAGIC = b"EVT1"
VERSION = 1

DEFAULT_SLICES = 10
DEFAULT_WINDOW = 0.050  # s


def make_events(x, y, t, p) -> np.ndarray:
    ev = np.empty(len(t), dtype=EVENT_DTYPE)
    ev["x"], ev["y"], ev["t"], ev["p"] = x, y, t, p
    return ev


def load_events(path):
    """Read an event file; returns ``(events, width, height)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise DataError(f"{path}: missing event file header")
    magic, version, width, height = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise DataError(f"{path}: not a version-{VERSION} event file")
    body = len(data) - _HEADER.size
    if body % EVENT_DTYPE.itemsize:
        raise DataError(f"{path}: trailing partial event record")
    events = np.frombuffer(data, dtype=EVENT_DTYPE, offset=_HEADER.size).copy()
    if np.any((events["p"] != 1) & (events["p"] != -1)):
        raise DataError(f"{path}: polarity must be +1 or -1")
    if np.any(np.diff(events["t"]) < 0):
        raise DataError(f"{path}: event timestamps decrease")
    return events, width, height


def write_events(path, events, width: int, height: int) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, width, height))
        fh.write(np.ascontiguousarray(events, dtype=EVENT_DTYPE).tobytes())


@dataclass(frozen=True)
class EventTensor:
    """Event counts with shape ``(2, T, h, w)``; channel 0 = positive polarity."""

    counts: np.ndarray
    window_start: float
    window_len: float
    dropped: int = 0

    @property
    def shape(self):
        return self.counts.shape

    def total(self) -> int:
        return int(self.counts.sum())


def bin_events(
    events,
    window_start: float,
    window_len: float = DEFAULT_WINDOW,
    n_slices: int = DEFAULT_SLICES,
    height: int = 260,
    width: int = 346,
) -> EventTensor:
    """Bin events from ``[window_start, window_start + window_len)`` into slices.

    An event at time ``t`` goes to slice ``floor((t - start) / len * T)``.
    Events outside the window are ignored; in-window events off the sensor
    are dropped and counted in ``EventTensor.dropped``.
    """
    if n_slices < 1 or height < 1 or width < 1:
        raise ValueError("slice count and tensor size must be >= 1")
    if not window_len > 0:
        raise ValueError("window length must be positive")
    counts, _, dropped = kernels.bin_events(
        np.asarray(events["x"], dtype=np.int64),
        np.asarray(events["y"], dtype=np.int64),
        np.asarray(events["t"], dtype=np.float64),
        np.asarray(events["p"], dtype=np.int64),
        float(window_start),
        float(window_len),
        int(n_slices),
        int(height),
        int(width),
    )
    return EventTensor(counts, float(window_start), float(window_len), dropped)


def _fit_axis(size: int, target: int):
    """Source and destination slices mapping one axis onto ``target`` cells."""
    if target >= size:
        lo = (target - size) // 2  # odd padding puts the extra cell at the high end
        return slice(0, size), slice(lo, lo + size)
    start = (size - target) // 2
    return slice(start, start + target), slice(0, target)


def fit_tensor(tensor: EventTensor, target_h: int, target_w: int) -> EventTensor:
    """Center-crop or zero-pad the spatial axes to ``(target_h, target_w)``."""
    if target_h < 1 or target_w < 1:
        raise ValueError("target size must be >= 1")
    c, n_slices, h, w = tensor.counts.shape
    src_y, dst_y = _fit_axis(h, target_h)
    src_x, dst_x = _fit_axis(w, target_w)
    out = np.zeros((c, n_slices, target_h, target_w), dtype=tensor.counts.dtype)
    out[:, :, dst_y, dst_x] = tensor.counts[:, :, src_y, src_x]
    return EventTensor(out, tensor.window_start, tensor.window_len, tensor.dropped)


def fit_offsets(size_hw, target_hw):
    """Offsets ``(dy, dx)`` of the source origin inside the fitted tensor."""
    offs = []
    for size, target in zip(size_hw, target_hw):
        src, dst = _fit_axis(size, target)
        offs.append(dst.start - src.start)
    return tuple(offs)

