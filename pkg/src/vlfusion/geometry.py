"""Rigid transforms between sensor frames and the pinhole camera model.

Convention: ``RigidTransform(parent, child)`` is T_parent^child and maps a
point expressed in ``child`` into ``parent``::

    p_parent = R @ p_child + t

so ``compose(T_a^b, T_b^c) == T_a^c``. Rotations are unit quaternions stored
as ``(w, x, y, z)``.

Frames
------
camera, lidar, imu, world, sensor_markers, helmet_1, helmet_2
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import kernels

CAMERA = "camera"
LIDAR = "lidar"
IMU = "imu"
WORLD = "world"
SENSOR_MARKERS = "sensor_markers"
HELMET_1 = "helmet_1"
HELMET_2 = "helmet_2"
FRAMES = (CAMERA, LIDAR, IMU, WORLD, SENSOR_MARKERS, HELMET_1, HELMET_2)

# re-normalize loaded quaternions only when they are off by more than this
_QUAT_SNAP = 1e-10


class FrameMismatchError(ValueError):
    pass


class BehindCameraError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# quaternion helpers


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError("quaternion has zero or non-finite norm")
    return q / n


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R):
    """Rotation matrix to a unit quaternion with ``w >= 0`` (Shepperd's method)."""
    R = np.asarray(R, dtype=np.float64)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = quat_normalize(q)
    return -q if q[0] < 0 else q


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    h = 0.5 * angle
    return np.concatenate([[math.cos(h)], math.sin(h) * axis])


def quat_from_rotvec(rv):
    rv = np.asarray(rv, dtype=np.float64)
    angle = float(np.linalg.norm(rv))
    if angle < 1e-12:
        return quat_normalize(np.concatenate([[1.0], 0.5 * rv]))
    return quat_from_axis_angle(rv / angle, angle)


def quat_to_rotvec(q):
    q = quat_normalize(q)
    if q[0] < 0:
        q = -q
    s = np.linalg.norm(q[1:])
    if s < 1e-15:
        return 2.0 * q[1:]
    angle = 2.0 * math.atan2(s, q[0])
    return q[1:] / s * angle


def quat_angle(q):
    """Rotation angle of ``q`` in [0, pi]."""
    q = np.asarray(q, dtype=np.float64)
    return 2.0 * math.atan2(float(np.linalg.norm(q[1:])), abs(float(q[0])))


def slerp(q0, q1, alpha):
    q0 = quat_normalize(q0)
    q1 = quat_normalize(q1)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > 1.0 - 1e-13:
        return quat_normalize(q0 + alpha * (q1 - q0))
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    return (math.sin((1.0 - alpha) * theta) * q0 + math.sin(alpha * theta) * q1) / s


def skew(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


# --------------------------------------------------------------------------
# rigid transforms


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray  # (w, x, y, z)
    translation: np.ndarray
    parent_frame: str
    child_frame: str

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise ValueError("transform components must be finite")
        if abs(np.linalg.norm(q) - 1.0) > _QUAT_SNAP:
            q = quat_normalize(q)
        object.__setattr__(self, "rotation", _frozen(q))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls, parent: str, child: str | None = None) -> "RigidTransform":
        return cls([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0], parent, parent if child is None else child)

    @classmethod
    def from_matrix(cls, M, parent: str, child: str) -> "RigidTransform":
        M = np.asarray(M, dtype=np.float64)
        return cls(matrix_to_quat(M[:3, :3]), M[:3, 3], parent, child)

    @classmethod
    def from_rotvec(cls, rotvec, translation, parent: str, child: str) -> "RigidTransform":
        return cls(quat_from_rotvec(rotvec), translation, parent, child)

    @property
    def R(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.R
        M[:3, 3] = self.translation
        return M

    def relabel(self, parent: str, child: str) -> "RigidTransform":
        return RigidTransform(self.rotation, self.translation, parent, child)

    def __matmul__(self, other):
        if isinstance(other, RigidTransform):
            return compose(self, other)
        return transform_point(self, other)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """T_a.parent^b.child from T_a.parent^a.child and T_b.parent^b.child."""
    if a.child_frame != b.parent_frame:
        raise FrameMismatchError(
            f"cannot compose {a.parent_frame}<-{a.child_frame} with {b.parent_frame}<-{b.child_frame}"
        )
    q = quat_normalize(quat_multiply(a.rotation, b.rotation))
    t = a.R @ b.translation + a.translation
    return RigidTransform(q, t, a.parent_frame, b.child_frame)


def invert(t: RigidTransform) -> RigidTransform:
    q = quat_conjugate(t.rotation)
    return RigidTransform(q, -(quat_to_matrix(q) @ t.translation), t.child_frame, t.parent_frame)


def transform_point(t: RigidTransform, p):
    """``R p + t`` for a 3-vector or an (N, 3) array."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1:
        return t.R @ p + t.translation
    return p @ t.R.T + t.translation


def rotation_distance(a: RigidTransform, b: RigidTransform) -> float:
    """Angle (rad) of the relative rotation between two transforms."""
    return quat_angle(quat_multiply(quat_conjugate(a.rotation), b.rotation))


def translation_distance(a: RigidTransform, b: RigidTransform) -> float:
    return float(np.linalg.norm(a.translation - b.translation))


# --------------------------------------------------------------------------
# camera model


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width >= 1 and self.height >= 1):
            raise ValueError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def distortion(self):
        return (self.k1, self.k2, self.k3, self.p1, self.p2)

    @property
    def has_distortion(self) -> bool:
        return any(c != 0.0 for c in self.distortion)

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


def distort_normalized(k: CameraIntrinsics, x, y):
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k.k1 + r2 * (k.k2 + r2 * k.k3))
    xd = x * radial + 2.0 * k.p1 * x * y + k.p2 * (r2 + 2.0 * x * x)
    yd = y * radial + k.p1 * (r2 + 2.0 * y * y) + 2.0 * k.p2 * x * y
    return xd, yd


def project(k: CameraIntrinsics, p_cam, apply_distortion: bool = False):
    """Project one camera-frame point to a pixel ``(u, v)``."""
    x, y, z = (float(c) for c in p_cam)
    if not z > 0:
        raise BehindCameraError(f"point with z={z} is not in front of the camera")
    xn, yn = x / z, y / z
    if apply_distortion:
        xn, yn = distort_normalized(k, xn, yn)
    return np.array([k.fx * xn + k.cx, k.fy * yn + k.cy])


def project_points(k: CameraIntrinsics, points, apply_distortion: bool = False):
    """Vectorized :func:`project`. Returns ``(uv, valid)``; invalid rows are nan."""
    return kernels.project_points(
        points, k.fx, k.fy, k.cx, k.cy, k.k1, k.k2, k.k3, k.p1, k.p2, bool(apply_distortion)
    )


def back_project(k: CameraIntrinsics, pixel, depth: float):
    """Undistorted pixel at depth ``z`` back to a camera-frame point."""
    u, v = pixel
    return np.array([(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth])


def distort_pixel(k: CameraIntrinsics, pixel):
    """Ideal (undistorted) pixel to its distorted location."""
    u, v = pixel
    xd, yd = distort_normalized(k, (u - k.cx) / k.fx, (v - k.cy) / k.fy)
    return np.array([k.fx * xd + k.cx, k.fy * yd + k.cy])


def undistort_pixel(k: CameraIntrinsics, pixel, tol: float = 1e-8, max_iter: int = 20):
    """Invert the distortion model for one pixel.

    Newton iteration on the normalized coordinates, stopping once the
    correction falls below ``tol`` pixels.
    """
    u, v = (float(c) for c in pixel)
    if not k.has_distortion:
        return np.array([u, v])
    xd = (u - k.cx) / k.fx
    yd = (v - k.cy) / k.fy
    x, y = xd, yd
    scale = max(k.fx, k.fy)
    for _ in range(max_iter):
        fx_, fy_ = distort_normalized(k, x, y)
        ex, ey = fx_ - xd, fy_ - yd
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k.k1 + r2 * (k.k2 + r2 * k.k3))
        dradial = k.k1 + r2 * (2.0 * k.k2 + 3.0 * k.k3 * r2)  # d radial / d r2
        j00 = radial + 2.0 * x * x * dradial + 2.0 * k.p1 * y + 6.0 * k.p2 * x
        j01 = 2.0 * x * y * dradial + 2.0 * k.p1 * x + 2.0 * k.p2 * y
        j10 = 2.0 * x * y * dradial + 2.0 * k.p1 * x + 2.0 * k.p2 * y
        j11 = radial + 2.0 * y * y * dradial + 6.0 * k.p1 * y + 2.0 * k.p2 * x
        det = j00 * j11 - j01 * j10
        if det == 0.0 or not math.isfinite(det):
            break
        dx = (j11 * ex - j01 * ey) / det
        dy = (j00 * ey - j10 * ex) / det
        x -= dx
        y -= dy
        if math.hypot(dx, dy) * scale < tol:
            return np.array([k.fx * x + k.cx, k.fy * y + k.cy])
    raise ConvergenceError(f"undistortion of ({u}, {v}) did not converge in {max_iter} iterations")


# --------------------------------------------------------------------------
# calibration set and its file format


@dataclass(frozen=True)
class CalibrationSet:
    T_C_L: RigidTransform
    T_C_MS: RigidTransform
    T_C_I: RigidTransform
    intrinsics: CameraIntrinsics
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        expected = {
            "T_C_L": (CAMERA, LIDAR),
            "T_C_MS": (CAMERA, SENSOR_MARKERS),
            "T_C_I": (CAMERA, IMU),
        }
        for name, (parent, child) in expected.items():
            T = getattr(self, name)
            if (T.parent_frame, T.child_frame) != (parent, child):
                raise FrameMismatchError(
                    f"{name} must map {child} into {parent}, got {T.child_frame} into {T.parent_frame}"
                )


class CalibrationFormatError(ValueError):
    pass


_INTRINSIC_KEYS = ("fx", "fy", "cx", "cy", "width", "height", "k1", "k2", "k3", "p1", "p2")
_TRANSFORM_KEYS = ("T_C_L", "T_C_MS", "T_C_I")


def transform_to_dict(T: RigidTransform) -> dict:
    return {
        "parent": T.parent_frame,
        "child": T.child_frame,
        "translation": [round(float(c), 9) for c in T.translation],
        "rotation_wxyz": [round(float(c), 12) for c in T.rotation],
    }


def transform_from_dict(d: dict, where: str = "transform") -> RigidTransform:
    try:
        parent, child = d["parent"], d["child"]
        t = [float(c) for c in d["translation"]]
        q = [float(c) for c in d["rotation_wxyz"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise CalibrationFormatError(f"{where}: missing or malformed field ({exc})") from None
    if len(t) != 3 or len(q) != 4:
        raise CalibrationFormatError(f"{where}: translation needs 3 and rotation_wxyz 4 values")
    return RigidTransform(q, t, str(parent), str(child))


def calibration_to_dict(calib: CalibrationSet) -> dict:
    k = calib.intrinsics
    out = {"intrinsics": {key: getattr(k, key) for key in _INTRINSIC_KEYS}}
    for key in _TRANSFORM_KEYS:
        out[key] = transform_to_dict(getattr(calib, key))
    return out


def calibration_from_dict(doc) -> CalibrationSet:
    if not isinstance(doc, dict):
        raise CalibrationFormatError("calibration document must be a mapping")
    intr = doc.get("intrinsics")
    if not isinstance(intr, dict):
        raise CalibrationFormatError("missing field: intrinsics")
    missing = [key for key in _INTRINSIC_KEYS if key not in intr]
    if missing:
        raise CalibrationFormatError(f"missing intrinsics field(s): {', '.join(missing)}")
    try:
        k = CameraIntrinsics(
            **{key: (int(intr[key]) if key in ("width", "height") else float(intr[key])) for key in _INTRINSIC_KEYS}
        )
    except (TypeError, ValueError) as exc:
        raise CalibrationFormatError(f"invalid intrinsics: {exc}") from None
    transforms = {}
    for key in _TRANSFORM_KEYS:
        if key not in doc:
            raise CalibrationFormatError(f"missing field: {key}")
        transforms[key] = transform_from_dict(doc[key], key)
    try:
        return CalibrationSet(intrinsics=k, **transforms)
    except FrameMismatchError as exc:
        raise CalibrationFormatError(str(exc)) from None


def load_calibration(path) -> CalibrationSet:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise CalibrationFormatError(f"{path}: {exc}") from None
    return calibration_from_dict(doc)


def save_calibration(calib: CalibrationSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(calibration_to_dict(calib), fh, sort_keys=False, default_flow_style=None)
