"""Extrinsic solvers: eye-in-hand (T_C^{M_S}) and point-to-plane (T_C^L).

Eye-in-hand
    Each sample pairs the mocap pose of the sensor markers, T_W^{M_S}, with
    the camera pose in a fixed checkerboard frame, T_Cb^C. For samples i, j
    the relative motions ``A = (T_W^{M_S,j})^-1 T_W^{M_S,i}`` and
    ``B = (T_Cb^{C,j})^-1 T_Cb^{C,i}`` satisfy ``A Y = Y B`` with
    ``Y = T_{M_S}^C``. Rotation comes from the null vector of the stacked
    quaternion constraints, translation from linear least squares; the
    result is returned as ``T_C^{M_S} = Y^-1``.

Point-to-plane
    Planes are given in the camera frame as ``n . x = d`` with ``n`` facing
    the camera (so ``d < 0``). Gauss-Newton over a left-multiplied
    rotation vector and a translation increment minimizes
    ``sum (n . (R p + t) - d)^2`` over all LiDAR points on all planes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import yaml

from .geometry import (
    CAMERA,
    LIDAR,
    SENSOR_MARKERS,
    RigidTransform,
    compose,
    invert,
    quat_angle,
    quat_from_rotvec,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
    rotation_distance,
    transform_from_dict,
    translation_distance,
)


class CalibrationError(ValueError):
    pass


class InsufficientSamplesError(CalibrationError):
    pass


class DegenerateMotionError(CalibrationError):
    pass


class RankDeficiencyError(CalibrationError):
    pass


class NonConvergenceError(CalibrationError):
    pass


class HandEyeSample(NamedTuple):
    T_W_MS: RigidTransform
    T_Cb_C: RigidTransform


@dataclass(frozen=True)
class PlaneObservation:
    normal: np.ndarray
    d: float
    lidar_points: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        pts = np.asarray(self.lidar_points, dtype=np.float64).reshape(-1, 3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise CalibrationError("plane normal must have unit norm")
        if pts.shape[0] < 3:
            raise CalibrationError("a plane needs at least 3 LiDAR points")
        if not float(self.d) < 0:
            raise CalibrationError("plane normal must face the camera (offset d < 0)")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "lidar_points", pts)
        object.__setattr__(self, "d", float(self.d))


class HandEyeResult(NamedTuple):
    transform: RigidTransform  # T_C^{M_S}
    rotation_residual: float  # mean angle of A Y vs Y B, rad
    translation_residual: float  # mean norm, m
    n_pairs: int


class PlaneFitResult(NamedTuple):
    transform: RigidTransform  # T_C^L
    cost: float
    iterations: int
    rms: float


# --------------------------------------------------------------------------
# eye-in-hand


def _quat_left(q):
    w, x, y, z = q
    return np.array([[w, -x, -y, -z], [x, w, -z, y], [y, z, w, -x], [z, -y, x, w]])


def _quat_right(q):
    w, x, y, z = q
    return np.array([[w, -x, -y, -z], [x, w, z, -y], [y, -z, w, x], [z, y, -x, w]])


def _positive(q):
    return -q if q[0] < 0 else q


def relative_motions(samples: Sequence[HandEyeSample]):
    """``(A, B)`` relative-motion pairs over all sample pairs ``i < j``."""
    pairs = []
    for i, j in itertools.combinations(range(len(samples)), 2):
        si, sj = samples[i], samples[j]
        A = compose(invert(sj.T_W_MS), si.T_W_MS)
        B = compose(invert(sj.T_Cb_C), si.T_Cb_C)
        pairs.append((A, B))
    return pairs


def _check_motion(pairs, min_axis_angle=math.radians(1.0), min_rotation=1e-6):
    axes = []
    for A, _ in pairs:
        q = _positive(A.rotation)
        if quat_angle(q) > min_rotation:
            axes.append(q[1:] / np.linalg.norm(q[1:]))
    for a, b in itertools.combinations(axes, 2):
        if math.acos(min(1.0, abs(float(np.dot(a, b))))) > min_axis_angle:
            return
    raise DegenerateMotionError("relative rotations share a single axis; AX = XB is not observable")


def solve_eye_in_hand(samples: Sequence[HandEyeSample]) -> HandEyeResult:
    """Estimate T_C^{M_S} from paired mocap and checkerboard camera poses."""
    if len(samples) < 3:
        raise InsufficientSamplesError(f"need at least 3 samples, got {len(samples)}")
    pairs = relative_motions(samples)
    _check_motion(pairs)

    rows = []
    for A, B in pairs:
        qa, qb = _positive(A.rotation), _positive(B.rotation)
        rows.append(_quat_left(qa) - _quat_right(qb))
    M = np.vstack(rows)
    _, _, vt = np.linalg.svd(M)
    q_y = _positive(quat_normalize(vt[-1]))
    R_y = quat_to_matrix(q_y)

    lhs = np.vstack([A.R - np.eye(3) for A, _ in pairs])
    rhs = np.concatenate([R_y @ B.translation - A.translation for A, B in pairs])
    t_y, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)

    Y = RigidTransform(q_y, t_y, SENSOR_MARKERS, CAMERA)
    X = invert(Y)

    rot_res, trans_res = [], []
    for A, B in pairs:
        AY = compose(A, Y)
        YB = compose(Y, B)
        rot_res.append(rotation_distance(AY, YB))
        trans_res.append(translation_distance(AY, YB))
    return HandEyeResult(X, float(np.mean(rot_res)), float(np.mean(trans_res)), len(pairs))


# --------------------------------------------------------------------------
# point-to-plane


def _stack_planes(observations: Sequence[PlaneObservation]):
    normals = np.vstack([np.repeat(o.normal[None, :], len(o.lidar_points), axis=0) for o in observations])
    offsets = np.concatenate([np.full(len(o.lidar_points), o.d) for o in observations])
    points = np.vstack([o.lidar_points for o in observations])
    return normals, offsets, points


def plane_residuals(T: RigidTransform, normals, offsets, points) -> np.ndarray:
    moved = points @ T.R.T + T.translation
    return np.einsum("ij,ij->i", normals, moved) - offsets


def solve_point_to_plane(
    observations: Sequence[PlaneObservation],
    initial: RigidTransform,
    step_tol: float = 1e-10,
    max_iter: int = 100,
) -> PlaneFitResult:
    """Estimate T_C^L by Gauss-Newton with step halving."""
    if len(observations) < 3:
        raise InsufficientSamplesError(f"need at least 3 planes, got {len(observations)}")
    plane_normals = np.vstack([o.normal for o in observations])
    sv = np.linalg.svd(plane_normals, compute_uv=False)
    if sv.size < 3 or sv[2] < 1e-6 * sv[0]:
        raise RankDeficiencyError("plane normals do not span 3D; translation is unobservable")

    normals, offsets, points = _stack_planes(observations)
    T = RigidTransform(initial.rotation, initial.translation, CAMERA, LIDAR)
    r = plane_residuals(T, normals, offsets, points)
    cost = float(r @ r)
    for it in range(1, max_iter + 1):
        moved = points @ T.R.T
        J = np.hstack([np.cross(moved, normals), normals])
        JTJ = J.T @ J
        try:
            delta = -np.linalg.solve(JTJ, J.T @ r)
        except np.linalg.LinAlgError:
            raise RankDeficiencyError("normal equations are singular") from None
        if np.linalg.norm(delta) < step_tol:
            return PlaneFitResult(T, cost, it, math.sqrt(cost / len(r)))
        scale = 1.0
        while True:
            step = scale * delta
            dq = quat_from_rotvec(step[:3])
            R_new = quat_multiply(dq, T.rotation)
            T_new = RigidTransform(R_new, T.translation + step[3:], CAMERA, LIDAR)
            r_new = plane_residuals(T_new, normals, offsets, points)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost or np.linalg.norm(step) < step_tol:
                break
            scale *= 0.5
        if cost_new > cost:
            # no descent left at machine precision
            return PlaneFitResult(T, cost, it, math.sqrt(cost / len(r)))
        T, r, cost = T_new, r_new, cost_new
    raise NonConvergenceError(f"point-to-plane did not converge in {max_iter} iterations")


# --------------------------------------------------------------------------
# input files


def _transform(d, where, parent, child):
    T = transform_from_dict(d, where)
    if (T.parent_frame, T.child_frame) != (parent, child):
        raise CalibrationError(f"{where}: expected {parent}<-{child}, got {T.parent_frame}<-{T.child_frame}")
    return T


def load_hand_eye_samples(path) -> list[HandEyeSample]:
    """YAML: ``samples: [{T_W_MS: <transform>, T_Cb_C: <transform>}, ...]``."""
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    out = []
    for i, s in enumerate(doc.get("samples", [])):
        out.append(
            HandEyeSample(
                _transform(s["T_W_MS"], f"samples[{i}].T_W_MS", "world", SENSOR_MARKERS),
                _transform(s["T_Cb_C"], f"samples[{i}].T_Cb_C", "checkerboard", CAMERA),
            )
        )
    return out


def load_plane_observations(path):
    """YAML: ``planes: [{normal, d, points: [[x,y,z], ...]}]`` and optional ``initial``."""
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    obs = [PlaneObservation(p["normal"], p["d"], p["points"]) for p in doc.get("planes", [])]
    initial = doc.get("initial")
    T0 = _transform(initial, "initial", CAMERA, LIDAR) if initial else RigidTransform.identity(CAMERA, LIDAR)
    return obs, T0
