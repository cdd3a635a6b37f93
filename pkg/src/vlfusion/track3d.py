"""Per-object constant-velocity Kalman filters in the camera frame.

One filter per 2D track id, state ``[x, y, z, vx, vy, vz]``. Time steps come
from timestamps because camera frames and LiDAR scans arrive at different
rates. Process noise follows the discrete white-acceleration model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class NegativeTimeStepError(ValueError):
    pass


@dataclass(frozen=True)
class Track3DParams:
    accel_std: float = 2.0  # m/s^2 per axis
    obs_std: float = 0.2  # m per axis
    init_pos_var: float | None = None  # defaults to obs_std**2
    init_vel_var: float = 100.0  # (m/s)^2


@dataclass
class TrackState3D:
    track_id: int
    mean: np.ndarray
    cov: np.ndarray
    last_update_t: float
    class_id: int = 0

    @property
    def position(self):
        return self.mean[:3]

    @property
    def velocity(self):
        return self.mean[3:]


def transition(dt: float) -> np.ndarray:
    F = np.eye(6)
    F[0, 3] = F[1, 4] = F[2, 5] = dt
    return F


def process_noise(dt: float, accel_std: float) -> np.ndarray:
    """``G G^T sigma^2`` with ``G = [dt^2/2 I, dt I]^T``."""
    G = np.vstack([0.5 * dt * dt * np.eye(3), dt * np.eye(3)])
    return accel_std ** 2 * (G @ G.T)


def init_state(track_id: int, obs, t: float, params: Track3DParams, class_id: int = 0) -> TrackState3D:
    mean = np.zeros(6)
    mean[:3] = obs
    pos_var = params.obs_std ** 2 if params.init_pos_var is None else params.init_pos_var
    cov = np.diag([pos_var] * 3 + [params.init_vel_var] * 3)
    return TrackState3D(track_id, mean, cov, float(t), class_id)


def predict3d(state: TrackState3D, t: float, params: Track3DParams) -> TrackState3D:
    """Propagate ``state`` to time ``t`` in place."""
    dt = float(t) - state.last_update_t
    if dt < 0:
        raise NegativeTimeStepError(f"cannot predict backwards by {-dt} s")
    if dt == 0:
        return state
    F = transition(dt)
    state.mean = F @ state.mean
    cov = F @ state.cov @ F.T + process_noise(dt, params.accel_std)
    state.cov = 0.5 * (cov + cov.T)
    state.last_update_t = float(t)
    return state


_H = np.hstack([np.eye(3), np.zeros((3, 3))])


def update3d(state: TrackState3D, obs, t: float, params: Track3DParams) -> TrackState3D:
    """Predict to ``t``, then a position-only Kalman update with ``obs``."""
    obs = np.asarray(obs, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(obs)):
        raise ValueError("observation must be finite")
    predict3d(state, t, params)
    R = np.eye(3) * params.obs_std ** 2
    P = state.cov
    S = _H @ P @ _H.T + R
    K = np.linalg.solve(S, _H @ P).T
    state.mean = state.mean + K @ (obs - _H @ state.mean)
    I_KH = np.eye(6) - K @ _H
    cov = I_KH @ P @ I_KH.T + K @ R @ K.T
    state.cov = 0.5 * (cov + cov.T)
    return state


class Estimate3D(NamedTuple):
    t: float
    track_id: int
    class_id: int
    position: np.ndarray
    velocity: np.ndarray


@dataclass
class Tracker3D:
    """Independent filters keyed by 2D track id."""

    params: Track3DParams = field(default_factory=Track3DParams)
    tracks: dict = field(default_factory=dict)

    def manage(self, fused, dead_ids=()) -> list[Estimate3D]:
        """Feed ``(track_id, point, t[, class_id])`` observations; drop ``dead_ids``.

        Returns one estimate per observation, in input order.
        """
        out = []
        for item in fused:
            track_id, point, t = item[:3]
            class_id = item[3] if len(item) > 3 else 0
            state = self.tracks.get(track_id)
            if state is None:
                state = init_state(track_id, point, t, self.params, class_id)
                self.tracks[track_id] = state
            else:
                update3d(state, point, t, self.params)
            out.append(Estimate3D(float(t), track_id, state.class_id,
                                  state.position.copy(), state.velocity.copy()))
        for track_id in dead_ids:
            self.tracks.pop(track_id, None)
        return out

    def query(self, track_id: int, t: float) -> Estimate3D:
        """Predicted state of a live track at ``t`` without changing the filter."""
        s = self.tracks[track_id]
        tmp = TrackState3D(s.track_id, s.mean.copy(), s.cov.copy(), s.last_update_t, s.class_id)
        predict3d(tmp, t, self.params)
        return Estimate3D(float(t), track_id, s.class_id, tmp.position.copy(), tmp.velocity.copy())
