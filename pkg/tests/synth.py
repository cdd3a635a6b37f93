"""Synthetic inputs with known ground truth for calibration and scene tests."""

import math

import numpy as np

from vlfusion.calibration import HandEyeSample, PlaneObservation
from vlfusion.geometry import (
    CAMERA,
    LIDAR,
    SENSOR_MARKERS,
    WORLD,
    CameraIntrinsics,
    RigidTransform,
    compose,
    invert,
    quat_from_axis_angle,
    quat_from_rotvec,
    transform_point,
)
from vlfusion.simulator import Agent, DetectorNoise, LidarConfig, SceneConfig, Waypoint
from vlfusion.dataio import Source, Subject

CHECKERBOARD = "checkerboard"
K = CameraIntrinsics(400.0, 400.0, 320.0, 240.0, 640, 480)


def random_transform(rng, parent, child, max_angle=math.pi, trans=1.0):
    axis = rng.normal(size=3)
    return RigidTransform(quat_from_axis_angle(axis, rng.uniform(0, max_angle)), rng.normal(size=3) * trans,
                          parent, child)


def noise(rng, frame, angle_std_rad, trans_std):
    return RigidTransform(quat_from_rotvec(rng.normal(size=3) * angle_std_rad), rng.normal(size=3) * trans_std,
                          frame, frame)


def hand_eye_problem(rng, n=50, angle_std_deg=0.0, trans_std=0.0):
    """Samples for a random true T_C^{M_S}; returns ``(samples, truth)``."""
    truth = random_transform(rng, CAMERA, SENSOR_MARKERS, 1.0, 0.2)
    T_W_Cb = random_transform(rng, WORLD, CHECKERBOARD)
    samples = []
    for _ in range(n):
        T_W_MS = random_transform(rng, WORLD, SENSOR_MARKERS, 2.0, 1.0)
        T_Cb_C = compose(invert(T_W_Cb), compose(T_W_MS, invert(truth)))
        a = math.radians(angle_std_deg)
        samples.append(HandEyeSample(compose(T_W_MS, noise(rng, SENSOR_MARKERS, a, trans_std)),
                                     compose(noise(rng, CHECKERBOARD, a, trans_std), T_Cb_C)))
    return samples, truth


def plane_problem(rng, n_planes=6, n_points=50):
    """Plane observations for a random true T_C^L; returns ``(obs, truth)``."""
    truth = random_transform(rng, CAMERA, LIDAR, 0.6, 0.3)
    obs = []
    for _ in range(n_planes):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        d = -rng.uniform(2.0, 5.0)
        a = np.cross(n, [1.0, 0.0, 0.0] if abs(n[0]) < 0.9 else [0.0, 1.0, 0.0])
        a /= np.linalg.norm(a)
        b = np.cross(n, a)
        pc = n * d + rng.uniform(-1, 1, (n_points, 1)) * a + rng.uniform(-1, 1, (n_points, 1)) * b
        obs.append(PlaneObservation(n, d, transform_point(invert(truth), pc)))
    return obs, truth


def perturb(rng, T, angle_deg, trans):
    """Left-multiply ``T`` by a rotation of exactly ``angle_deg`` and a shift of length ``trans``."""
    d = RigidTransform(quat_from_axis_angle(_unit(rng), math.radians(angle_deg)), _unit(rng) * trans,
                       T.parent_frame, T.parent_frame)
    return compose(d, T)


def _unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def walking_scene(seed=5, jitter=0.0, range_noise=0.0, radius=0.3, duration=8.0):
    """One person crossing in front of a static rig."""
    agent = Agent(0, (Waypoint(0.0, (4.0, 1.5)), Waypoint(duration, (5.0, -1.5))), radius=radius, height=1.7,
                  subject=Subject.HELMET_1)
    return SceneConfig(duration=duration, intrinsics=K, agents=(agent,), seed=seed,
                       detector=DetectorNoise(jitter_std=jitter),
                       lidar=LidarConfig(range_noise=range_noise))


def pr_scene(miss=0.0, fp_rate=0.0, seed=3, frames=100, frame_rate=23.0):
    """Two people crossing in opposite directions; detector only, no LiDAR."""
    span = frames / frame_rate
    a1 = Agent(0, (Waypoint(0.0, (5.0, 2.0)), Waypoint(span, (5.0, -2.0))), subject=Subject.HELMET_1)
    a2 = Agent(0, (Waypoint(0.0, (7.0, -2.5)), Waypoint(span, (7.0, 2.5))), subject=Subject.HELMET_2)
    return SceneConfig(duration=(frames - 1) / frame_rate, intrinsics=K, agents=(a1, a2), frame_rate=frame_rate,
                       source=Source.EVENT, seed=seed,
                       detector=DetectorNoise(jitter_std=1.0, miss_probability=miss, false_positive_rate=fp_rate,
                                              confidence=(0.3, 1.0)),
                       lidar=LidarConfig(rate=0.0))
