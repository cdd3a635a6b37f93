"""Deterministic synthetic scenes: ground truth, noisy detections and LiDAR scans.

World frame is z-up with the ground at z = 0. The sensor rig (the mocap
marker frame) uses x forward, y left, z up; with the default extrinsics the
camera looks along the rig's +x axis. Agents are vertical cylinders (people)
or boxes (vehicles) moving along piecewise-linear waypoints on the ground.
A helmet marker sits on top of each person, centred on the axis.

Every noise source draws from its own Philox stream keyed by
``(seed, crc32(tag), frame)``, so turning one source on or off never shifts
another's draws.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import yaml

from .dataio import (
    GroundTruthPose,
    LidarScan,
    Source,
    Subject,
    make_detection,
    write_detections,
    write_poses,
    write_scans,
)
from .geometry import (
    CAMERA,
    IMU,
    LIDAR,
    SENSOR_MARKERS,
    WORLD,
    CalibrationSet,
    CameraIntrinsics,
    RigidTransform,
    calibration_to_dict,
    compose,
    invert,
    matrix_to_quat,
    quat_from_axis_angle,
    transform_from_dict,
    transform_point,
)


class SceneConfigError(ValueError):
    pass


class NotVisibleError(ValueError):
    """The agent does not project into the image at the requested time."""


# rig axes (x fwd, y left, z up) expressed in camera axes (x right, y down, z fwd)
_R_CAM_RIG = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])


def _rig_to_camera(offset_in_rig, parent=CAMERA, child=SENSOR_MARKERS) -> RigidTransform:
    """T_C^X for a frame X with rig-style axes whose origin sits at ``offset_in_rig`` from the camera."""
    q = matrix_to_quat(_R_CAM_RIG)
    return RigidTransform(q, _R_CAM_RIG @ np.asarray(offset_in_rig, dtype=np.float64), parent, child)


def default_calibration(intrinsics: CameraIntrinsics) -> CalibrationSet:
    return CalibrationSet(
        T_C_L=_rig_to_camera([-0.05, 0.0, 0.10], CAMERA, LIDAR),
        T_C_MS=_rig_to_camera([-0.10, 0.0, 0.05], CAMERA, SENSOR_MARKERS),
        T_C_I=_rig_to_camera([-0.02, 0.01, 0.0], CAMERA, IMU),
        intrinsics=intrinsics,
    )


@dataclass(frozen=True)
class Waypoint:
    t: float
    position: tuple  # world (x, y[, z])
    yaw: float = 0.0  # radians about world z


def _interp_waypoints(wps: Sequence[Waypoint], t: float):
    """Piecewise-linear position and yaw; held constant outside the span."""
    if t <= wps[0].t:
        return np.array(wps[0].position, dtype=float), wps[0].yaw
    if t >= wps[-1].t:
        return np.array(wps[-1].position, dtype=float), wps[-1].yaw
    for a, b in zip(wps, wps[1:]):
        if a.t <= t <= b.t:
            alpha = (t - a.t) / (b.t - a.t)
            pa, pb = np.array(a.position, dtype=float), np.array(b.position, dtype=float)
            return (1 - alpha) * pa + alpha * pb, (1 - alpha) * a.yaw + alpha * b.yaw
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class Agent:
    class_id: int
    waypoints: tuple
    shape: str = "cylinder"  # or "box"
    radius: float = 0.3
    height: float = 1.7
    length: float = 4.0  # boxes only, along world x
    width: float = 1.8  # boxes only, along world y
    subject: Subject | None = None

    def base(self, t: float) -> np.ndarray:
        p, _ = _interp_waypoints(self.waypoints, t)
        return np.array([p[0], p[1], 0.0])

    def marker_pose(self, t: float) -> RigidTransform:
        b = self.base(t)
        return RigidTransform([1.0, 0, 0, 0], [b[0], b[1], self.height], WORLD, self.subject.frame)


@dataclass(frozen=True)
class DetectorNoise:
    jitter_std: float = 0.0  # px, per coordinate
    miss_probability: float = 0.0
    false_positive_rate: float = 0.0  # mean count per frame
    confidence: tuple = (0.5, 1.0)  # uniform bounds for true detections
    fp_confidence: tuple = (0.3, 0.7)


@dataclass(frozen=True)
class LidarConfig:
    rate: float = 7.9  # Hz
    azimuth_fov: float = 120.0  # deg, centred on the rig's +x
    azimuth_step: float = 0.2  # deg
    elevations: tuple = tuple(float(e) for e in range(-15, 16, 2))  # deg, 16 channels
    angular_noise: float = 0.0  # deg std on each ray angle
    range_noise: float = 0.0  # m std
    max_range: float = 100.0
    background: tuple | None = (1.0, 0.0, 0.0, 12.0)  # plane n.x = d in world, or None
    ground: bool = False


@dataclass(frozen=True)
class SceneConfig:
    duration: float
    intrinsics: CameraIntrinsics
    agents: tuple
    frame_rate: float = 23.0
    rig: tuple = (Waypoint(0.0, (0.0, 0.0, 1.2)),)  # T_W^{M_S} waypoints
    calibration: CalibrationSet | None = None
    detector: DetectorNoise = field(default_factory=DetectorNoise)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    gt_rate: float = 100.0
    occlusion_overlap: float = 0.7  # suppress boxes this much covered by a nearer one
    source: Source = Source.RGB
    seed: int = 0

    def __post_init__(self):
        if not self.duration > 0:
            raise SceneConfigError("duration must be positive")
        for name in ("frame_rate", "gt_rate"):
            if not getattr(self, name) > 0:
                raise SceneConfigError(f"{name} must be positive")
        if self.lidar.rate < 0 or self.lidar.range_noise < 0 or self.lidar.angular_noise < 0:
            raise SceneConfigError("lidar rates and noise levels must be >= 0")
        d = self.detector
        if not 0.0 <= d.miss_probability <= 1.0:
            raise SceneConfigError("miss_probability must be in [0, 1]")
        if d.false_positive_rate < 0 or d.jitter_std < 0:
            raise SceneConfigError("false_positive_rate and jitter_std must be >= 0")
        for lo, hi in (d.confidence, d.fp_confidence):
            if not 0.0 <= lo <= hi <= 1.0:
                raise SceneConfigError("confidence bounds must satisfy 0 <= lo <= hi <= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise SceneConfigError("seed must be a 64-bit unsigned integer")
        for a in self.agents:
            if a.shape not in ("cylinder", "box"):
                raise SceneConfigError(f"unknown agent shape {a.shape!r}")
            if not a.waypoints:
                raise SceneConfigError("every agent needs at least one waypoint")
            if any(w1.t <= w0.t for w0, w1 in zip(a.waypoints, a.waypoints[1:])):
                raise SceneConfigError("waypoint times must strictly increase")
            if any(len(w.position) not in (2, 3) for w in a.waypoints):
                raise SceneConfigError("agent waypoint positions need 2 or 3 coordinates")
        if not self.rig or any(len(w.position) != 3 for w in self.rig):
            raise SceneConfigError("rig waypoints need 3D positions (x, y, height)")
        if any(w1.t <= w0.t for w0, w1 in zip(self.rig, self.rig[1:])):
            raise SceneConfigError("rig waypoint times must strictly increase")

    @property
    def calib(self) -> CalibrationSet:
        return self.calibration or default_calibration(self.intrinsics)

    def rig_pose(self, t: float) -> RigidTransform:
        p, yaw = _interp_waypoints(self.rig, t)
        return RigidTransform(quat_from_axis_angle([0, 0, 1], yaw), p, WORLD, SENSOR_MARKERS)

    def camera_pose(self, t: float) -> RigidTransform:
        """T_W^C."""
        return compose(self.rig_pose(t), invert(self.calib.T_C_MS))

    def lidar_pose(self, t: float) -> RigidTransform:
        """T_W^L."""
        return compose(self.camera_pose(t), self.calib.T_C_L)


# --------------------------------------------------------------------------
# config file


def _waypoints(items, where):
    out = []
    for i, w in enumerate(items or []):
        try:
            out.append(Waypoint(float(w["t"]), tuple(float(c) for c in w["position"]),
                                math.radians(float(w.get("yaw_deg", 0.0)))))
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneConfigError(f"{where}[{i}]: {exc}") from None
    return tuple(out)


def scene_from_dict(doc: dict) -> SceneConfig:
    if not isinstance(doc, dict):
        raise SceneConfigError("scene config must be a mapping")
    try:
        cam = doc["camera"]
        intr = cam["intrinsics"]
        k = CameraIntrinsics(**{key: (int(v) if key in ("width", "height") else float(v)) for key, v in intr.items()})
        agents = []
        for i, a in enumerate(doc.get("agents", [])):
            a = dict(a)
            subject = a.pop("subject", None)
            wps = _waypoints(a.pop("waypoints"), f"agents[{i}].waypoints")
            agents.append(Agent(class_id=int(a.pop("class_id")), waypoints=wps,
                                subject=Subject(subject) if subject else None,
                                **{key: (str(v) if key == "shape" else float(v)) for key, v in a.items()}))
        det = dict(doc.get("detector", {}))
        for key in ("confidence", "fp_confidence"):
            if key in det:
                det[key] = tuple(float(c) for c in det[key])
        lid = dict(doc.get("lidar", {}))
        if "elevations" in lid:
            lid["elevations"] = tuple(float(e) for e in lid["elevations"])
        if lid.get("background") is not None:
            bg = lid["background"]
            lid["background"] = tuple(float(c) for c in (*bg["normal"], bg["d"]))
        calib = None
        if "extrinsics" in doc:
            base = default_calibration(k)
            ex = doc["extrinsics"]
            calib = CalibrationSet(
                T_C_L=transform_from_dict(ex["T_C_L"], "T_C_L") if "T_C_L" in ex else base.T_C_L,
                T_C_MS=transform_from_dict(ex["T_C_MS"], "T_C_MS") if "T_C_MS" in ex else base.T_C_MS,
                T_C_I=transform_from_dict(ex["T_C_I"], "T_C_I") if "T_C_I" in ex else base.T_C_I,
                intrinsics=k,
            )
        kw = {}
        if "rig" in doc:
            kw["rig"] = _waypoints(doc["rig"]["waypoints"], "rig.waypoints")
        return SceneConfig(
            duration=float(doc["duration"]),
            intrinsics=k,
            agents=tuple(agents),
            frame_rate=float(cam.get("frame_rate", 23.0)),
            calibration=calib,
            detector=DetectorNoise(**{key: (v if isinstance(v, tuple) else float(v)) for key, v in det.items()}),
            lidar=LidarConfig(**{key: (v if isinstance(v, tuple) or v is None or isinstance(v, bool) else float(v))
                                 for key, v in lid.items()}),
            gt_rate=float(doc.get("gt_rate", 100.0)),
            occlusion_overlap=float(doc.get("occlusion_overlap", 0.7)),
            source=Source(doc.get("source", "rgb")),
            seed=int(doc.get("seed", 0)),
            **kw,
        )
    except SceneConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneConfigError(f"invalid scene config: {exc!r}") from None


def load_scene(path) -> SceneConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise SceneConfigError(f"{path}: {exc}") from None
    return scene_from_dict(doc)


# --------------------------------------------------------------------------
# random streams


def rng(seed: int, tag: str, index: int) -> np.random.Generator:
    """Independent Philox stream for one noise source and one frame/scan index."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, zlib.crc32(tag.encode()), index])
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# projection of agents


def _circle_extremes(centre, e1, e2, radius, f, c):
    """Min/max of ``f * X / Z + c`` over the circle ``centre + r (cos e1 + sin e2)``.

    With ``X = a cos + b sin + c0`` and ``Z = d cos + e sin + g``, the
    stationary angles solve ``A sin + B cos + D = 0``.
    """
    cx, cz = centre
    a, b, c0 = radius * e1[0], radius * e2[0], cx
    d, e, g = radius * e1[1], radius * e2[1], cz
    A = c0 * d - a * g
    B = b * g - c0 * e
    D = b * d - a * e
    amp = math.hypot(A, B)
    angles = []
    if amp > 0 and abs(D) <= amp:
        phi = math.atan2(B, A)  # A sin + B cos = amp sin(th + phi)
        base = math.asin(max(-1.0, min(1.0, -D / amp)))
        angles = [base - phi, math.pi - base - phi]
    if not angles:
        angles = [0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi]
    vals = []
    for th in angles:
        X = a * math.cos(th) + b * math.sin(th) + c0
        Z = d * math.cos(th) + e * math.sin(th) + g
        vals.append(f * X / Z + c)
    return min(vals), max(vals)


def _cylinder_rims(agent: Agent, T_C_W: RigidTransform, t: float):
    base = agent.base(t)
    ex = T_C_W.R @ np.array([1.0, 0, 0])
    ey = T_C_W.R @ np.array([0, 1.0, 0])
    rims = []
    for z in (0.0, agent.height):
        rims.append(transform_point(T_C_W, base + np.array([0, 0, z])))
    return rims, ex, ey


def _box_corners(agent: Agent, t: float) -> np.ndarray:
    p, yaw = _interp_waypoints(agent.waypoints, t)
    c, s = math.cos(yaw), math.sin(yaw)
    hl, hw = agent.length / 2, agent.width / 2
    pts = []
    for dx in (-hl, hl):
        for dy in (-hw, hw):
            for z in (0.0, agent.height):
                pts.append([p[0] + c * dx - s * dy, p[1] + s * dx + c * dy, z])
    return np.array(pts)


_MIN_DEPTH = 0.05


def expected_bbox(config: SceneConfig, agent: Agent, t: float, clip: bool = True) -> tuple:
    """Tight image bbox of ``agent`` at ``t``; raises :class:`NotVisibleError`.

    Cylinders: the silhouette extremes lie on the top or bottom rim, each a
    circle whose projected extremes are found in closed form. Boxes: the
    extremes are projected corners. Lens distortion is not modelled here; the
    simulator's detector works in the undistorted image.
    """
    k = config.intrinsics
    T_C_W = invert(config.camera_pose(t))
    if agent.shape == "box":
        pc = transform_point(T_C_W, _box_corners(agent, t))
        if np.any(pc[:, 2] <= _MIN_DEPTH):
            raise NotVisibleError("agent is behind or too close to the camera")
        u = k.fx * pc[:, 0] / pc[:, 2] + k.cx
        v = k.fy * pc[:, 1] / pc[:, 2] + k.cy
        box = (float(u.min()), float(v.min()), float(u.max()), float(v.max()))
    else:
        rims, ex, ey = _cylinder_rims(agent, T_C_W, t)
        r = agent.radius
        us, vs = [], []
        for c in rims:
            # closest depth on the rim is c_z - r * |horizontal depth direction|
            if c[2] - r * math.hypot(ex[2], ey[2]) <= _MIN_DEPTH:
                raise NotVisibleError("agent is behind or too close to the camera")
            us.extend(_circle_extremes((c[0], c[2]), (ex[0], ex[2]), (ey[0], ey[2]), r, k.fx, k.cx))
            vs.extend(_circle_extremes((c[1], c[2]), (ex[1], ex[2]), (ey[1], ey[2]), r, k.fy, k.cy))
        box = (min(us), min(vs), max(us), max(vs))
    if clip:
        box = (max(box[0], 0.0), max(box[1], 0.0), min(box[2], float(k.width)), min(box[3], float(k.height)))
        if not (box[0] < box[2] and box[1] < box[3]):
            raise NotVisibleError("agent projects outside the image")
    return box


def agent_depth(config: SceneConfig, agent: Agent, t: float) -> float:
    T_C_W = invert(config.camera_pose(t))
    return float(transform_point(T_C_W, agent.base(t) + np.array([0, 0, agent.height / 2]))[2])


def _coverage(inner, outer) -> float:
    """Fraction of ``inner``'s area covered by ``outer``."""
    w = min(inner[2], outer[2]) - max(inner[0], outer[0])
    h = min(inner[3], outer[3]) - max(inner[1], outer[1])
    if w <= 0 or h <= 0:
        return 0.0
    return w * h / ((inner[2] - inner[0]) * (inner[3] - inner[1]))


def visible_boxes(config: SceneConfig, t: float) -> list[tuple[int, tuple]]:
    """``(agent_index, bbox)`` of unoccluded agents, nearest first."""
    cands = []
    for i, a in enumerate(config.agents):
        try:
            cands.append((agent_depth(config, a, t), i, expected_bbox(config, a, t)))
        except NotVisibleError:
            continue
    cands.sort()
    kept = []
    for _, i, box in cands:
        if any(_coverage(box, other) >= config.occlusion_overlap for _, other in kept):
            continue
        kept.append((i, box))
    return kept


# --------------------------------------------------------------------------
# detections


def frame_times(config: SceneConfig) -> np.ndarray:
    n = int(math.floor(config.duration * config.frame_rate + 1e-9)) + 1
    return np.arange(n) / config.frame_rate


def _clip_box(box, k: CameraIntrinsics):
    x1, y1, x2, y2 = box
    x1, x2 = max(x1, 0.0), min(x2, float(k.width))
    y1, y2 = max(y1, 0.0), min(y2, float(k.height))
    if x2 - x1 < 1.0 or y2 - y1 < 1.0:
        return None
    return (x1, y1, x2, y2)


def simulate_frame(config: SceneConfig, index: int, t: float):
    """Noisy detections and noiseless reference boxes for one camera frame."""
    d = config.detector
    k = config.intrinsics
    visible = visible_boxes(config, t)
    reference = [make_detection(t, box, config.agents[i].class_id, 1.0, config.source) for i, box in visible]

    r_miss = rng(config.seed, "miss", index)
    r_jit = rng(config.seed, "jitter", index)
    r_conf = rng(config.seed, "confidence", index)
    dets = []
    for i, box in visible:
        # always draw so the streams do not depend on which boxes survive
        miss = r_miss.random() < d.miss_probability
        jitter = r_jit.normal(0.0, 1.0, 4) * d.jitter_std
        conf = r_conf.uniform(*d.confidence)
        if miss:
            continue
        noisy = _clip_box(tuple(b + j for b, j in zip(box, jitter)), k)
        if noisy is None:
            continue
        dets.append(make_detection(t, noisy, config.agents[i].class_id, round(conf, 6), config.source))

    r_fp = rng(config.seed, "false_positive", index)
    n_fp = int(r_fp.poisson(d.false_positive_rate)) if d.false_positive_rate > 0 else 0
    classes = sorted({a.class_id for a in config.agents}) or [0]
    for _ in range(n_fp):
        w = r_fp.uniform(0.05, 0.25) * k.width
        h = r_fp.uniform(0.1, 0.5) * k.height
        x1 = r_fp.uniform(0, k.width - w)
        y1 = r_fp.uniform(0, k.height - h)
        cls = classes[int(r_fp.integers(len(classes)))]
        conf = r_fp.uniform(*d.fp_confidence)
        dets.append(make_detection(t, (x1, y1, x1 + w, y1 + h), cls, round(conf, 6), config.source))
    return dets, reference


# --------------------------------------------------------------------------
# LiDAR


def scan_times(config: SceneConfig) -> np.ndarray:
    if config.lidar.rate <= 0:
        return np.zeros(0)
    n = int(math.floor(config.duration * config.lidar.rate + 1e-9)) + 1
    return np.arange(n) / config.lidar.rate


def _ray_directions(lid: LidarConfig, r: np.random.Generator | None):
    half = lid.azimuth_fov / 2.0
    n_az = int(round(lid.azimuth_fov / lid.azimuth_step)) + 1
    az = np.linspace(-half, half, n_az)
    el = np.asarray(lid.elevations, dtype=float)
    AZ, EL = np.meshgrid(az, el, indexing="ij")
    AZ, EL = AZ.ravel(), EL.ravel()
    if r is not None:
        noise = r.normal(0.0, 1.0, (2, AZ.size)) * lid.angular_noise
        AZ, EL = AZ + noise[0], EL + noise[1]
    az_r, el_r = np.radians(AZ), np.radians(EL)
    return np.stack([np.cos(el_r) * np.cos(az_r), np.cos(el_r) * np.sin(az_r), np.sin(el_r)], axis=1)


def _hit_cylinder(o, D, base, radius, height):
    """Ray parameter of the first hit on a capped vertical cylinder (inf if none)."""
    ox, oy = o[0] - base[0], o[1] - base[1]
    a = D[:, 0] ** 2 + D[:, 1] ** 2
    b = 2 * (ox * D[:, 0] + oy * D[:, 1])
    c = ox * ox + oy * oy - radius * radius
    disc = b * b - 4 * a * c
    t = np.full(D.shape[0], np.inf)
    ok = (disc >= 0) & (a > 1e-12)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-b - sq) / (2 * a)
    z = o[2] + t1 * D[:, 2]
    side = ok & (t1 > 0) & (z >= 0) & (z <= height)
    t[side] = t1[side]
    # top cap
    with np.errstate(divide="ignore", invalid="ignore"):
        tc = (height - o[2]) / D[:, 2]
    px = ox + tc * D[:, 0]
    py = oy + tc * D[:, 1]
    cap = (tc > 0) & (px * px + py * py <= radius * radius) & (tc < t)
    t[cap] = tc[cap]
    return t


def _hit_box(o, D, corners):
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / D
        t1 = (lo - o) * inv
        t2 = (hi - o) * inv
    tmin = np.nanmax(np.minimum(t1, t2), axis=1)
    tmax = np.nanmin(np.maximum(t1, t2), axis=1)
    t = np.full(D.shape[0], np.inf)
    ok = (tmax >= tmin) & (tmin > 0)
    t[ok] = tmin[ok]
    return t


def _hit_plane(o, D, n, d):
    n = np.asarray(n, dtype=float)
    denom = D @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (d - o @ n) / denom
    t = np.where((np.abs(denom) > 1e-12) & (t > 0), t, np.inf)
    return t


def simulate_scan(config: SceneConfig, index: int, t: float) -> LidarScan:
    lid = config.lidar
    r_ang = rng(config.seed, "lidar_angle", index) if lid.angular_noise > 0 else None
    dirs_l = _ray_directions(lid, r_ang)
    T_W_L = config.lidar_pose(t)
    D = dirs_l @ T_W_L.R.T
    o = np.array(T_W_L.translation)
    hit = np.full(D.shape[0], np.inf)
    for a in config.agents:
        if a.shape == "box":
            # axis-aligned slab test; yawed boxes use their bounding box
            th = _hit_box(o, D, _box_corners(a, t))
        else:
            th = _hit_cylinder(o, D, a.base(t), a.radius, a.height)
        hit = np.minimum(hit, th)
    if lid.background is not None:
        hit = np.minimum(hit, _hit_plane(o, D, lid.background[:3], lid.background[3]))
    if lid.ground:
        hit = np.minimum(hit, _hit_plane(o, D, (0.0, 0.0, 1.0), 0.0))
    keep = np.isfinite(hit) & (hit <= lid.max_range)
    rng_m = hit[keep]
    if lid.range_noise > 0:
        # one draw per ray so the stream does not depend on which rays hit
        noise = rng(config.seed, "lidar_range", index).normal(0.0, lid.range_noise, hit.size)
        rng_m = rng_m + noise[keep]
    pts = dirs_l[keep] * rng_m[:, None]
    return LidarScan.from_arrays(float(t), pts, np.full(pts.shape[0], float(t)))


# --------------------------------------------------------------------------
# ground truth and the full run


def ground_truth(config: SceneConfig) -> list[GroundTruthPose]:
    n = int(math.floor(config.duration * config.gt_rate + 1e-9)) + 1
    out = []
    for i in range(n):
        t = i / config.gt_rate
        out.append(GroundTruthPose(t, Subject.SENSOR_RIG, config.rig_pose(t)))
        for a in config.agents:
            if a.subject is not None:
                out.append(GroundTruthPose(t, a.subject, a.marker_pose(t)))
    return out


@dataclass
class SimulationOutput:
    detections: list
    reference: list
    scans: list
    poses: list
    calibration: CalibrationSet


def simulate(config: SceneConfig) -> SimulationOutput:
    dets, refs = [], []
    for i, t in enumerate(frame_times(config)):
        d, r = simulate_frame(config, i, float(t))
        dets.extend(d)
        refs.extend(r)
    scans = [simulate_scan(config, i, float(t)) for i, t in enumerate(scan_times(config))]
    return SimulationOutput(dets, refs, scans, ground_truth(config), config.calib)


OUTPUT_FILES = {
    "detections": "detections.txt",
    "reference": "reference.txt",
    "scans": "scans.bin",
    "poses": "poses.txt",
    "calibration": "calibration.yaml",
}


def write_output(out: SimulationOutput, directory, header: Sequence[str] = ()) -> dict:
    """Write every output file into ``directory``; returns name -> path."""
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {key: d / name for key, name in OUTPUT_FILES.items()}
    write_detections(paths["detections"], out.detections, header)
    write_detections(paths["reference"], out.reference, header)
    write_scans(paths["scans"], out.scans)
    write_poses(paths["poses"], out.poses)
    with open(paths["calibration"], "w", encoding="utf-8") as fh:
        for h in header:
            fh.write(f"# {h}\n")
        yaml.safe_dump(calibration_to_dict(out.calibration), fh, sort_keys=False, default_flow_style=None)
    return paths
