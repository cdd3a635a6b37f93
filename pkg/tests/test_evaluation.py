import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import det
from oracles import brute_force_iou, brute_force_match_count
from vlfusion.dataio import DataError, GroundTruthPose, Subject
from vlfusion.evaluation import (
    Estimate,
    PrCell,
    error_report,
    match_frame,
    pair_frames,
    pair_sweep_with_tracking,
    position_errors,
    pr_sweep,
)
from vlfusion.geometry import (
    CAMERA,
    IMU,
    LIDAR,
    SENSOR_MARKERS,
    WORLD,
    CalibrationSet,
    CameraIntrinsics,
    RigidTransform,
    compose,
    invert,
    quat_from_axis_angle,
)
from vlfusion.sort2d import SortParams


def test_match_frame_examples():
    assert match_frame([det(0, (0, 0, 10, 10))], [det(0, (0, 0, 10, 10 / 0.6))], 0.5) == (1, 0, 0)
    assert match_frame([], [det(0, (0, 0, 1, 1)), det(0, (2, 2, 3, 3))], 0.5) == (0, 2, 0)
    assert match_frame([det(0, (0, 0, 1, 1))], [], 0.5) == (0, 0, 1)
    assert match_frame([det(0, (0, 0, 10, 10), cls=0)], [det(0, (0, 0, 10, 10), cls=2)], 0.5) == (0, 1, 1)


def _boxes(rng, n):
    xy = rng.uniform(0, 30, (n, 2))
    wh = rng.uniform(10, 30, (n, 2))
    return [tuple(b) for b in np.hstack([xy, xy + wh])]


def test_match_frame_equals_exhaustive_oracle(rng):
    for _ in range(300):
        refs = [det(0, b, cls=int(c)) for b, c in zip(_boxes(rng, 3), rng.integers(0, 2, 3))]
        cands = [det(0, b, cls=int(c)) for b, c in zip(_boxes(rng, 3), rng.integers(0, 2, 3))]
        thr = rng.choice([0.1, 0.3, 0.5])
        ious = brute_force_iou([r.bbox for r in refs], [c.bbox for c in cands])
        same = np.array([[r.class_id == c.class_id for c in cands] for r in refs])
        tp = brute_force_match_count(ious, same, thr)
        assert match_frame(refs, cands, thr) == (tp, 3 - tp, 3 - tp)


def test_prcell_zero_division():
    c = PrCell(0.5, 0.3, 0, 0, 0)
    assert c.precision == 0.0 and c.recall == 0.0


def _random_frames(rng, n_frames=40):
    frames = []
    for f in range(n_frames):
        t = f * 0.05
        refs = [det(t, b) for b in _boxes(rng, int(rng.integers(0, 4)))]
        cands = [det(t, tuple(np.add(r.bbox, rng.normal(0, 3, 4))), conf=float(rng.uniform(0.3, 1)))
                 for r in refs if rng.random() < 0.8]
        cands += [det(t, b, conf=float(rng.uniform(0.3, 1))) for b in _boxes(rng, int(rng.integers(0, 2)))]
        frames.append((t, refs, cands))
    return frames


def test_self_comparison_is_perfect(rng):
    frames = [(t, r, [c._replace(confidence=0.95) for c in r]) for t, r, _ in _random_frames(rng)]
    frames = [(t, [x._replace(confidence=0.95) for x in r], c) for t, r, c in frames]
    for cell in pr_sweep(frames):
        assert cell.precision == 1.0 and cell.recall == 1.0


def test_sweep_equals_independent_recount(rng):
    frames = _random_frames(rng, 100)
    cells = pr_sweep(frames, iou_grid=(0.5, 0.7), conf_grid=(0.3, 0.6))
    for cell in cells:
        tp = fp = fn = 0
        for _, refs, cands in frames:
            refs = [r for r in refs if r.confidence >= 0.5]
            cands = [c for c in cands if c.confidence >= cell.confidence_threshold]
            if not refs or not cands:
                fp += len(cands)
                fn += len(refs)
                continue
            ious = brute_force_iou([r.bbox for r in refs], [c.bbox for c in cands])
            k = brute_force_match_count(ious, np.ones_like(ious, dtype=bool), cell.iou_threshold)
            tp, fp, fn = tp + k, fp + len(cands) - k, fn + len(refs) - k
        assert (cell.tp, cell.fp, cell.fn) == (tp, fp, fn)


def test_monotone_in_both_thresholds(rng):
    cells = pr_sweep(_random_frames(rng, 120))
    by = {(c.confidence_threshold, c.iou_threshold): c for c in cells}
    confs = sorted({c.confidence_threshold for c in cells})
    ious = sorted({c.iou_threshold for c in cells})
    for cf in confs:
        for a, b in zip(ious, ious[1:]):
            assert by[cf, b].recall <= by[cf, a].recall
            assert by[cf, b].precision <= by[cf, a].precision
            assert by[cf, b].tp + by[cf, b].fp == by[cf, a].tp + by[cf, a].fp
    for io in ious:
        for a, b in zip(confs, confs[1:]):
            assert by[b, io].tp <= by[a, io].tp
            assert by[b, io].tp + by[b, io].fp <= by[a, io].tp + by[a, io].fp


def test_pass_through_tracker_gives_identical_tables():
    frames = []
    for f in range(20):
        t = f * 0.05
        boxes = [(10 + 2 * f, 10, 60 + 2 * f, 90), (300, 50 + f, 350, 150 + f)]
        frames.append((t, [det(t, b) for b in boxes], [det(t, b) for b in boxes]))
    passthrough = SortParams(min_hits=1, max_unmatched_predictions=0, min_assoc_for_prediction=1,
                             observation_noise=(1e-9, 1e-9, 1e-9, 1e-12))
    pure, tracked = pair_sweep_with_tracking(frames, passthrough, iou_grid=(0.5, 0.9), conf_grid=(0.3,))
    assert [(c.tp, c.fp, c.fn) for c in pure] == [(c.tp, c.fp, c.fn) for c in tracked]


def test_pair_frames_inserts_gaps():
    frames = pair_frames([det(0.0, (0, 0, 1, 1))], [det(0.2, (0, 0, 1, 1))], frame_period=0.1)
    assert [round(t, 6) for t, _, _ in frames] == [0.0, 0.1, 0.2]
    assert [(len(r), len(c)) for _, r, c in frames] == [(1, 0), (0, 0), (0, 1)]


def test_error_report_formula():
    rep = error_report([[0.1, 0, 0], [0.2, 0, 0], [0.7, 0, 0]])
    assert rep.x.mae == pytest.approx(1.0 / 3)
    assert rep.x.rmse == pytest.approx(math.sqrt((0.01 + 0.04 + 0.49) / 3))
    assert rep.y.mae == 0 and rep.xz.mae == pytest.approx(1.0 / 3)


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=40))
def test_property_rmse_at_least_mae(errs):
    rep = error_report(errs)
    for ax in (rep.x, rep.y, rep.z, rep.xz):
        assert ax.rmse >= ax.mae - 1e-12


# ground-truth chain


def _calib():
    k = CameraIntrinsics(400.0, 400.0, 320.0, 240.0, 640, 480)
    T_C_MS = RigidTransform(quat_from_axis_angle([1, 2, 3], 0.7), [0.1, -0.2, 0.05], CAMERA, SENSOR_MARKERS)
    return CalibrationSet(RigidTransform.identity(CAMERA, LIDAR), T_C_MS, RigidTransform.identity(CAMERA, IMU), k)


def _gt(times):
    out = []
    for t in times:
        rig = RigidTransform(quat_from_axis_angle([0, 0, 1], 0.1 * t), [t, 0.5, 1.2], WORLD, SENSOR_MARKERS)
        person = RigidTransform([1, 0, 0, 0], [5 + 0.3 * t, 1.0 - 0.2 * t, 1.7], WORLD, Subject.HELMET_1.frame)
        out += [GroundTruthPose(t, Subject.SENSOR_RIG, rig), GroundTruthPose(t, Subject.HELMET_1, person)]
    return out


def _truth_in_camera(calib, gt, t):
    rig = [g for g in gt if g.subject == Subject.SENSOR_RIG and g.t == t][0].pose
    person = [g for g in gt if g.subject == Subject.HELMET_1 and g.t == t][0].pose
    return compose(compose(calib.T_C_MS, invert(rig)), person).translation


def test_position_errors_zero_and_offset():
    calib, times = _calib(), [i * 0.01 for i in range(101)]
    gt = _gt(times)
    truth = {t: _truth_in_camera(calib, gt, t) for t in times[::10]}
    exact = [Estimate(t, 1, p) for t, p in truth.items()]
    rep = position_errors(exact, gt, calib)
    assert rep.n == len(exact) and rep.xz.mae < 1e-12 and rep.xz.rmse < 1e-12
    shifted = [Estimate(t, 1, p + [0, 0, 1.0]) for t, p in truth.items()]
    rep = position_errors(shifted, gt, calib)
    assert rep.z.mae == pytest.approx(1.0) and rep.z.rmse == pytest.approx(1.0)
    assert rep.x.mae < 1e-12 and rep.xz.mae == pytest.approx(1.0)


def test_position_errors_gate_and_overlap():
    calib, times = _calib(), [i * 0.01 for i in range(101)]
    gt = _gt(times)
    far = [Estimate(0.5, 1, np.array([100.0, 0, 0]))]
    assert position_errors(far, gt, calib).unassociated == 1
    with pytest.raises(DataError):
        position_errors([Estimate(50.0, 1, np.zeros(3))], gt, calib)
