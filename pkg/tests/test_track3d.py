import numpy as np
import pytest

from vlfusion.track3d import (
    NegativeTimeStepError,
    Track3DParams,
    Tracker3D,
    TrackState3D,
    init_state,
    predict3d,
    process_noise,
    update3d,
)

P = Track3DParams()


def state(mean):
    return TrackState3D(1, np.array(mean, dtype=float), np.eye(6), 0.0)


def test_predict_constant_velocity():
    s = predict3d(state([0, 0, 5, 1, 0, 0]), 1.0, P)
    np.testing.assert_allclose(s.position, [1, 0, 5])


def test_zero_dt_is_identity():
    s = state([0, 0, 5, 1, 0, 0])
    before = s.cov.copy()
    predict3d(s, 0.0, P)
    np.testing.assert_array_equal(s.cov, before)


def test_negative_dt():
    s = state([0] * 6)
    s.last_update_t = 1.0
    with pytest.raises(NegativeTimeStepError):
        predict3d(s, 0.5, P)


def test_process_noise_formula():
    dt, q = 0.3, 2.0
    Q = process_noise(dt, q)
    # per-axis block of the discrete white-acceleration model
    block = q * q * np.array([[dt ** 4 / 4, dt ** 3 / 2], [dt ** 3 / 2, dt ** 2]])
    for ax in range(3):
        idx = [ax, ax + 3]
        np.testing.assert_allclose(Q[np.ix_(idx, idx)], block)
    s = state([0] * 6)
    F = np.eye(6)
    F[:3, 3:] = dt * np.eye(3)
    expected = F @ s.cov @ F.T + Q
    predict3d(s, dt, P)
    np.testing.assert_allclose(s.cov, expected, atol=1e-12)


def test_tiny_obs_noise_snaps_to_observation():
    p = Track3DParams(obs_std=1e-6)
    s = init_state(1, [0, 0, 5], 0.0, Track3DParams())
    update3d(s, [1, 2, 3], 0.1, p)
    np.testing.assert_allclose(s.position, [1, 2, 3], atol=1e-6)


def test_stationary_speed_goes_to_zero():
    s = init_state(1, [0, 0, 5], 0.0, P)
    for i in range(1, 20):
        update3d(s, [0, 0, 5], i * 0.1, P)
    assert np.linalg.norm(s.velocity) < 0.05


def test_velocity_converges_for_walking_target():
    s = init_state(1, [0, 0, 5], 0.0, P)
    for i in range(1, 21):
        update3d(s, [i * 0.1, 0, 5], i * 0.1, P)
    assert abs(s.velocity[0] - 1.0) < 0.1


def test_update_never_grows_position_uncertainty(rng):
    s = init_state(1, [0, 0, 5], 0.0, P)
    for i in range(1, 50):
        predict3d(s, i * 0.1, P)
        before = np.trace(s.cov[:3, :3])
        update3d(s, rng.normal(size=3), i * 0.1, P)
        assert np.trace(s.cov[:3, :3]) <= before + 1e-12
        assert np.allclose(s.cov, s.cov.T, atol=1e-9)
        assert np.linalg.eigvalsh(s.cov).min() >= -1e-9


def test_manage_lifecycle():
    tr = Tracker3D()
    out = tr.manage([(7, [1, 2, 3], 0.0)])
    np.testing.assert_array_equal(out[0].position, [1, 2, 3])
    np.testing.assert_array_equal(out[0].velocity, [0, 0, 0])
    tr.manage([(8, [0, 0, 1], 0.1)])
    assert tr.tracks[7].last_update_t == 0.0  # untouched without an observation
    q = tr.query(7, 0.5)
    np.testing.assert_allclose(q.position, [1, 2, 3])
    tr.manage([], dead_ids=[7])
    assert 7 not in tr.tracks and 8 in tr.tracks


def test_filters_do_not_share_state():
    a, b = Tracker3D(), Tracker3D()
    a.manage([(1, [0, 0, 5], 0.0), (2, [3, 0, 5], 0.0)])
    b.manage([(1, [0, 0, 5], 0.0)])
    for i in range(1, 5):
        ea = a.manage([(1, [i * 0.1, 0, 5], i * 0.1), (2, [3, i, 5], i * 0.1)])
        eb = b.manage([(1, [i * 0.1, 0, 5], i * 0.1)])
        np.testing.assert_array_equal(ea[0].position, eb[0].position)
