import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vlfusion.dataio import (
    DataError,
    GroundTruthPose,
    LidarScan,
    OrderingError,
    ParseError,
    Source,
    Subject,
    fill_frame_gaps,
    group_frames,
    interpolate_pose,
    load_detections,
    load_poses,
    load_scans,
    make_detection,
    parse_detections,
    write_detections,
    write_poses,
    write_scans,
)
from vlfusion.geometry import WORLD, RigidTransform, quat_from_axis_angle, quat_to_matrix


def test_detection_line_round_trip(tmp_path):
    dets = [make_detection(0.1, (1, 2, 30, 40), 0, 0.9, Source.RGB),
            make_detection(0.1, (5.5, 6, 7, 8.25), 2, 0.31, Source.EVENT, track_id=4)]
    p = tmp_path / "d.txt"
    write_detections(p, dets, header=["hello"])
    assert load_detections(p) == dets
    assert p.read_text().splitlines()[1] == "0.100000 0 0.900000 1.000000 2.000000 30.000000 40.000000 rgb"


def test_detection_validation_errors():
    with pytest.raises(ParseError) as exc:
        parse_detections(["0.0 0 0.5 10 10 5 20 rgb"], "f.txt")
    assert exc.value.line_no == 1
    with pytest.raises(ParseError):
        parse_detections(["0.0 0 1.5 0 0 5 5 rgb"])
    with pytest.raises(ParseError):
        parse_detections(["0.0 0 0.5 0 0 5 5 infrared"])
    with pytest.raises(ParseError):
        parse_detections(["0.0 0 0.5 0 0 5"])


def test_comments_and_ordering():
    dets = parse_detections(["# c", "", "0.2 0 0.5 0 0 1 1 rgb", "0.1 0 0.5 0 0 1 1 rgb"])
    assert [d.t for d in dets] == [0.1, 0.2]


def test_group_and_fill_frames():
    dets = [make_detection(t, (0, 0, 1, 1), 0, 0.5) for t in (0.0, 0.0, 0.1, 0.4)]
    frames = fill_frame_gaps(group_frames(dets), 0.1)
    assert [round(t, 6) for t, _ in frames] == [0.0, 0.1, 0.2, 0.3, 0.4]
    assert [len(d) for _, d in frames] == [2, 1, 0, 0, 1]


def test_scan_round_trip_and_errors(tmp_path, rng):
    scans = [LidarScan.from_arrays(i * 0.1266, rng.normal(size=(n, 3)), i * 0.1266) for i, n in enumerate([5, 0, 7])]
    p = tmp_path / "s.bin"
    write_scans(p, scans)
    back = load_scans(p)
    assert [len(s) for s in back] == [5, 0, 7]
    np.testing.assert_array_equal(back[2].points, scans[2].points)
    data = p.read_bytes()
    (tmp_path / "t.bin").write_bytes(data[:-3])
    with pytest.raises(DataError, match="truncated"):
        load_scans(tmp_path / "t.bin")
    write_scans(tmp_path / "o.bin", scans[::-1])
    with pytest.raises(OrderingError):
        load_scans(tmp_path / "o.bin")


def _pose(t, angle, x, subject=Subject.SENSOR_RIG):
    return GroundTruthPose(t, subject, RigidTransform(quat_from_axis_angle([0, 0, 1], angle), [x, 0, 0],
                                                      WORLD, subject.frame))


def test_pose_interpolation_midpoint():
    stream = [_pose(0.0, 0.0, 0.0), _pose(1.0, 1.0, 2.0)]
    mid = interpolate_pose(stream, Subject.SENSOR_RIG, 0.5)
    np.testing.assert_allclose(mid.translation, [1, 0, 0])
    np.testing.assert_allclose(quat_to_matrix(mid.rotation), quat_to_matrix(quat_from_axis_angle([0, 0, 1], 0.5)),
                               atol=1e-12)
    assert interpolate_pose(stream, Subject.SENSOR_RIG, 1.005).translation[0] == 2.0
    with pytest.raises(DataError):
        interpolate_pose(stream, Subject.SENSOR_RIG, 1.5)


def test_pose_file_round_trip_and_ordering(tmp_path):
    stream = [_pose(i * 0.01, 0.1 * i, i, s) for i in range(5) for s in (Subject.SENSOR_RIG, Subject.HELMET_1)]
    p = tmp_path / "p.txt"
    write_poses(p, stream)
    again = tmp_path / "q.txt"
    write_poses(again, load_poses(p))
    assert p.read_bytes() == again.read_bytes()
    bad = tmp_path / "bad.txt"
    bad.write_text(p.read_text().splitlines()[2] + "\n" + p.read_text().splitlines()[0] + "\n")
    with pytest.raises(ParseError, match="increase"):
        load_poses(bad)


@given(st.lists(st.tuples(st.floats(0, 100, allow_nan=False), st.floats(0, 600, allow_nan=False),
                          st.floats(0, 400, allow_nan=False), st.floats(1, 50), st.floats(1, 50),
                          st.integers(0, 80), st.floats(0, 1)), max_size=20))
def test_property_detection_text_round_trip(rows):
    dets = [make_detection(round(t, 6), (round(x, 6), round(y, 6), round(x + w, 6), round(y + h, 6)), c, round(p, 6))
            for t, x, y, w, h, c, p in rows if round(x + w, 6) > round(x, 6) and round(y + h, 6) > round(y, 6)]
    from vlfusion.dataio import format_detection

    text = [format_detection(d) for d in dets]
    again = [format_detection(d) for d in parse_detections(text)]
    assert sorted(again) == sorted(text)
