import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from synth import hand_eye_problem, perturb, plane_problem
from vlfusion.cli import main
from vlfusion.geometry import transform_to_dict

SCENE = {
    "seed": 11,
    "duration": 4.0,
    "camera": {"frame_rate": 23, "intrinsics": {"fx": 400, "fy": 400, "cx": 320, "cy": 240,
                                                "width": 640, "height": 480}},
    "detector": {"jitter_std": 1.0, "miss_probability": 0.1, "false_positive_rate": 0.1},
    "agents": [{"class_id": 0, "subject": "helmet_1", "radius": 0.3, "height": 1.7,
                "waypoints": [{"t": 0, "position": [4.0, 1.0]}, {"t": 4, "position": [5.0, -1.0]}]}],
}


@pytest.fixture
def sim_dir(tmp_path):
    scene = tmp_path / "scene.yaml"
    scene.write_text(yaml.safe_dump(SCENE))
    assert main(["simulate", "--config", str(scene), "--out", str(tmp_path / "sim"), "--no-timestamp"]) == 0
    return tmp_path


def run_args(d, out, *extra):
    sim = d / "sim"
    return ["run", "--detections", str(sim / "detections.txt"), "--scans", str(sim / "scans.bin"),
            "--calibration", str(sim / "calibration.yaml"), "--out", str(out), "--no-timestamp", *extra]


def test_run_then_eval3d(sim_dir, capsys):
    assert main(run_args(sim_dir, sim_dir / "run")) == 0
    assert main(run_args(sim_dir, sim_dir / "raw", "--raw-3d")) == 0
    tracks = (sim_dir / "run" / "tracks3d.txt").read_text().splitlines()
    assert tracks[0] == "# tracks3d mode=filtered source=rgb" and len(tracks) > 10
    assert (sim_dir / "raw" / "tracks3d.txt").read_text().startswith("# tracks3d mode=raw")
    capsys.readouterr()
    assert main(["eval-3d", "--tracks", str(sim_dir / "raw" / "tracks3d.txt"), str(sim_dir / "run" / "tracks3d.txt"),
                 "--poses", str(sim_dir / "sim" / "poses.txt"), "--calibration", str(sim_dir / "sim" / "calibration.yaml"),
                 "--out", str(sim_dir / "ev")]) == 0
    table = capsys.readouterr().out
    assert "Filtering only" in table and "CVKF" in table
    rows = (sim_dir / "ev" / "errors.csv").read_text().splitlines()
    assert rows[0] == "method,source,axis,mae,rmse,n" and len(rows) == 9


def test_run_is_deterministic(sim_dir):
    main(run_args(sim_dir, sim_dir / "a"))
    main(run_args(sim_dir, sim_dir / "b"))
    for name in ("tracks2d.txt", "tracks3d.txt"):
        assert (sim_dir / "a" / name).read_bytes() == (sim_dir / "b" / name).read_bytes()


def test_timestamp_header_is_optional(sim_dir):
    argv = run_args(sim_dir, sim_dir / "ts")
    argv.remove("--no-timestamp")
    assert main(argv) == 0
    assert (sim_dir / "ts" / "tracks3d.txt").read_text().splitlines()[1].startswith("# generated ")


def test_config_file_and_flag_precedence(sim_dir):
    cfg = sim_dir / "run.yaml"
    cfg.write_text(yaml.safe_dump({"detections": "sim/detections.txt", "scans": "sim/scans.bin",
                                   "calibration": "sim/calibration.yaml", "out": "from_config",
                                   "source": "rgb", "frame_rate": 23, "sort": {"min_hits": 2}}))
    assert main(["run", "--config", str(cfg), "--no-timestamp"]) == 0
    assert (sim_dir / "from_config" / "tracks3d.txt").exists()
    assert main(["run", "--config", str(cfg), "--out", str(sim_dir / "flag"), "--source", "event",
                 "--no-timestamp"]) == 0
    assert "source=event" in (sim_dir / "flag" / "tracks3d.txt").read_text().splitlines()[0]


def test_missing_scans_exit_2(sim_dir, caplog):
    argv = run_args(sim_dir, sim_dir / "x")
    argv[argv.index("--scans") + 1] = str(sim_dir / "nope.bin")
    assert main(argv) == 2
    assert "nope.bin" in caplog.text


def test_malformed_data_exit_3(sim_dir):
    bad = sim_dir / "bad.txt"
    bad.write_text("0.0 0 0.5 10 10 5 5 rgb\n")
    argv = run_args(sim_dir, sim_dir / "x")
    argv[argv.index("--detections") + 1] = str(bad)
    assert main(argv) == 3


def test_empty_detections_gives_empty_tracks(sim_dir):
    empty = sim_dir / "empty.txt"
    empty.write_text("")
    argv = run_args(sim_dir, sim_dir / "e")
    argv[argv.index("--detections") + 1] = str(empty)
    assert main(argv) == 0
    assert (sim_dir / "e" / "tracks2d.txt").read_text() == ""
    assert (sim_dir / "e" / "tracks3d.txt").read_text().splitlines()[1:] == []


def test_eval_pr_identical_streams(sim_dir, capsys):
    ref = sim_dir / "sim" / "reference.txt"
    cfg = sim_dir / "pr.yaml"
    cfg.write_text(yaml.safe_dump({"iou_grid": [0.5, 0.9], "confidence_grid": [0.3, 0.6], "frame_rate": 23,
                                   "sort": {"min_hits": 1, "max_unmatched_predictions": 0}}))
    assert main(["eval-pr", "--config", str(cfg), "--ref", str(ref), "--cand", str(ref),
                 "--out", str(sim_dir / "pr")]) == 0
    rows = (sim_dir / "pr" / "pr.csv").read_text().splitlines()[1:]
    pure = [r for r in rows if r.startswith("pure")]
    assert pure and all(r.endswith("1.000000,1.000000") for r in pure)
    assert "Pure Detection" in capsys.readouterr().out


def test_eval_pr_from_csv_renders_golden(capsys):
    data = Path(__file__).parent / "data"
    assert main(["eval-pr", "--from-csv", str(data / "pr_iou_sweep.csv")]) == 0
    out = capsys.readouterr().out
    assert out.startswith((data / "pr_iou_sweep.golden.txt").read_text())
    assert main(["eval-3d", "--from-csv", str(data / "position_errors.csv")]) == 0
    assert capsys.readouterr().out == (data / "position_errors.golden.txt").read_text()


def test_simulate_twice_identical(tmp_path):
    scene = tmp_path / "scene.yaml"
    scene.write_text(yaml.safe_dump(SCENE))
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(scene), "--out", str(tmp_path / d), "--seed", "99",
                     "--no-timestamp"]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_calibrate_point_to_plane(tmp_path, capsys, rng):
    obs, truth = plane_problem(rng)
    p = tmp_path / "planes.yaml"
    p.write_text(yaml.safe_dump({
        "initial": transform_to_dict(perturb(rng, truth, 10.0, 0.2)),
        "planes": [{"normal": o.normal.tolist(), "d": o.d, "points": o.lidar_points.tolist()} for o in obs]}))
    assert main(["calibrate", "point-to-plane", "--input", str(p), "--out", str(tmp_path), "--no-timestamp"]) == 0
    out = capsys.readouterr().out
    rms = float(out.split("rms_m:")[1].split()[0])
    assert rms < 1e-6
    doc = yaml.safe_load((tmp_path / "calibration.yaml").read_text())
    assert doc["T_C_L"]["parent"] == "camera"


def test_calibrate_hand_eye(tmp_path, capsys, rng):
    samples, truth = hand_eye_problem(rng, n=8)
    p = tmp_path / "he.yaml"
    p.write_text(yaml.safe_dump({"samples": [{"T_W_MS": transform_to_dict(s.T_W_MS),
                                              "T_Cb_C": transform_to_dict(s.T_Cb_C)} for s in samples]}))
    assert main(["calibrate", "hand-eye", "--input", str(p), "--out", str(tmp_path), "--no-timestamp"]) == 0
    assert "rotation_deg" in capsys.readouterr().out


def test_unknown_subcommand_exit_2():
    proc = subprocess.run([sys.executable, "-m", "vlfusion.cli", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage" in proc.stderr
