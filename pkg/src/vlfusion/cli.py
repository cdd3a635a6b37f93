"""Command-line entry point: ``vlfusion {run,eval-pr,eval-3d,simulate,calibrate}``.

Settings come from defaults, then the ``--config`` YAML file, then flags, each
overriding the previous. Logs go to stderr; stdout only carries the text
tables. Exit codes: 0 success, 2 configuration error (including missing input
files), 3 data error (malformed or inconsistent input data).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from pathlib import Path

import yaml

from .calibration import (
    CalibrationError,
    load_hand_eye_samples,
    load_plane_observations,
    solve_eye_in_hand,
    solve_point_to_plane,
)
from .dataio import DataError, Source, load_detections, load_poses, load_scans, write_detections
from .evaluation import (
    CONF_GRID,
    IOU_GRID,
    REFERENCE_MIN_CONFIDENCE,
    pair_frames,
    pair_sweep_with_tracking,
    position_errors,
)
from .geometry import CalibrationFormatError, calibration_to_dict, load_calibration, transform_to_dict
from .pipeline import (
    ConfigError,
    PipelineConfig,
    load_tracks3d,
    load_yaml,
    pipeline_config_from_dict,
    records_to_estimates,
    run_pipeline,
    with_overrides,
    write_tracks3d,
)
from .reports import (
    error_values,
    pr_values,
    read_error_csv,
    read_pr_csv,
    render_error_table,
    render_pr_table,
    write_error_csv,
    write_pr_csv,
)
from .simulator import SceneConfigError, load_scene, scene_from_dict, simulate, write_output
from .sort2d import SortParams

log = logging.getLogger("vlfusion")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _header(args) -> list[str]:
    if getattr(args, "no_timestamp", False):
        return []
    now = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return [f"generated {now}"]


def _config_doc(args) -> tuple[dict, Path]:
    if getattr(args, "config", None):
        return load_yaml(args.config), Path(args.config).resolve().parent
    return {}, Path.cwd()


def _out_dir(args, default) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# run


def cmd_run(args) -> int:
    doc, base = _config_doc(args)
    cfg = pipeline_config_from_dict(doc, base)
    cfg = with_overrides(
        cfg,
        detections=Path(args.detections) if args.detections else None,
        scans=Path(args.scans) if args.scans else None,
        calibration=Path(args.calibration) if args.calibration else None,
        out=Path(args.out) if args.out else None,
        source=Source(args.source) if args.source else None,
        raw_3d=True if args.raw_3d else None,
    )
    cfg.require_inputs("detections", "scans", "calibration")
    return run_with_config(cfg, _header(args))


def run_with_config(cfg: PipelineConfig, header=()) -> int:
    calib = load_calibration(cfg.calibration)
    dets = load_detections(cfg.detections)
    other = sum(1 for d in dets if d.source != cfg.source)
    if other:
        log.warning("%d detection(s) are not from source %s; tracking them with %s parameters",
                    other, cfg.source.value, cfg.source.value)
    scans = load_scans(cfg.scans)
    log.info("%d detections (%s), %d scans", len(dets), cfg.source.value, len(scans))
    res = run_pipeline(dets, scans, calib, cfg.sort_params, cfg.fusion, cfg.track3d,
                       raw_3d=cfg.raw_3d, frame_rate=cfg.frame_rate)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_detections(out / "tracks2d.txt", res.tracks2d, list(header))
    write_tracks3d(out / "tracks3d.txt", res.tracks3d, "raw" if cfg.raw_3d else "filtered", cfg.source, header)
    log.info("wrote %s and %s", out / "tracks2d.txt", out / "tracks3d.txt")
    return EXIT_OK


# --------------------------------------------------------------------------
# eval-pr


def _grid(values, default):
    return tuple(float(v) for v in values) if values else default


def cmd_eval_pr(args) -> int:
    doc, base = _config_doc(args)
    if args.from_csv:
        values = read_pr_csv(args.from_csv)
        _print_pr(values, float(doc.get("fixed_confidence", 0.3)), float(doc.get("fixed_iou", 0.5)))
        return EXIT_OK

    def path(key, flag):
        v = flag or doc.get(key)
        if v is None:
            raise ConfigError(f"missing required path: {key}")
        p = Path(v) if flag or Path(v).is_absolute() else base / v
        if not p.is_file():
            raise ConfigError(f"{key} file not found: {p}")
        return p

    ref_path = path("reference", args.ref)
    cand_path = path("candidate", args.cand)
    source = Source(args.source or doc.get("source", "event"))
    sort_over = dict(doc.get("sort") or {})
    try:
        params = SortParams.for_source(source, **sort_over)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sort options: {exc}") from None
    iou_grid = _grid(doc.get("iou_grid"), IOU_GRID)
    conf_grid = _grid(doc.get("confidence_grid"), CONF_GRID)
    ref_min = float(doc.get("reference_min_confidence", REFERENCE_MIN_CONFIDENCE))
    rate = doc.get("frame_rate")

    ref = load_detections(ref_path)
    cand = load_detections(cand_path)
    frames = pair_frames(ref, cand, 1.0 / float(rate) if rate else None)
    pure, tracked = pair_sweep_with_tracking(frames, params, iou_grid, conf_grid, ref_min)
    values = pr_values("pure", pure) + pr_values("tracked", tracked)
    out = _out_dir(args, doc.get("out", "."))
    write_pr_csv(out / "pr.csv", values)
    log.info("wrote %s", out / "pr.csv")
    _print_pr(values, float(doc.get("fixed_confidence", conf_grid[0])), float(doc.get("fixed_iou", iou_grid[0])))
    return EXIT_OK


def _print_pr(values, fixed_conf, fixed_iou):
    sys.stdout.write(render_pr_table(values, "iou", fixed_conf))
    sys.stdout.write("\n")
    sys.stdout.write(render_pr_table(values, "confidence", fixed_iou))


# --------------------------------------------------------------------------
# eval-3d


def cmd_eval_3d(args) -> int:
    doc, base = _config_doc(args)
    if args.from_csv:
        sys.stdout.write(render_error_table(read_error_csv(args.from_csv)))
        return EXIT_OK

    def resolve(v, from_flag):
        p = Path(v) if from_flag or Path(v).is_absolute() else base / v
        if not p.is_file():
            raise ConfigError(f"file not found: {p}")
        return p

    track_paths = [resolve(p, True) for p in args.tracks] if args.tracks else \
        [resolve(p, False) for p in doc.get("tracks", [])]
    if not track_paths:
        raise ConfigError("no 3D track files given")
    if not (args.poses or doc.get("poses")):
        raise ConfigError("missing required path: poses")
    if not (args.calibration or doc.get("calibration")):
        raise ConfigError("missing required path: calibration")
    poses_path = resolve(args.poses or doc["poses"], bool(args.poses))
    calib_path = resolve(args.calibration or doc["calibration"], bool(args.calibration))
    class_map = doc.get("subject_for_class") or {}

    gt = load_poses(poses_path)
    calib = load_calibration(calib_path)
    values = []
    for p in track_paths:
        records, meta = load_tracks3d(p)
        method = "filtering" if meta.get("mode") == "raw" else "cvkf"
        source = meta.get("source", "rgb")
        report = position_errors(records_to_estimates(records), gt, calib, subject_for_class=class_map)
        if report.unassociated:
            log.warning("%s: %d estimate(s) not associated with any person", p, report.unassociated)
        log.info("%s: %s/%s, %d samples", p, method, source, report.n)
        values.extend(error_values(method, source, report))
    out = _out_dir(args, doc.get("out", "."))
    write_error_csv(out / "errors.csv", values)
    log.info("wrote %s", out / "errors.csv")
    sys.stdout.write(render_error_table(values))
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("simulate needs --config <scene.yaml>")
    if args.seed is not None:
        doc = load_yaml(args.config)
        doc["seed"] = args.seed
        scene = scene_from_dict(doc)
    else:
        scene = load_scene(args.config)
    out = _out_dir(args, "sim")
    result = simulate(scene)
    paths = write_output(result, out, _header(args))
    log.info("simulated %d detections, %d scans, %d poses into %s",
             len(result.detections), len(result.scans), len(result.poses), out)
    for key, p in paths.items():
        log.debug("%s: %s", key, p)
    return EXIT_OK


# --------------------------------------------------------------------------
# calibrate


def cmd_calibrate(args) -> int:
    doc, base = _config_doc(args)
    inp = args.input or doc.get("input")
    if not inp:
        raise ConfigError("calibrate needs --input")
    inp = Path(inp) if args.input or Path(inp).is_absolute() else base / inp
    if not inp.is_file():
        raise ConfigError(f"input file not found: {inp}")
    out = _out_dir(args, doc.get("out", "."))
    if args.mode == "hand-eye":
        result = solve_eye_in_hand(load_hand_eye_samples(inp))
        key = "T_C_MS"
        residuals = {"rotation_deg": float(result.rotation_residual * 180.0 / 3.141592653589793),
                     "translation_m": float(result.translation_residual), "pairs": result.n_pairs}
    else:
        obs, initial = load_plane_observations(inp)
        result = solve_point_to_plane(obs, initial)
        key = "T_C_L"
        residuals = {"rms_m": float(result.rms), "iterations": result.iterations}
    for name, value in residuals.items():
        print(f"{name}: {value:.3e}" if isinstance(value, float) else f"{name}: {value}")

    base_calib = args.calibration or doc.get("calibration")
    if base_calib:
        calib = load_calibration(base_calib)
        doc_out = calibration_to_dict(calib)
        doc_out[key] = transform_to_dict(result.transform)
    else:
        doc_out = {key: transform_to_dict(result.transform)}
    doc_out["residuals"] = residuals
    target = out / "calibration.yaml"
    with open(target, "w", encoding="utf-8") as fh:
        for h in _header(args):
            fh.write(f"# {h}\n")
        yaml.safe_dump(doc_out, fh, sort_keys=False, default_flow_style=None)
    log.info("wrote %s", target)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vlfusion", description="Vision-LiDAR 3D object tracking pipeline.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def common(sp, source=False):
        sp.add_argument("--config", help="YAML config file (flags override it)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--no-timestamp", action="store_true", help="omit the generation-time header line")
        if source:
            sp.add_argument("--source", choices=[s.value for s in Source], help="detection source")

    r = sub.add_parser("run", help="2D tracking, LiDAR fusion and 3D tracking")
    common(r, source=True)
    r.add_argument("--detections", help="detections file")
    r.add_argument("--scans", help="LiDAR scans file")
    r.add_argument("--calibration", help="calibration YAML")
    r.add_argument("--raw-3d", action="store_true", help="write raw median points instead of filtered tracks")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval-pr", help="precision/recall of a detector against a reference")
    common(e, source=True)
    e.add_argument("--ref", help="reference detections")
    e.add_argument("--cand", help="candidate detections")
    e.add_argument("--from-csv", help="re-render tables from a PR CSV")
    e.set_defaults(func=cmd_eval_pr)

    t = sub.add_parser("eval-3d", help="3D position error against motion-capture ground truth")
    common(t)
    t.add_argument("--tracks", nargs="+", help="3D track files")
    t.add_argument("--poses", help="ground-truth poses")
    t.add_argument("--calibration", help="calibration YAML")
    t.add_argument("--from-csv", help="re-render the table from an error CSV")
    t.set_defaults(func=cmd_eval_3d)

    s = sub.add_parser("simulate", help="generate a synthetic scene")
    common(s)
    s.add_argument("--seed", type=int, help="override the scene seed")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", help="extrinsic calibration")
    common(c)
    c.add_argument("mode", choices=["hand-eye", "point-to-plane"])
    c.add_argument("--input", help="samples (hand-eye) or planes (point-to-plane) YAML")
    c.add_argument("--calibration", help="existing calibration to update")
    c.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose + 1, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SceneConfigError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (DataError, CalibrationFormatError, CalibrationError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
