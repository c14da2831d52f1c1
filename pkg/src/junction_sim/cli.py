"""Command-line entry point tying the library into user workflows:
coverage analysis, camera placement planning, recording simulation,
perception runs, and the planner HTTP service.

Exit codes: 0 success (runs with frame drops included — drops are data),
2 invalid input, 3 infeasible optimization, 4 corrupt recording.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .coverage import (
    GridSpec,
    PlacementCandidate,
    compute_coverage,
    coverage_report,
    enumerate_stereo_pairs,
)
from .errors import (
    CorruptFileError,
    CorruptRecordingError,
    InfeasiblePlacementError,
    InvalidArgumentError,
    PipelineConfigError,
    SchemaViolationError,
    UnsupportedVersionError,
)
from .perception import DEFAULT_START_UTC_NS, NoiseConfig, run_perception
from .pipeline import (
    PipelineConfig,
    read_recording,
    run_pipeline,
    storage_duration,
    write_recording,
)
from .scenario_io import (
    load_scenario,
    save_grid,
    save_trajectories,
    scenario_hash,
)
from .scene import Scenario, actor_pose_at
from . import coverage as _coverage


def scenario_grid_spec(s: Scenario, cell_m: float) -> GridSpec:
    """Grid covering all layout geometry (lanes, crosswalks, approaches,
    inner region, occluders) with a small margin."""
    xs: list[float] = []
    ys: list[float] = []

    def add(points):
        for x, y in points:
            xs.append(float(x))
            ys.append(float(y))

    add(s.layout.roi_inner)
    for lane in s.layout.lanes:
        add(lane.centerline)
    for crosswalk in s.layout.crosswalks:
        add(crosswalk.polygon)
    for approach in s.layout.approaches:
        add(approach.polyline)
    for occluder in s.occluders:
        add(occluder.footprint)
    if not xs:
        raise InvalidArgumentError("scenario has no layout geometry to grid")
    pad = 2.0 + cell_m
    return GridSpec.from_bounds((min(xs) - pad, min(ys) - pad),
                                (max(xs) + pad, max(ys) + pad), cell_m)


# ---------------------------------------------------------------------------
# report rendering

def _text_lines(value, prefix=""):
    if isinstance(value, dict):
        for key, item in value.items():
            yield from _text_lines(item, f"{prefix}{key}." if isinstance(
                item, dict) else f"{prefix}{key}")
    elif isinstance(value, str):
        yield f"{prefix}: {value}"
    else:
        # json rendering so numbers are string-identical to --json mode
        yield f"{prefix}: {json.dumps(value)}"


def emit_report(report: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for line in _text_lines(report):
            print(line)


def _metrics_dict(report) -> dict:
    return {
        "stereo_fraction_inner": report.stereo_fraction_inner,
        "mono_fraction_inner": report.mono_fraction_inner,
        "crosswalk_stereo_fractions": {
            str(i): f for i, f in report.crosswalk_stereo_fractions},
        "approach_covered_m": dict(report.approach_covered_m),
        "bicycle_stereo_fraction": report.bicycle_stereo_fraction,
    }


def _pairs_list(pairs) -> list[dict]:
    return [{"cam_a": p.cam_a, "cam_b": p.cam_b,
             "axis_angle_deg": p.axis_angle_deg, "overlap_m2": p.overlap_m2}
            for p in pairs]


# ---------------------------------------------------------------------------
# subcommands

def cmd_coverage(args) -> int:
    s = load_scenario(args.scenario)
    spec = scenario_grid_spec(s, args.cell)
    grid = compute_coverage(s, spec, threads=args.threads)
    pairs = enumerate_stereo_pairs(s.cameras)
    report = {
        "command": "coverage",
        "scenario_sha256": scenario_hash(s),
        "seed": args.seed,
        "cell_m": args.cell,
        "grid": {"cols": spec.cols, "rows": spec.rows,
                 "origin_m": [spec.origin_m[0], spec.origin_m[1]]},
        "stereo_pair_count": len(pairs),
        "stereo_pairs": _pairs_list(pairs),
        "metrics": _metrics_dict(coverage_report(grid, s.layout)),
    }
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        save_grid(grid, args.out / "grid.cgrd")
        (args.out / "coverage_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n")
    emit_report(report, args.json)
    return 0


def load_candidates(path) -> list[PlacementCandidate]:
    """Candidate pole file: a JSON array of objects with pole_id, x_m,
    y_m, height_m, yaw_deg and optional pitch_deg."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaViolationError(f"candidates file: {err}")
    if not isinstance(data, list) or not data:
        raise SchemaViolationError("candidates file must be a non-empty JSON array")
    out = []
    for i, item in enumerate(data):
        if not isinstance(item, dict):
            raise SchemaViolationError(f"candidates[{i}] must be an object")
        try:
            out.append(PlacementCandidate(
                pole_id=str(item["pole_id"]),
                position_m=(float(item["x_m"]), float(item["y_m"])),
                height_m=float(item["height_m"]),
                yaw_rad=math.radians(float(item["yaw_deg"])),
                pitch_rad=math.radians(float(item.get("pitch_deg", 15.0)))))
        except KeyError as err:
            raise SchemaViolationError(f"candidates[{i}] missing key {err}")
        except (TypeError, ValueError) as err:
            raise SchemaViolationError(f"candidates[{i}]: {err}")
    return out


def cmd_plan(args) -> int:
    s = load_scenario(args.scenario)
    candidates = load_candidates(args.candidates)
    spec = scenario_grid_spec(s, args.cell)
    result = _coverage.optimize_placement(s, candidates, args.n,
                                          grid_spec=spec, seed=args.seed)
    report = {
        "command": "plan",
        "scenario_sha256": scenario_hash(s),
        "seed": args.seed,
        "cell_m": args.cell,
        "n_cameras": args.n,
        "objective": result.objective,
        "greedy_objective": result.greedy_objective,
        "selected": [{
            "camera_id": sel.camera.id,
            "pole_id": sel.candidate.pole_id,
            "x_m": sel.candidate.position_m[0],
            "y_m": sel.candidate.position_m[1],
            "height_m": sel.candidate.height_m,
            "yaw_deg": math.degrees(sel.camera.pose.yaw_rad),
            "yaw_offset_deg": sel.yaw_offset_deg,
        } for sel in result.selected],
        "metrics": _metrics_dict(result.report),
    }
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "placement.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n")
    emit_report(report, args.json)
    return 0


def parse_budget_tb(text: str) -> float:
    t = text.strip().upper()
    if t.endswith("TB"):
        t = t[:-2]
    try:
        value = float(t)
    except ValueError:
        raise InvalidArgumentError(f"--budget must look like '576TB', got {text!r}")
    if value <= 0:
        raise InvalidArgumentError("--budget must be positive")
    return value


def cmd_record(args) -> int:
    s = load_scenario(args.scenario)
    config = PipelineConfig(workers=args.workers,
                            worker_throughput_fps=args.worker_fps)
    stats, handle = run_pipeline(s, config, duration_s=args.duration)
    per_camera_written: dict[str, int] = {}
    for stamp in handle.stamps:
        key = str(stamp.camera_id)
        per_camera_written[key] = per_camera_written.get(key, 0) + 1
    report = {
        "command": "record",
        "scenario_sha256": handle.scenario_sha256,
        "seed": args.seed,
        "config": config.to_manifest_dict(),
        "stats": stats.as_dict(),
        "frames_written_per_camera": per_camera_written,
    }
    if args.budget is not None:
        budget_tb = parse_budget_tb(args.budget)
        seconds = storage_duration(budget_tb, stats.aggregate_bitrate_bps,
                                   args.ratio)
        report["storage"] = {
            "budget_tb": budget_tb,
            "ratio": args.ratio,
            "duration_days": seconds / 86_400.0,
        }
    if args.out:
        report["recording_dir"] = str(write_recording(handle, args.out))
    emit_report(report, args.json)
    return 0


def _accuracy_block(s: Scenario, tracks) -> dict | None:
    """Max and RMS plane error of confirmed tracks against the nearest
    ground-truth actor (by mean distance over the track's lifetime)."""
    errors: list[float] = []
    for track in tracks:
        if not track.confirmed:
            continue
        best: list[float] | None = None
        for actor in s.actors:
            errs = []
            for p in track.history:
                t = (p.trigger_utc_ns - DEFAULT_START_UTC_NS) / 1e9
                pose = actor_pose_at(actor, t)
                if pose is not None:
                    errs.append(math.hypot(p.x_m - pose[0], p.y_m - pose[1]))
            if errs and (best is None
                         or sum(errs) / len(errs) < sum(best) / len(best)):
                best = errs
        if best:
            errors.extend(best)
    if not errors:
        return None
    return {
        "max_error_m": max(errors),
        "rmse_m": math.sqrt(sum(e * e for e in errors) / len(errors)),
        "samples": len(errors),
    }


def cmd_perceive(args) -> int:
    s = load_scenario(args.scenario)
    if args.recording is not None:
        manifest, _, _ = read_recording(args.recording)
        if manifest["scenario_sha256"] != scenario_hash(s):
            raise InvalidArgumentError(
                "recording was made from a different scenario")
    noise = NoiseConfig(sigma_px=args.sigma_px, miss_base=args.miss_base,
                        fp_rate_per_frame=args.fp_rate, seed=args.seed)
    result = run_perception(s, noise, duration_s=args.duration)
    report = {
        "command": "perceive",
        "scenario_sha256": scenario_hash(s),
        "seed": args.seed,
        "noise": {"sigma_px": noise.sigma_px, "miss_base": noise.miss_base,
                  "fp_rate_per_frame": noise.fp_rate_per_frame},
        "stats": {
            "frames": result.stats.frames,
            "detections": result.stats.detections,
            "observations": result.stats.observations,
            "fused_observations": result.stats.fused_observations,
            "tracks_created": result.stats.tracks_created,
            "tracks_confirmed": result.stats.tracks_confirmed,
        },
        "trajectory_records": len(result.records),
    }
    accuracy = _accuracy_block(s, result.tracks)
    if accuracy is not None:
        report["accuracy"] = accuracy
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / "trajectories.jsonl"
        save_trajectories(list(result.records), path)
        report["trajectories_file"] = str(path)
    emit_report(report, args.json)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .planner_api import create_app

    static = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(load_scenario(args.scenario),
                     static_dir=static if static.is_dir() else None)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="junction-sim",
        description="Deterministic smart-junction camera toolkit: coverage, "
                    "placement, recording and perception simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", type=Path, required=True,
                       help="scenario JSON file")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=0,
                       help="seed echoed in reports and used by stochastic stages")
        p.add_argument("--json", action="store_true",
                       help="machine-readable report on stdout")

    cov = sub.add_parser("coverage", help="compute the coverage grid and metrics")
    common(cov)
    cov.add_argument("--cell", type=float, default=0.5, help="grid cell size, m")
    cov.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: JUNCTION_SIM_THREADS or 1)")
    cov.set_defaults(func=cmd_coverage)

    plan = sub.add_parser("plan", help="optimize camera placement over candidate poles")
    common(plan)
    plan.add_argument("--candidates", type=Path, required=True,
                      help="candidate pole JSON file")
    plan.add_argument("--n", type=int, required=True, help="cameras to place")
    plan.add_argument("--cell", type=float, default=2.0, help="grid cell size, m")
    plan.set_defaults(func=cmd_plan)

    rec = sub.add_parser("record", help="simulate the recording pipeline")
    common(rec)
    rec.add_argument("--duration", type=float, default=None,
                     help="override scenario duration, s")
    rec.add_argument("--workers", type=int, default=3,
                     help="encoder workers (2 streams each)")
    rec.add_argument("--worker-fps", type=float, default=75.0,
                     dest="worker_fps", help="encode throughput per worker")
    rec.add_argument("--budget", type=str, default=None,
                     help="storage budget for the duration report, e.g. 576TB")
    rec.add_argument("--ratio", type=float, default=8.0,
                     help="compression ratio assumed for --budget")
    rec.set_defaults(func=cmd_record)

    per = sub.add_parser("perceive", help="run the synthetic perception chain")
    common(per)
    per.add_argument("--duration", type=float, default=None,
                     help="override scenario duration, s")
    per.add_argument("--recording", type=Path, default=None,
                     help="verify and reference an existing recording directory")
    per.add_argument("--sigma-px", type=float, default=0.0, dest="sigma_px")
    per.add_argument("--miss-base", type=float, default=0.0, dest="miss_base")
    per.add_argument("--fp-rate", type=float, default=0.0, dest="fp_rate")
    per.set_defaults(func=cmd_perceive)

    srv = sub.add_parser("serve", help="serve the planner HTTP API")
    srv.add_argument("--scenario", type=Path, required=True)
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CorruptRecordingError as err:
        print(f"error: corrupt recording: {err}", file=sys.stderr)
        return 4
    except InfeasiblePlacementError as err:
        print(f"error: infeasible placement: {err}", file=sys.stderr)
        return 3
    except (InvalidArgumentError, SchemaViolationError, PipelineConfigError,
            UnsupportedVersionError, CorruptFileError, FileNotFoundError,
            IsADirectoryError, NotADirectoryError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
