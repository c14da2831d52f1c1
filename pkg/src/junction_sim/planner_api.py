"""Local HTTP/WebSocket service for the interactive placement loop.

One scenario lives in memory behind a single asyncio lock (one writer).
Edits bump a monotonically increasing version; coverage recomputation
runs on an immutable snapshot in a worker thread with cooperative
row-slab cancellation, so a newly accepted job displaces a running one.
Results carry the version they were computed for and never overwrite a
newer grid.
"""
from __future__ import annotations

import asyncio
import dataclasses
import json
import math
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles

from .coverage import (
    GridSpec,
    compute_coverage,
    coverage_report,
    enumerate_stereo_pairs,
)
from .errors import OperationCancelledError
from .scene import Scenario, validate_scenario
from .scenario_io import grid_to_bytes, scenario_hash, scenario_to_dict

_POSE_FIELDS = ("position_m", "yaw_rad", "pitch_rad", "roll_rad")
_INTRINSIC_FIELDS = ("width_px", "height_px", "fx_px", "fy_px", "cx_px", "cy_px")


class _Job:
    """One recompute: snapshot version, cooperative cancel flag, progress."""

    def __init__(self, version: int):
        self.version = version
        self.cancelled = False
        self.progress = 0.0
        self.status = "running"

    def should_cancel(self) -> bool:
        return self.cancelled


class SessionState:
    """Single owner of the editable scenario and the latest grid."""

    def __init__(self, scenario: Scenario, *, paper_faithful: bool,
                 grid_spec: GridSpec | None):
        self.scenario = scenario
        self.version = 1
        self.paper_faithful = paper_faithful
        self.grid_spec = grid_spec
        self.grid = None
        self.metrics = None
        self.grid_version: int | None = None
        self.job: _Job | None = None
        self.job_task: asyncio.Task | None = None
        self.lock = asyncio.Lock()
        self.sockets: set[WebSocket] = set()

    @property
    def job_status(self) -> dict:
        if self.job is None:
            return {"status": "idle"}
        if self.job.status == "running":
            return {"status": "running", "progress": self.job.progress,
                    "version": self.job.version}
        return {"status": self.job.status, "version": self.job.version}

    async def broadcast(self, event: dict) -> None:
        dead = []
        for ws in self.sockets:
            try:
                await ws.send_text(json.dumps(event))
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.sockets.discard(ws)


def _default_grid_spec(s: Scenario, cell_m: float) -> GridSpec:
    xs = [p[0] for p in s.layout.roi_inner]
    ys = [p[1] for p in s.layout.roi_inner]
    pad = 30.0
    return GridSpec.from_bounds((min(xs) - pad, min(ys) - pad),
                                (max(xs) + pad, max(ys) + pad), cell_m)


def _metrics_dict(report) -> dict:
    return {
        "stereo_fraction_inner": report.stereo_fraction_inner,
        "mono_fraction_inner": report.mono_fraction_inner,
        "crosswalk_stereo_fractions": {
            str(i): f for i, f in report.crosswalk_stereo_fractions},
        "approach_covered_m": dict(report.approach_covered_m),
        "bicycle_stereo_fraction": report.bicycle_stereo_fraction,
    }


def _apply_camera_patch(camera, patch: dict):
    """Return the camera with patched fields replaced.

    The patch mirrors the scenario document's camera shape: flat pose
    fields (`position_m`, `yaw_rad`, `pitch_rad`, `roll_rad`), a nested
    partial `intrinsics` object, and `max_range_m`. Raises HTTPException
    422 with the offending entity path on unknown or malformed fields;
    scenario-level invariants are checked separately after patching.
    """
    def bad(entity: str, message: str):
        return HTTPException(status_code=422, detail=[
            {"entity": entity, "message": message}])

    prefix = f"cameras[{camera.id}]"
    body = dict(patch)
    body.pop("version", None)

    pose_kwargs = {}
    for key in _POSE_FIELDS:
        if key not in body:
            continue
        value = body.pop(key)
        if key == "position_m":
            try:
                pose_kwargs[key] = tuple(float(v) for v in value)
            except (TypeError, ValueError):
                raise bad(f"{prefix}.position_m", "must be [x, y, z] numbers")
            if len(pose_kwargs[key]) != 3:
                raise bad(f"{prefix}.position_m",
                          "must have exactly 3 components")
        else:
            try:
                pose_kwargs[key] = float(value)
            except (TypeError, ValueError):
                raise bad(f"{prefix}.{key}", "must be a number")
        flat = pose_kwargs[key] if key == "position_m" else (pose_kwargs[key],)
        if not all(math.isfinite(v) for v in flat):
            raise bad(f"{prefix}.{key}", "must be finite")

    intr_kwargs = {}
    intr_patch = body.pop("intrinsics", None)
    if intr_patch is not None:
        if not isinstance(intr_patch, dict):
            raise bad(f"{prefix}.intrinsics", "must be an object")
        for key, value in intr_patch.items():
            if key not in _INTRINSIC_FIELDS:
                raise bad(f"{prefix}.intrinsics.{key}",
                          "unknown intrinsics field")
            try:
                intr_kwargs[key] = (int(value) if key.endswith("_px")
                                    and key.startswith(("width", "height"))
                                    else float(value))
            except (TypeError, ValueError):
                raise bad(f"{prefix}.intrinsics.{key}", "must be a number")

    max_range = body.pop("max_range_m", None)
    if body:
        key = sorted(body)[0]
        raise bad(f"{prefix}.{key}", "unknown camera field")

    camera_kwargs = {}
    if pose_kwargs:
        camera_kwargs["pose"] = dataclasses.replace(camera.pose, **pose_kwargs)
    if intr_kwargs:
        try:
            camera_kwargs["intrinsics"] = dataclasses.replace(
                camera.intrinsics, **intr_kwargs)
        except Exception as err:
            raise bad(f"{prefix}.intrinsics", str(err))
    if max_range is not None:
        try:
            camera_kwargs["max_range_m"] = float(max_range)
        except (TypeError, ValueError):
            raise bad(f"{prefix}.max_range_m", "must be a number")
    if not camera_kwargs:
        raise bad(prefix, "patch contains no editable fields")
    try:
        return dataclasses.replace(camera, **camera_kwargs)
    except Exception as err:  # constructor-level validation
        raise bad(prefix, str(err))


async def _run_recompute(state: SessionState, job: _Job,
                         snapshot: Scenario) -> None:
    loop = asyncio.get_running_loop()
    spec = state.grid_spec or _default_grid_spec(snapshot, 1.0)

    def on_progress(fraction: float) -> None:
        job.progress = fraction
        asyncio.run_coroutine_threadsafe(
            state.broadcast({"type": "job_progress", "version": job.version,
                             "progress": fraction}), loop)

    try:
        grid = await loop.run_in_executor(None, lambda: compute_coverage(
            snapshot, spec, progress=on_progress,
            should_cancel=job.should_cancel))
    except OperationCancelledError:
        job.status = "cancelled"
        await state.broadcast({"type": "job_done", "version": job.version,
                               "status": "cancelled"})
        return
    job.status = "done"
    async with state.lock:
        if state.grid_version is None or job.version >= state.grid_version:
            state.grid = grid
            state.metrics = coverage_report(grid, snapshot.layout)
            state.grid_version = job.version
    await state.broadcast({"type": "job_done", "version": job.version,
                           "status": "done"})


def create_app(scenario: Scenario, *, paper_faithful: bool = True,
               grid_spec: GridSpec | None = None,
               static_dir=None) -> FastAPI:
    violations = validate_scenario(scenario, paper_faithful=paper_faithful)
    if violations:
        v = violations[0]
        raise ValueError(f"initial scenario invalid: {v.entity}: {v.detail}")

    state = SessionState(scenario, paper_faithful=paper_faithful,
                         grid_spec=grid_spec)
    app = FastAPI(title="junction planner")
    app.state.session = state

    @app.get("/api/scenario")
    async def get_scenario():
        async with state.lock:
            return {"version": state.version,
                    "scenario_sha256": scenario_hash(state.scenario),
                    "scenario": scenario_to_dict(state.scenario),
                    "job": state.job_status}

    @app.put("/api/cameras/{camera_id}")
    async def put_camera(camera_id: int, patch: dict = Body(...)):
        async with state.lock:
            if "version" not in patch:
                raise HTTPException(status_code=422, detail=[
                    {"entity": "version", "message": "version is required"}])
            if int(patch["version"]) != state.version:
                raise HTTPException(status_code=409, detail={
                    "message": "stale version",
                    "current_version": state.version})
            cameras = list(state.scenario.cameras)
            index = next((i for i, c in enumerate(cameras)
                          if c.id == camera_id), None)
            if index is None:
                raise HTTPException(status_code=404,
                                    detail=f"no camera with id {camera_id}")
            cameras[index] = _apply_camera_patch(cameras[index], patch)
            candidate = dataclasses.replace(state.scenario,
                                            cameras=tuple(cameras))
            violations = validate_scenario(
                candidate, paper_faithful=state.paper_faithful)
            if violations:
                raise HTTPException(status_code=422, detail=[
                    {"entity": v.entity, "rule": v.rule, "message": v.detail}
                    for v in violations])
            state.scenario = candidate
            state.version += 1
            version = state.version
        await state.broadcast({"type": "version_changed", "version": version})
        return {"version": version}

    @app.post("/api/coverage/recompute", status_code=202)
    async def recompute():
        while True:
            async with state.lock:
                if state.job is None or state.job.status != "running":
                    job = _Job(state.version)
                    state.job = job
                    snapshot = state.scenario
                    state.job_task = asyncio.create_task(
                        _run_recompute(state, job, snapshot))
                    return {"accepted": True, "version": job.version}
                state.job.cancelled = True
                task = state.job_task
            if task is not None:
                await task

    @app.get("/api/coverage/grid")
    async def get_grid():
        async with state.lock:
            if state.grid is None:
                raise HTTPException(status_code=404,
                                    detail="no coverage computed yet")
            payload = grid_to_bytes(state.grid)
            headers = {
                "X-Grid-Version": str(state.grid_version),
                "X-Coverage-Metrics": json.dumps(
                    _metrics_dict(state.metrics), sort_keys=True),
            }
        return Response(content=payload,
                        media_type="application/octet-stream",
                        headers=headers)

    @app.get("/api/coverage/status")
    async def get_status():
        async with state.lock:
            return {"version": state.version,
                    "grid_version": state.grid_version,
                    "job": state.job_status}

    @app.get("/api/pairs")
    async def get_pairs():
        async with state.lock:
            pairs = enumerate_stereo_pairs(state.scenario.cameras)
            return {"version": state.version,
                    "pairs": [{"cam_a": p.cam_a, "cam_b": p.cam_b,
                               "axis_angle_deg": p.axis_angle_deg,
                               "overlap_m2": p.overlap_m2} for p in pairs]}

    @app.websocket("/api/events")
    async def events(ws: WebSocket):
        await ws.accept()
        state.sockets.add(ws)
        try:
            while True:
                await ws.receive_text()
        except WebSocketDisconnect:
            pass
        finally:
            state.sockets.discard(ws)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")
    return app
