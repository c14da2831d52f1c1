"""Serialization for scenarios, coverage grids, trajectories, and
recording manifests.

Text formats use canonical JSON — sorted keys, floats as %.6f, 2-space
indent, LF, trailing newline, scalar-only arrays inline — so golden-file
comparisons are byte-stable. Binary grid files carry a magic, a version,
and a trailing CRC32. Full schemas live in docs/formats.md.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coverage import CoverageGrid
from .errors import (
    CorruptFileError,
    InvalidArgumentError,
    SchemaViolationError,
    UnsupportedVersionError,
)
from .geometry import CameraIntrinsics, CameraModel, CameraPose
from .scene import (
    Actor,
    Approach,
    BoxShape,
    Crosswalk,
    CylinderShape,
    JunctionLayout,
    Lane,
    Occluder,
    Scenario,
    Violation,
    WeatherState,
    validate_scenario,
)

SCENARIO_SCHEMA_VERSION = 1
TRAJECTORY_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1
GRID_FORMAT_VERSION = 1

_GRID_MAGIC = b"CGRD"
_GRID_HEADER = struct.Struct("<4sHHdddII")  # magic, version, reserved, ox, oy, cell, cols, rows
_GRID_CELL = struct.Struct("<QHH")          # visible_mask, mono_count, stereo_pairs


# ---------------------------------------------------------------------------
# canonical JSON

def _format_float(v: float) -> str:
    if not math.isfinite(v):
        raise InvalidArgumentError("non-finite float cannot be serialized")
    out = f"{v:.6f}"
    # -0.0 and tiny negatives would render as "-0.000000", breaking the
    # parse/format fixpoint
    return "0.000000" if out == "-0.000000" else out


def _is_scalar(v) -> bool:
    return v is None or isinstance(v, (bool, int, float, str))


def _canonical(obj, indent: int) -> str:
    pad = "  " * indent
    child_pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise InvalidArgumentError("object keys must be strings")
            parts.append(f"{child_pad}{json.dumps(key)}: {_canonical(obj[key], indent + 1)}")
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        items = list(obj)
        if not items:
            return "[]"
        if all(_is_scalar(v) for v in items):
            return "[" + ", ".join(_canonical(v, 0) for v in items) + "]"
        parts = [f"{child_pad}{_canonical(v, indent + 1)}" for v in items]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    raise InvalidArgumentError(f"cannot canonically serialize {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Deterministic text rendering: sorted keys, %.6f floats, LF endings."""
    return _canonical(obj, 0) + "\n"


# ---------------------------------------------------------------------------
# scenario <-> plain data

def _point_list(points) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in points]


def _intrinsics_to_dict(intr: CameraIntrinsics) -> dict:
    return {"width_px": intr.width_px, "height_px": intr.height_px,
            "fx_px": float(intr.fx_px), "fy_px": float(intr.fy_px),
            "cx_px": float(intr.cx_px), "cy_px": float(intr.cy_px)}


def _camera_to_dict(cam: CameraModel) -> dict:
    return {
        "id": cam.id,
        "intrinsics": _intrinsics_to_dict(cam.intrinsics),
        "position_m": [float(c) for c in cam.pose.position_m],
        "yaw_rad": float(cam.pose.yaw_rad),
        "pitch_rad": float(cam.pose.pitch_rad),
        "roll_rad": float(cam.pose.roll_rad),
        "max_range_m": float(cam.max_range_m),
    }


def _shape_to_dict(shape) -> dict:
    if isinstance(shape, CylinderShape):
        return {"type": "cylinder", "radius_m": float(shape.radius_m),
                "height_m": float(shape.height_m)}
    return {"type": "box", "length_m": float(shape.length_m),
            "width_m": float(shape.width_m), "height_m": float(shape.height_m)}


def scenario_to_dict(s: Scenario, comments: dict | None = None) -> dict:
    doc = {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "layout": {
            "lanes": [{"centerline": _point_list(l.centerline),
                       "width_m": float(l.width_m), "kind": l.kind}
                      for l in s.layout.lanes],
            "crosswalks": [{"index": c.index, "polygon": _point_list(c.polygon)}
                           for c in s.layout.crosswalks],
            "roi_inner": _point_list(s.layout.roi_inner),
            "approaches": [{"direction": a.direction,
                            "polyline": _point_list(a.polyline),
                            "length_m": float(a.length_m)}
                           for a in s.layout.approaches],
        },
        "occluders": [{"footprint": _point_list(o.footprint),
                       "height_m": float(o.height_m), "kind": o.kind}
                      for o in s.occluders],
        "cameras": [_camera_to_dict(c) for c in s.cameras],
        "actors": [{"id": a.id, "class": a.kind,
                    "trajectory": [[float(v) for v in smp] for smp in a.trajectory],
                    "shape": _shape_to_dict(a.shape),
                    "ref_height_m": float(a.ref_height_m)}
                   for a in s.actors],
        "weather": {"timeline": [[float(v) for v in smp] for smp in s.weather.timeline]},
        "duration_s": float(s.duration_s),
        "frame_rate_hz": float(s.frame_rate_hz),
        "seed": s.seed,
    }
    if comments is None and s.comments:
        comments = {"notes": list(s.comments)}
    if comments:
        doc["comments"] = comments
    return doc


class _Reader:
    """Typed field extraction with entity-path errors and strict-mode
    unknown-field rejection."""

    def __init__(self, data: dict, path: str, strict: bool):
        if not isinstance(data, dict):
            raise SchemaViolationError(f"{path}: expected object", entity=path)
        self.data = data
        self.path = path
        self.strict = strict
        self.seen: set[str] = set()

    def _get(self, key, required=True, default=None):
        self.seen.add(key)
        if key not in self.data:
            if required:
                raise SchemaViolationError(f"{self.path}: missing field {key!r}",
                                           entity=self.path)
            return default
        return self.data[key]

    def number(self, key, required=True, default=None) -> float:
        v = self._get(key, required, default)
        if v is default and not required:
            return default
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaViolationError(f"{self.path}.{key}: expected number",
                                       entity=f"{self.path}.{key}")
        return float(v)

    def integer(self, key, required=True, default=None) -> int:
        v = self._get(key, required, default)
        if v is default and not required:
            return default
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaViolationError(f"{self.path}.{key}: expected integer",
                                       entity=f"{self.path}.{key}")
        return v

    def string(self, key) -> str:
        v = self._get(key)
        if not isinstance(v, str):
            raise SchemaViolationError(f"{self.path}.{key}: expected string",
                                       entity=f"{self.path}.{key}")
        return v

    def array(self, key, required=True) -> list:
        v = self._get(key, required, [] if not required else None)
        if not isinstance(v, list):
            raise SchemaViolationError(f"{self.path}.{key}: expected array",
                                       entity=f"{self.path}.{key}")
        return v

    def obj(self, key, required=True) -> dict:
        v = self._get(key, required, {} if not required else None)
        if not isinstance(v, dict):
            raise SchemaViolationError(f"{self.path}.{key}: expected object",
                                       entity=f"{self.path}.{key}")
        return v

    def finish(self) -> dict:
        """Unknown-field handling; returns leftovers (lenient mode)."""
        extra = {k: v for k, v in self.data.items() if k not in self.seen}
        if extra and self.strict:
            raise SchemaViolationError(
                f"{self.path}: unknown field(s) {sorted(extra)}", entity=self.path)
        return extra


def _points_from(raw, path) -> tuple:
    pts = []
    for i, p in enumerate(raw):
        if (not isinstance(p, list) or len(p) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in p)):
            raise SchemaViolationError(f"{path}[{i}]: expected [x, y]",
                                       entity=f"{path}[{i}]")
        pts.append((float(p[0]), float(p[1])))
    return tuple(pts)


def _tuples_from(raw, path, arity) -> tuple:
    rows = []
    for i, row in enumerate(raw):
        if (not isinstance(row, list) or len(row) != arity
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in row)):
            raise SchemaViolationError(f"{path}[{i}]: expected {arity} numbers",
                                       entity=f"{path}[{i}]")
        rows.append(tuple(float(v) for v in row))
    return tuple(rows)


def scenario_from_dict(data: dict, strict: bool = True) -> tuple[Scenario, dict]:
    """Decode a scenario document; returns (scenario, extras).

    extras holds top-level fields not part of the schema (lenient mode
    only; strict mode rejects them)."""
    root = _Reader(data, "$", strict)
    version = root.integer("schema_version")
    if version != SCENARIO_SCHEMA_VERSION:
        raise UnsupportedVersionError(
            f"scenario schema_version {version} unsupported (expected {SCENARIO_SCHEMA_VERSION})")

    layout_r = _Reader(root.obj("layout"), "layout", strict)
    lanes = []
    for i, raw in enumerate(layout_r.array("lanes")):
        r = _Reader(raw, f"layout.lanes[{i}]", strict)
        lanes.append(Lane(centerline=_points_from(r.array("centerline"), r.path),
                          width_m=r.number("width_m"), kind=r.string("kind")))
        r.finish()
    crosswalks = []
    for i, raw in enumerate(layout_r.array("crosswalks")):
        r = _Reader(raw, f"layout.crosswalks[{i}]", strict)
        crosswalks.append(Crosswalk(index=r.integer("index"),
                                    polygon=_points_from(r.array("polygon"), r.path)))
        r.finish()
    roi = _points_from(layout_r.array("roi_inner"), "layout.roi_inner")
    approaches = []
    for i, raw in enumerate(layout_r.array("approaches")):
        r = _Reader(raw, f"layout.approaches[{i}]", strict)
        approaches.append(Approach(direction=r.string("direction"),
                                   polyline=_points_from(r.array("polyline"), r.path),
                                   length_m=r.number("length_m")))
        r.finish()
    layout_r.finish()
    layout = JunctionLayout(lanes=tuple(lanes), crosswalks=tuple(crosswalks),
                            roi_inner=roi, approaches=tuple(approaches))

    occluders = []
    for i, raw in enumerate(root.array("occluders", required=False)):
        r = _Reader(raw, f"occluders[{i}]", strict)
        occluders.append(Occluder(footprint=_points_from(r.array("footprint"), r.path),
                                  height_m=r.number("height_m"), kind=r.string("kind")))
        r.finish()

    cameras = []
    for i, raw in enumerate(root.array("cameras")):
        r = _Reader(raw, f"cameras[{i}]", strict)
        ir = _Reader(r.obj("intrinsics"), f"cameras[{i}].intrinsics", strict)
        intr = CameraIntrinsics(width_px=ir.integer("width_px"),
                                height_px=ir.integer("height_px"),
                                fx_px=ir.number("fx_px"), fy_px=ir.number("fy_px"),
                                cx_px=ir.number("cx_px"), cy_px=ir.number("cy_px"))
        ir.finish()
        pos_raw = r.array("position_m")
        if len(pos_raw) != 3:
            raise SchemaViolationError(f"cameras[{i}].position_m: expected [x, y, z]",
                                       entity=f"cameras[{i}].position_m")
        pose = CameraPose(position_m=tuple(float(v) for v in pos_raw),
                          yaw_rad=r.number("yaw_rad"),
                          pitch_rad=r.number("pitch_rad"),
                          roll_rad=r.number("roll_rad", required=False, default=0.0))
        cameras.append(CameraModel(id=r.integer("id"), intrinsics=intr, pose=pose,
                                   max_range_m=r.number("max_range_m")))
        r.finish()

    actors = []
    for i, raw in enumerate(root.array("actors", required=False)):
        r = _Reader(raw, f"actors[{i}]", strict)
        shape_r = _Reader(r.obj("shape"), f"actors[{i}].shape", strict)
        stype = shape_r.string("type")
        if stype == "cylinder":
            shape = CylinderShape(radius_m=shape_r.number("radius_m"),
                                  height_m=shape_r.number("height_m"))
        elif stype == "box":
            shape = BoxShape(length_m=shape_r.number("length_m"),
                             width_m=shape_r.number("width_m"),
                             height_m=shape_r.number("height_m"))
        else:
            raise SchemaViolationError(f"actors[{i}].shape.type: unknown shape {stype!r}",
                                       entity=f"actors[{i}].shape")
        shape_r.finish()
        actors.append(Actor(id=r.integer("id"), kind=r.string("class"),
                            trajectory=_tuples_from(r.array("trajectory"),
                                                    f"actors[{i}].trajectory", 5),
                            shape=shape,
                            ref_height_m=r.number("ref_height_m", required=False,
                                                  default=1.0)))
        r.finish()

    weather_r = _Reader(root.obj("weather", required=False) or {"timeline": []},
                        "weather", strict)
    weather = WeatherState(timeline=_tuples_from(weather_r.array("timeline"),
                                                 "weather.timeline", 4))
    weather_r.finish()

    comments_raw = root._get("comments", required=False, default=None)
    notes: tuple[str, ...] = ()
    if isinstance(comments_raw, dict):
        raw_notes = comments_raw.get("notes", [])
        if isinstance(raw_notes, list):
            notes = tuple(str(n) for n in raw_notes)

    scenario = Scenario(layout=layout, occluders=tuple(occluders),
                        cameras=tuple(cameras), actors=tuple(actors),
                        weather=weather,
                        duration_s=root.number("duration_s"),
                        frame_rate_hz=root.number("frame_rate_hz", required=False,
                                                  default=25.0),
                        seed=root.integer("seed", required=False, default=0),
                        comments=notes)
    extras = root.finish()
    return scenario, extras


@dataclass(frozen=True)
class ScenarioDocument:
    schema_version: int
    scenario: Scenario
    comments: dict
    extras: dict  # unknown top-level fields preserved in lenient mode


def scenario_hash(s: Scenario) -> str:
    """sha256 of the canonical serialization, comments excluded."""
    doc = scenario_to_dict(s)
    doc.pop("comments", None)
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def _parse_json(text: str, path) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise CorruptFileError(
            f"{path}: JSON parse error at line {e.lineno}, column {e.colno}: {e.msg}",
            offset=e.pos) from e


def load_document(path, strict: bool = True,
                  paper_faithful: bool = False) -> ScenarioDocument:
    path = Path(path)
    data = _parse_json(path.read_text(), path)
    scenario, extras = scenario_from_dict(data, strict=strict)
    violations = validate_scenario(scenario, paper_faithful=paper_faithful)
    if violations and strict:
        first = violations[0]
        raise SchemaViolationError(
            f"{path}: {len(violations)} invariant violation(s); first: "
            f"{first.entity}: {first.rule} ({first.detail})", entity=first.entity)
    comments = data.get("comments") if isinstance(data.get("comments"), dict) else {}
    return ScenarioDocument(schema_version=data["schema_version"], scenario=scenario,
                            comments=comments or {}, extras=extras)


def load_scenario(path, strict: bool = True, paper_faithful: bool = False) -> Scenario:
    return load_document(path, strict=strict, paper_faithful=paper_faithful).scenario


def save_scenario(s: Scenario, path, comments: dict | None = None,
                  extras: dict | None = None) -> None:
    doc = scenario_to_dict(s, comments)
    for key, value in (extras or {}).items():
        if key not in doc:
            doc[key] = value
    Path(path).write_text(canonical_json(doc))


# ---------------------------------------------------------------------------
# coverage grid binary + CSV

def grid_to_bytes(grid: CoverageGrid) -> bytes:
    header = _GRID_HEADER.pack(_GRID_MAGIC, GRID_FORMAT_VERSION, 0,
                               float(grid.origin_m[0]), float(grid.origin_m[1]),
                               float(grid.cell_m), grid.cols, grid.rows)
    cells = np.empty(grid.rows * grid.cols,
                     dtype=np.dtype([("mask", "<u8"), ("mono", "<u2"), ("stereo", "<u2")]))
    cells["mask"] = grid.visible_mask.ravel()
    cells["mono"] = grid.mono_count.ravel()
    cells["stereo"] = grid.stereo_pairs.ravel()
    body = header + cells.tobytes()
    crc = zlib.crc32(body) & 0xFFFFFFFF
    return body + struct.pack("<I", crc)


def save_grid(grid: CoverageGrid, path) -> None:
    Path(path).write_bytes(grid_to_bytes(grid))


def load_grid(path) -> CoverageGrid:
    raw = Path(path).read_bytes()
    if len(raw) < _GRID_HEADER.size + 4:
        raise CorruptFileError(f"{path}: truncated grid file", offset=len(raw))
    magic, version, _reserved, ox, oy, cell_m, cols, rows = _GRID_HEADER.unpack_from(raw, 0)
    if magic != _GRID_MAGIC:
        raise CorruptFileError(f"{path}: bad magic {magic!r}", offset=0)
    if version != GRID_FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"grid format version {version} unsupported (expected {GRID_FORMAT_VERSION})")
    expected = _GRID_HEADER.size + rows * cols * _GRID_CELL.size + 4
    if len(raw) != expected:
        raise CorruptFileError(
            f"{path}: expected {expected} bytes, found {len(raw)}", offset=len(raw))
    body, crc_raw = raw[:-4], raw[-4:]
    crc = struct.unpack("<I", crc_raw)[0]
    actual = zlib.crc32(body) & 0xFFFFFFFF
    if crc != actual:
        raise CorruptFileError(
            f"{path}: CRC mismatch (stored {crc:#010x}, computed {actual:#010x})",
            offset=len(raw) - 4)
    cells = np.frombuffer(raw, dtype=np.dtype([("mask", "<u8"), ("mono", "<u2"),
                                               ("stereo", "<u2")]),
                          count=rows * cols, offset=_GRID_HEADER.size)
    mask = cells["mask"].reshape(rows, cols).astype(np.uint64)
    mono = cells["mono"].reshape(rows, cols).astype(np.uint16)
    stereo = cells["stereo"].reshape(rows, cols).astype(np.uint16)
    present = int(np.bitwise_or.reduce(mask.ravel())) if mask.size else 0
    ids = tuple(i + 1 for i in range(64) if present >> i & 1)
    return CoverageGrid(origin_m=(ox, oy), cell_m=cell_m, cols=cols, rows=rows,
                        camera_ids=ids, pair_ids=(),
                        visible_mask=mask, mono_count=mono, stereo_pairs=stereo)


def save_grid_csv(grid: CoverageGrid, path) -> None:
    """Debug export: one row per cell, row-major."""
    with open(path, "w", newline="") as f:
        f.write("row,col,x_m,y_m,visible_mask,mono_count,stereo_pairs\n")
        for row in range(grid.rows):
            y = grid.origin_m[1] + (row + 0.5) * grid.cell_m
            for col in range(grid.cols):
                x = grid.origin_m[0] + (col + 0.5) * grid.cell_m
                f.write(f"{row},{col},{x:.6f},{y:.6f},"
                        f"{int(grid.visible_mask[row, col])},"
                        f"{int(grid.mono_count[row, col])},"
                        f"{int(grid.stereo_pairs[row, col])}\n")


# ---------------------------------------------------------------------------
# trajectory records

@dataclass(frozen=True)
class TrajectoryRecord:
    track_id: int
    kind: str  # actor class; serialized under the key "class"
    trigger_utc_ns: int
    x_m: float
    y_m: float
    vx_mps: float
    vy_mps: float
    n_views: int


def _trajectory_line(rec: TrajectoryRecord) -> str:
    fields = {
        "class": rec.kind,
        "n_views": rec.n_views,
        "track_id": rec.track_id,
        "trigger_utc_ns": rec.trigger_utc_ns,
        "vx": float(rec.vx_mps),
        "vy": float(rec.vy_mps),
        "x_m": float(rec.x_m),
        "y_m": float(rec.y_m),
    }
    return ("{" + ", ".join(f"{json.dumps(k)}: {_canonical(v, 0)}"
                            for k, v in fields.items()) + "}")


def save_trajectories(records, path) -> None:
    """Line-delimited JSON: a header object, then one record per line."""
    with open(path, "w", newline="") as f:
        f.write('{"kind": "trajectories", "schema_version": %d}\n'
                % TRAJECTORY_SCHEMA_VERSION)
        for rec in records:
            f.write(_trajectory_line(rec) + "\n")


def load_trajectories(path) -> list[TrajectoryRecord]:
    path = Path(path)
    records = []
    with open(path) as f:
        offset = 0
        header_line = f.readline()
        if not header_line:
            raise CorruptFileError(f"{path}: empty trajectory file", offset=0)
        header = _parse_json(header_line, path)
        if header.get("kind") != "trajectories":
            raise CorruptFileError(f"{path}: missing trajectory header", offset=0)
        version = header.get("schema_version")
        if version != TRAJECTORY_SCHEMA_VERSION:
            raise UnsupportedVersionError(
                f"trajectory schema_version {version} unsupported")
        offset += len(header_line)
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorruptFileError(
                    f"{path}: bad record at line {lineno}: {e.msg}",
                    offset=offset + e.pos) from e
            try:
                records.append(TrajectoryRecord(
                    track_id=int(row["track_id"]), kind=str(row["class"]),
                    trigger_utc_ns=int(row["trigger_utc_ns"]),
                    x_m=float(row["x_m"]), y_m=float(row["y_m"]),
                    vx_mps=float(row["vx"]), vy_mps=float(row["vy"]),
                    n_views=int(row["n_views"])))
            except (KeyError, TypeError, ValueError) as e:
                raise CorruptFileError(
                    f"{path}: bad record at line {lineno}: {e}", offset=offset) from e
            offset += len(line)
    return records


# ---------------------------------------------------------------------------
# recording manifest

def save_manifest(path, *, scenario_sha256: str, config: dict, stats: dict) -> None:
    doc = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "kind": "recording",
        "scenario_sha256": scenario_sha256,
        "config": config,
        "stats": stats,
    }
    Path(path).write_text(canonical_json(doc))


def load_manifest(path) -> dict:
    path = Path(path)
    doc = _parse_json(path.read_text(), path)
    version = doc.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise UnsupportedVersionError(f"manifest schema_version {version} unsupported")
    if doc.get("kind") != "recording":
        raise CorruptFileError(f"{path}: not a recording manifest")
    for key in ("scenario_sha256", "config", "stats"):
        if key not in doc:
            raise CorruptFileError(f"{path}: manifest missing {key!r}")
    return doc
