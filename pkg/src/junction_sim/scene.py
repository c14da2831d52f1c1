"""World model for the instrumented junction.

Static layout (lanes, crosswalks, approaches), occluders, moving actors,
a weather timeline, and the checked-in reference installation. All types
are immutable after construction; invariant checking is centralized in
:func:`validate_scenario`, which reports violations as data instead of
raising, so callers (CLI, planning service) can surface every problem at
once.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import InvalidArgumentError
from .geometry import CameraModel

LANE_KINDS = frozenset({"straight-ahead", "left-turn", "minor", "bicycle"})
ACTOR_CLASSES = frozenset({"pedestrian", "cyclist", "vehicle", "other"})
OCCLUDER_KINDS = frozenset({"building", "parked_car", "furniture"})

Point2 = tuple[float, float]


# ---------------------------------------------------------------------------
# polygon helpers (shared with the coverage module)

def _cross(o: Point2, a: Point2, b: Point2) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(p: Point2, q: Point2, r: Point2) -> bool:
    """r collinear with pq assumed; is r within the segment's bounding box?"""
    return (min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
            and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]))


def _segments_intersect(p1: Point2, p2: Point2, p3: Point2, p4: Point2) -> bool:
    d1 = _cross(p3, p4, p1)
    d2 = _cross(p3, p4, p2)
    d3 = _cross(p1, p2, p3)
    d4 = _cross(p1, p2, p4)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    if d1 == 0 and _on_segment(p3, p4, p1):
        return True
    if d2 == 0 and _on_segment(p3, p4, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, p3):
        return True
    if d4 == 0 and _on_segment(p1, p2, p4):
        return True
    return False


def polygon_is_simple(vertices) -> bool:
    """True iff the polygon has ≥ 3 vertices, no zero-length edges, and no
    two non-adjacent edges touching or crossing."""
    n = len(vertices)
    if n < 3:
        return False
    for i in range(n):
        if vertices[i] == vertices[(i + 1) % n]:
            return False
    for i in range(n):
        a1, a2 = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges share a vertex by construction
            if _segments_intersect(a1, a2, vertices[j], vertices[(j + 1) % n]):
                return False
    return True


def point_in_polygon(x: float, y: float, vertices) -> bool:
    """Even-odd ray cast; boundary points are implementation-defined."""
    inside = False
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def polyline_length(points) -> float:
    total = 0.0
    for (x1, y1), (x2, y2) in zip(points, points[1:]):
        total += ((x2 - x1) ** 2 + (y2 - y1) ** 2) ** 0.5
    return total


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class Lane:
    centerline: tuple[Point2, ...]
    width_m: float
    kind: str  # straight-ahead | left-turn | minor | bicycle


@dataclass(frozen=True)
class Crosswalk:
    index: int  # 1..3
    polygon: tuple[Point2, ...]


@dataclass(frozen=True)
class Approach:
    direction: str
    polyline: tuple[Point2, ...]  # first point is the junction-side end
    length_m: float


@dataclass(frozen=True)
class JunctionLayout:
    lanes: tuple[Lane, ...]
    crosswalks: tuple[Crosswalk, ...]
    roi_inner: tuple[Point2, ...]
    approaches: tuple[Approach, ...]


@dataclass(frozen=True)
class Occluder:
    footprint: tuple[Point2, ...]
    height_m: float
    kind: str  # building | parked_car | furniture


@dataclass(frozen=True)
class CylinderShape:
    radius_m: float
    height_m: float


@dataclass(frozen=True)
class BoxShape:
    length_m: float
    width_m: float
    height_m: float


@dataclass(frozen=True)
class Actor:
    id: int
    kind: str  # pedestrian | cyclist | vehicle | other
    trajectory: tuple[tuple[float, float, float, float, float], ...]
    # samples are (t_s, x_m, y_m, heading_rad, speed_mps), strictly increasing t
    shape: CylinderShape | BoxShape
    ref_height_m: float = 1.0  # height of the point used for detection geometry


@dataclass(frozen=True)
class WeatherState:
    timeline: tuple[tuple[float, float, float, float], ...]
    # samples are (t_s, visibility_m, precipitation_mmph, temperature_C)

    def visibility_at(self, t_s: float) -> float:
        """Step interpolation: value of the latest sample at or before t_s
        (first sample for earlier times)."""
        if not self.timeline:
            return float("inf")
        times = [s[0] for s in self.timeline]
        i = bisect.bisect_right(times, t_s) - 1
        return self.timeline[max(i, 0)][1]


@dataclass(frozen=True)
class Scenario:
    layout: JunctionLayout
    occluders: tuple[Occluder, ...]
    cameras: tuple[CameraModel, ...]
    actors: tuple[Actor, ...]
    weather: WeatherState
    duration_s: float
    frame_rate_hz: float = 25.0
    seed: int = 0
    comments: tuple[str, ...] = field(default_factory=tuple)


# ---------------------------------------------------------------------------
# operations

def actor_pose_at(actor: Actor, t_s: float) -> tuple[float, float, float] | None:
    """(x, y, heading) linearly interpolated along the trajectory.

    Returns None before the first or after the last sample ("out of
    lifetime"). Exact at sample times.
    """
    traj = actor.trajectory
    if not traj or t_s < traj[0][0] or t_s > traj[-1][0]:
        return None
    times = [s[0] for s in traj]
    i = bisect.bisect_left(times, t_s)
    if i < len(times) and times[i] == t_s:
        s = traj[i]
        return (s[1], s[2], s[3])
    a, b = traj[i - 1], traj[i]
    w = (t_s - a[0]) / (b[0] - a[0])
    return (
        a[1] + w * (b[1] - a[1]),
        a[2] + w * (b[2] - a[2]),
        a[3] + w * (b[3] - a[3]),
    )


@dataclass(frozen=True)
class Violation:
    entity: str  # path into the scenario, e.g. "cameras[2]" or "layout.crosswalks[0]"
    rule: str    # short machine-readable rule name
    detail: str


def _check_polygon(violations, entity, polygon):
    if not polygon_is_simple(polygon):
        violations.append(Violation(entity, "polygon_simple",
                                    "polygon must have >= 3 vertices and no self-intersection"))


def validate_scenario(s: Scenario, paper_faithful: bool = False) -> list[Violation]:
    """Check every type invariant; returns one Violation per broken rule.

    With paper_faithful=True, additionally enforces the constraints of the
    real installation: camera heights <= 8 m, exactly 3 crosswalks,
    approaches >= 100 m, 25 Hz frame rate.
    """
    v: list[Violation] = []

    if s.duration_s <= 0:
        v.append(Violation("duration_s", "duration_positive", f"duration_s = {s.duration_s}"))
    if s.frame_rate_hz <= 0:
        v.append(Violation("frame_rate_hz", "frame_rate_positive",
                           f"frame_rate_hz = {s.frame_rate_hz}"))

    seen_ids: set[int] = set()
    for i, cam in enumerate(s.cameras):
        if cam.id in seen_ids:
            v.append(Violation(f"cameras[{i}]", "camera_id_unique",
                               f"duplicate camera id {cam.id}"))
        seen_ids.add(cam.id)
        if paper_faithful and cam.pose.position_m[2] > 8.0:
            v.append(Violation(f"cameras[{i}]", "camera_height_max",
                               f"height {cam.pose.position_m[2]} m exceeds 8 m pole limit"))

    for i, lane in enumerate(s.layout.lanes):
        if lane.kind not in LANE_KINDS:
            v.append(Violation(f"layout.lanes[{i}]", "lane_kind",
                               f"unknown lane kind {lane.kind!r}"))
        if lane.width_m <= 0:
            v.append(Violation(f"layout.lanes[{i}]", "lane_width_positive",
                               f"width_m = {lane.width_m}"))
        if len(lane.centerline) < 2:
            v.append(Violation(f"layout.lanes[{i}]", "centerline_min_points",
                               "centerline needs >= 2 points"))

    for i, cw in enumerate(s.layout.crosswalks):
        if not 1 <= cw.index <= 3:
            v.append(Violation(f"layout.crosswalks[{i}]", "crosswalk_index_range",
                               f"index {cw.index} outside 1..3"))
        _check_polygon(v, f"layout.crosswalks[{i}]", cw.polygon)

    _check_polygon(v, "layout.roi_inner", s.layout.roi_inner)

    for i, ap in enumerate(s.layout.approaches):
        if len(ap.polyline) < 2:
            v.append(Violation(f"layout.approaches[{i}]", "polyline_min_points",
                               "approach polyline needs >= 2 points"))
        if ap.length_m <= 0:
            v.append(Violation(f"layout.approaches[{i}]", "approach_length_positive",
                               f"length_m = {ap.length_m}"))
        if paper_faithful and ap.length_m < 100.0:
            v.append(Violation(f"layout.approaches[{i}]", "approach_length_min",
                               f"length_m = {ap.length_m} below the 100 m requirement"))

    if paper_faithful and len(s.layout.crosswalks) != 3:
        v.append(Violation("layout.crosswalks", "crosswalk_count",
                           f"expected 3 crosswalks, found {len(s.layout.crosswalks)}"))
    if paper_faithful and s.frame_rate_hz != 25.0:
        v.append(Violation("frame_rate_hz", "frame_rate_fixed",
                           f"installation runs at 25 Hz, got {s.frame_rate_hz}"))

    for i, occ in enumerate(s.occluders):
        if occ.height_m <= 0:
            v.append(Violation(f"occluders[{i}]", "occluder_height_positive",
                               f"height_m = {occ.height_m}"))
        if occ.kind not in OCCLUDER_KINDS:
            v.append(Violation(f"occluders[{i}]", "occluder_kind",
                               f"unknown occluder kind {occ.kind!r}"))
        _check_polygon(v, f"occluders[{i}]", occ.footprint)

    seen_actor_ids: set[int] = set()
    for i, actor in enumerate(s.actors):
        if actor.id in seen_actor_ids:
            v.append(Violation(f"actors[{i}]", "actor_id_unique",
                               f"duplicate actor id {actor.id}"))
        seen_actor_ids.add(actor.id)
        if actor.kind not in ACTOR_CLASSES:
            v.append(Violation(f"actors[{i}]", "actor_class",
                               f"unknown actor class {actor.kind!r}"))
        ts = [smp[0] for smp in actor.trajectory]
        if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
            v.append(Violation(f"actors[{i}]", "trajectory_increasing",
                               "trajectory times must be strictly increasing"))
        if any(smp[4] < 0 for smp in actor.trajectory):
            v.append(Violation(f"actors[{i}]", "speed_nonnegative",
                               "trajectory speeds must be >= 0"))
        if not actor.trajectory:
            v.append(Violation(f"actors[{i}]", "trajectory_nonempty",
                               "trajectory must contain at least one sample"))
        if isinstance(actor.shape, CylinderShape):
            if actor.shape.radius_m <= 0 or actor.shape.height_m <= 0:
                v.append(Violation(f"actors[{i}]", "shape_positive",
                                   "cylinder dimensions must be positive"))
        else:
            if min(actor.shape.length_m, actor.shape.width_m, actor.shape.height_m) <= 0:
                v.append(Violation(f"actors[{i}]", "shape_positive",
                                   "box dimensions must be positive"))

    wts = [smp[0] for smp in s.weather.timeline]
    if any(t2 <= t1 for t1, t2 in zip(wts, wts[1:])):
        v.append(Violation("weather", "timeline_increasing",
                           "weather timeline must be strictly increasing"))
    for i, smp in enumerate(s.weather.timeline):
        if smp[1] <= 0:
            v.append(Violation(f"weather.timeline[{i}]", "visibility_positive",
                               f"visibility_m = {smp[1]}"))

    return v


@lru_cache(maxsize=1)
def reference_scenario() -> Scenario:
    """The checked-in six-camera installation.

    Loaded from package data; deterministic (the file is canonical JSON,
    so repeated serialization is byte-identical).
    """
    from importlib import resources

    from . import scenario_io

    path = resources.files("junction_sim").joinpath("data/reference_scenario.json")
    with resources.as_file(path) as p:
        return scenario_io.load_scenario(p)
