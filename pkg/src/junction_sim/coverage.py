"""Occlusion-aware mono and stereo coverage over a ground grid.

Visibility of a target point requires: projection inside the image
bounds with positive depth, range within the camera's usable limit, and
a clear line of sight past every occluder. Occluders are 2D footprints
extruded to height_m; the sight segment is blocked iff some point of it
lies strictly below the occluder top while its ground projection is
inside the footprint. Because height varies linearly along the segment,
that reduces to checking footprint-boundary crossings against the
parameter where the segment passes occluder-top height.

Grid evaluation happens at a single reference height (1.0 m, VRU torso)
with binary per-cell-center visibility, which keeps the brute-force
oracle comparison exact.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations, product

import numpy as np

from .errors import (
    DegenerateGeometryError,
    InfeasiblePlacementError,
    InvalidArgumentError,
    OperationCancelledError,
    ResourceLimitError,
)
from .geometry import (
    CameraModel,
    CameraPose,
    intrinsics_from_lens,
    rotation_world_from_camera,
    stereo_axis_angle,
)
from .scene import (
    JunctionLayout,
    Occluder,
    Point2,
    Scenario,
    point_in_polygon,
)

REF_HEIGHT_M = 1.0   # evaluation height for grid cells (VRU torso)
MAX_CAMERA_ID = 64   # visible_mask stores camera id N at bit N-1


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True)
class GridSpec:
    origin_m: Point2  # world position of the grid's (row 0, col 0) corner
    cell_m: float
    cols: int
    rows: int

    def __post_init__(self):
        if self.cell_m <= 0:
            raise InvalidArgumentError("cell_m must be positive")
        if self.cols < 1 or self.rows < 1:
            raise InvalidArgumentError("grid must have at least one cell")

    @staticmethod
    def from_bounds(min_xy: Point2, max_xy: Point2, cell_m: float = 0.25) -> "GridSpec":
        cols = max(1, math.ceil((max_xy[0] - min_xy[0]) / cell_m))
        rows = max(1, math.ceil((max_xy[1] - min_xy[1]) / cell_m))
        return GridSpec(origin_m=(float(min_xy[0]), float(min_xy[1])),
                        cell_m=float(cell_m), cols=cols, rows=rows)

    def center(self, row: int, col: int) -> Point2:
        return (self.origin_m[0] + (col + 0.5) * self.cell_m,
                self.origin_m[1] + (row + 0.5) * self.cell_m)

    def row_centers(self, row_lo: int, row_hi: int) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (x, y) cell centers for rows [row_lo, row_hi)."""
        xs = self.origin_m[0] + (np.arange(self.cols) + 0.5) * self.cell_m
        ys = self.origin_m[1] + (np.arange(row_lo, row_hi) + 0.5) * self.cell_m
        gx, gy = np.meshgrid(xs, ys)
        return gx.ravel(), gy.ravel()


@dataclass(frozen=True)
class CellRecord:
    visible_mask: int
    mono_count: int
    stereo_pairs: int


@dataclass
class CoverageGrid:
    origin_m: Point2
    cell_m: float
    cols: int
    rows: int
    camera_ids: tuple[int, ...]
    pair_ids: tuple[tuple[int, int], ...]  # angle-valid pairs counted per cell
    visible_mask: np.ndarray  # (rows, cols) uint64; camera id N at bit N-1
    mono_count: np.ndarray    # (rows, cols) uint16
    stereo_pairs: np.ndarray  # (rows, cols) uint16

    def cell(self, row: int, col: int) -> CellRecord:
        return CellRecord(int(self.visible_mask[row, col]),
                          int(self.mono_count[row, col]),
                          int(self.stereo_pairs[row, col]))

    def cell_at(self, x_m: float, y_m: float) -> tuple[int, int] | None:
        col = int(math.floor((x_m - self.origin_m[0]) / self.cell_m))
        row = int(math.floor((y_m - self.origin_m[1]) / self.cell_m))
        if 0 <= row < self.rows and 0 <= col < self.cols:
            return row, col
        return None

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.origin_m, self.cell_m, self.cols, self.rows)


@dataclass(frozen=True)
class PairConstraints:
    angle_min_deg: float = 30.0
    angle_max_deg: float = 120.0
    min_overlap_m2: float = 25.0
    overlap_sample_m: float = 1.0


@dataclass(frozen=True)
class StereoPairSpec:
    cam_a: int
    cam_b: int
    axis_angle_deg: float
    overlap_m2: float

    def __post_init__(self):
        if self.cam_a >= self.cam_b:
            raise InvalidArgumentError("pair ids must satisfy cam_a < cam_b")


@dataclass(frozen=True)
class CoverageReport:
    stereo_fraction_inner: float
    mono_fraction_inner: float
    crosswalk_stereo_fractions: tuple[tuple[int, float], ...]  # (index, fraction)
    approach_covered_m: tuple[tuple[str, float], ...]          # (direction, meters)
    bicycle_stereo_fraction: float

    def crosswalk_fraction(self, index: int) -> float:
        for idx, frac in self.crosswalk_stereo_fractions:
            if idx == index:
                return frac
        raise KeyError(index)

    def approach_distance(self, direction: str) -> float:
        for name, dist in self.approach_covered_m:
            if name == direction:
                return dist
        raise KeyError(direction)


@dataclass(frozen=True)
class PlacementCandidate:
    pole_id: str
    position_m: Point2
    height_m: float
    yaw_rad: float
    pitch_rad: float


@dataclass(frozen=True)
class ObjectiveWeights:
    stereo_inner: float = 1.0
    crosswalk_mean: float = 0.5
    bicycle: float = 0.25
    approach_per_100m: float = 0.25  # applied to the mean covered distance / 100


@dataclass(frozen=True)
class SelectedPlacement:
    candidate: PlacementCandidate
    yaw_offset_deg: float
    camera: CameraModel


@dataclass(frozen=True)
class PlacementResult:
    selected: tuple[SelectedPlacement, ...]
    report: CoverageReport
    objective: float
    greedy_objective: float


# ---------------------------------------------------------------------------
# visibility primitives

def _points_in_polygon(xs: np.ndarray, ys: np.ndarray, poly) -> np.ndarray:
    """Vectorized even-odd ray cast; same convention as scene.point_in_polygon."""
    inside = np.zeros(xs.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        cond = (y1 > ys) != (y2 > ys)
        if y2 != y1:
            x_cross = x1 + (ys - y1) * (x2 - x1) / (y2 - y1)
            inside ^= cond & (xs < x_cross)
    return inside


def _blocked_by(occ: Occluder, cam_pos, xs: np.ndarray, ys: np.ndarray,
                zs: np.ndarray) -> np.ndarray:
    """Per-target mask: sight segment camera->target blocked by `occ`.

    The segment is blocked iff its ground track is inside the footprint
    somewhere it is also strictly below height_m. With linear z(t), the
    window of parameters below the top is an interval, so it suffices to
    test footprint containment at the endpoints plus boundary crossings
    falling inside that window.
    """
    h = occ.height_m
    zc = float(cam_pos[2])
    zs = np.broadcast_to(np.asarray(zs, dtype=float), xs.shape)
    blocked = np.zeros(xs.shape, dtype=bool)
    if zc >= h and bool(np.all(zs >= h)):
        return blocked  # segment never dips below the occluder top

    poly = occ.footprint
    cam_inside = point_in_polygon(float(cam_pos[0]), float(cam_pos[1]), poly)
    if cam_inside and zc < h:
        blocked[:] = True  # segment starts inside the volume
        return blocked

    blocked |= _points_in_polygon(xs, ys, poly) & (zs < h)

    # parameter where z(t) crosses the occluder top (may be nan when zs == zc;
    # those elements never use it thanks to the lo/hi regime selection)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_h = (h - zc) / (zs - zc)
    lo = np.where(zc >= h, t_h, -np.inf)  # camera above top: below-top only after t_h
    hi = np.where(zs >= h, t_h, np.inf)   # target above top: below-top only before t_h

    dx = xs - cam_pos[0]
    dy = ys - cam_pos[1]
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        rx, ry = ax - cam_pos[0], ay - cam_pos[1]
        denom = dx * ey - dy * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (rx * ey - ry * ex) / denom
            s = (rx * dy - ry * dx) / denom
        hit = (denom != 0.0) & (s >= 0.0) & (s < 1.0) & (t >= 0.0) & (t <= 1.0)
        blocked |= hit & (t > lo) & (t < hi)
    return blocked


def _camera_visibility(cam: CameraModel, xs: np.ndarray, ys: np.ndarray,
                       zs, occluders) -> np.ndarray:
    """Boolean visibility of each target point for one camera."""
    pos = np.asarray(cam.pose.position_m)
    zs_arr = np.broadcast_to(np.asarray(zs, dtype=float), xs.shape)
    d = np.stack([xs - pos[0], ys - pos[1], zs_arr - pos[2]], axis=1)
    pc = d @ rotation_world_from_camera(cam)  # camera-frame coordinates
    ok = pc[:, 2] > 0.0
    intr = cam.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.cx_px + intr.fx_px * pc[:, 0] / pc[:, 2]
        v = intr.cy_px + intr.fy_px * pc[:, 1] / pc[:, 2]
    ok &= (u >= 0.0) & (u <= intr.width_px) & (v >= 0.0) & (v <= intr.height_px)
    ok &= np.einsum("ij,ij->i", d, d) <= cam.max_range_m**2
    if ok.any():
        for occ in occluders:
            ok &= ~_blocked_by(occ, pos, xs, ys, zs_arr)
    return ok


def visible(cam: CameraModel, target_m, occluders=()) -> bool:
    """True iff `target_m` projects inside the image with positive depth,
    lies within max_range_m, and no occluder blocks the sight segment."""
    t = np.asarray(target_m, dtype=float)
    return bool(_camera_visibility(cam, t[0:1], t[1:2], t[2:3], occluders)[0])


# ---------------------------------------------------------------------------
# grid coverage

def _check_camera_ids(cameras) -> tuple[int, ...]:
    ids = [cam.id for cam in cameras]
    if len(set(ids)) != len(ids):
        raise InvalidArgumentError("camera ids must be unique")
    for cid in ids:
        if not 1 <= cid <= MAX_CAMERA_ID:
            raise InvalidArgumentError(
                f"camera id {cid} outside 1..{MAX_CAMERA_ID} (bitset limit)")
    return tuple(ids)


def angle_valid_pairs(cameras, constraints: PairConstraints = PairConstraints()
                      ) -> list[tuple[CameraModel, CameraModel, float]]:
    """Unordered camera pairs whose axis angle falls in the validity window,
    sorted by id. Cameras with a vertical optical axis pair with nothing."""
    ordered = sorted(cameras, key=lambda c: c.id)
    pairs = []
    for a, b in combinations(ordered, 2):
        try:
            angle = stereo_axis_angle(a, b)
        except DegenerateGeometryError:
            continue
        if constraints.angle_min_deg <= angle <= constraints.angle_max_deg:
            pairs.append((a, b, angle))
    return pairs


def compute_coverage(s: Scenario, grid_spec: GridSpec, *,
                     constraints: PairConstraints = PairConstraints(),
                     ref_height_m: float = REF_HEIGHT_M,
                     threads: int | None = None,
                     max_cells: int = 4_000_000,
                     progress=None,
                     should_cancel=None) -> CoverageGrid:
    """Evaluate per-cell visibility, mono count, and stereo-pair count.

    Cells are evaluated at their center at `ref_height_m`. stereo_pairs
    counts angle-valid pairs (per `constraints`) where both cameras see
    the cell. Rows are processed in slabs, optionally across threads;
    `progress(fraction)` is called as slabs finish and `should_cancel()`
    is polled at slab granularity (raises OperationCancelledError).
    """
    ids = _check_camera_ids(s.cameras)
    n_cells = grid_spec.cols * grid_spec.rows
    if n_cells > max_cells:
        raise ResourceLimitError(
            f"grid has {n_cells} cells, exceeding the budget of {max_cells}")
    if threads is None:
        threads = int(os.environ.get("JUNCTION_SIM_THREADS", "1"))
    threads = max(1, threads)

    pairs = angle_valid_pairs(s.cameras, constraints)
    pair_ids = tuple((a.id, b.id) for a, b, _ in pairs)

    mask = np.zeros((grid_spec.rows, grid_spec.cols), dtype=np.uint64)
    mono = np.zeros((grid_spec.rows, grid_spec.cols), dtype=np.uint16)
    stereo = np.zeros((grid_spec.rows, grid_spec.cols), dtype=np.uint16)

    n_slabs = min(grid_spec.rows, max(threads * 4, 16))
    slab_rows = math.ceil(grid_spec.rows / n_slabs)
    slabs = [(lo, min(lo + slab_rows, grid_spec.rows))
             for lo in range(0, grid_spec.rows, slab_rows)]

    def run_slab(bounds):
        lo, hi = bounds
        if should_cancel is not None and should_cancel():
            return False
        xs, ys = grid_spec.row_centers(lo, hi)
        vis = {cam.id: _camera_visibility(cam, xs, ys, ref_height_m, s.occluders)
               for cam in s.cameras}
        shape = (hi - lo, grid_spec.cols)
        slab_mask = np.zeros(xs.shape, dtype=np.uint64)
        slab_mono = np.zeros(xs.shape, dtype=np.uint16)
        for cid in ids:
            slab_mask |= vis[cid].astype(np.uint64) << np.uint64(cid - 1)
            slab_mono += vis[cid]
        slab_stereo = np.zeros(xs.shape, dtype=np.uint16)
        for a, b, _ in pairs:
            slab_stereo += vis[a.id] & vis[b.id]
        mask[lo:hi] = slab_mask.reshape(shape)
        mono[lo:hi] = slab_mono.reshape(shape)
        stereo[lo:hi] = slab_stereo.reshape(shape)
        return True

    done = 0
    if threads == 1:
        for bounds in slabs:
            if not run_slab(bounds):
                raise OperationCancelledError("coverage computation cancelled")
            done += 1
            if progress is not None:
                progress(done / len(slabs))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for completed in pool.map(run_slab, slabs):
                if not completed:
                    raise OperationCancelledError("coverage computation cancelled")
                done += 1
                if progress is not None:
                    progress(done / len(slabs))

    return CoverageGrid(origin_m=grid_spec.origin_m, cell_m=grid_spec.cell_m,
                        cols=grid_spec.cols, rows=grid_spec.rows,
                        camera_ids=ids, pair_ids=pair_ids,
                        visible_mask=mask, mono_count=mono, stereo_pairs=stereo)


# ---------------------------------------------------------------------------
# stereo pair enumeration

def enumerate_stereo_pairs(cameras, constraints: PairConstraints = PairConstraints()
                           ) -> list[StereoPairSpec]:
    """All unordered pairs meeting the axis-angle window and joint-overlap
    threshold, sorted by (cam_a, cam_b).

    Overlap is the area of ground lattice points (spacing
    `overlap_sample_m`, evaluated at the standard reference height,
    occluders ignored) visible to both cameras.
    """
    if len(cameras) < 2:
        raise InvalidArgumentError("need at least 2 cameras to enumerate pairs")
    _check_camera_ids(cameras)
    specs = []
    for a, b, angle in angle_valid_pairs(cameras, constraints):
        overlap = _pair_overlap_m2(a, b, constraints.overlap_sample_m)
        if overlap >= constraints.min_overlap_m2:
            specs.append(StereoPairSpec(cam_a=a.id, cam_b=b.id,
                                        axis_angle_deg=angle, overlap_m2=overlap))
    return specs


def _pair_overlap_m2(a: CameraModel, b: CameraModel, sample_m: float) -> float:
    lo_x = max(a.pose.position_m[0] - a.max_range_m, b.pose.position_m[0] - b.max_range_m)
    hi_x = min(a.pose.position_m[0] + a.max_range_m, b.pose.position_m[0] + b.max_range_m)
    lo_y = max(a.pose.position_m[1] - a.max_range_m, b.pose.position_m[1] - b.max_range_m)
    hi_y = min(a.pose.position_m[1] + a.max_range_m, b.pose.position_m[1] + b.max_range_m)
    if lo_x >= hi_x or lo_y >= hi_y:
        return 0.0
    # absolute lattice at half-sample offsets so the result is independent
    # of argument order and world translation of the window
    xs = np.arange(math.floor(lo_x / sample_m), math.ceil(hi_x / sample_m)) * sample_m + sample_m / 2.0
    ys = np.arange(math.floor(lo_y / sample_m), math.ceil(hi_y / sample_m)) * sample_m + sample_m / 2.0
    if xs.size == 0 or ys.size == 0:
        return 0.0
    gx, gy = np.meshgrid(xs, ys)
    gx, gy = gx.ravel(), gy.ravel()
    both = (_camera_visibility(a, gx, gy, REF_HEIGHT_M, ())
            & _camera_visibility(b, gx, gy, REF_HEIGHT_M, ()))
    return float(both.sum()) * sample_m**2


# ---------------------------------------------------------------------------
# report metrics

def _polyline_samples(points, step: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(xs, ys, arc lengths) sampled every `step` meters along a polyline,
    including both endpoints of the final segment."""
    pts = np.asarray(points, dtype=float)
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    total = float(seg_len.sum())
    n = max(2, int(math.ceil(total / step)) + 1)
    s = np.linspace(0.0, total, n)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(seg_len[idx] > 0, (s - cum[idx]) / seg_len[idx], 0.0)
    xs = pts[idx, 0] + frac * seg[idx, 0]
    ys = pts[idx, 1] + frac * seg[idx, 1]
    return xs, ys, s


def _grid_lookup(grid: CoverageGrid, xs: np.ndarray, ys: np.ndarray,
                 values: np.ndarray, fill=0) -> np.ndarray:
    cols = np.floor((xs - grid.origin_m[0]) / grid.cell_m).astype(int)
    rows = np.floor((ys - grid.origin_m[1]) / grid.cell_m).astype(int)
    inside = (rows >= 0) & (rows < grid.rows) & (cols >= 0) & (cols < grid.cols)
    out = np.full(xs.shape, fill, dtype=values.dtype)
    out[inside] = values[rows[inside], cols[inside]]
    return out


def coverage_report(grid: CoverageGrid, layout: JunctionLayout) -> CoverageReport:
    """Coverage quality metrics against the junction layout.

    Requires the grid to contain roi_inner; raises InvalidArgumentError
    otherwise. Approach coverage is the farthest contiguous mono-covered
    arc length measured from the junction-side end of each approach
    polyline (sampled at half-cell steps).
    """
    for x, y in layout.roi_inner:
        if grid.cell_at(x, y) is None:
            raise InvalidArgumentError(
                f"grid does not cover roi_inner vertex ({x}, {y})")

    xs_g, ys_g = grid.spec.row_centers(0, grid.rows)
    stereo_flat = (grid.stereo_pairs.ravel() >= 1)
    mono_flat = (grid.mono_count.ravel() >= 1)

    inner = _points_in_polygon(xs_g, ys_g, layout.roi_inner)
    if not inner.any():
        raise InvalidArgumentError("no grid cell centers fall inside roi_inner")
    stereo_fraction_inner = float(stereo_flat[inner].mean())
    mono_fraction_inner = float(mono_flat[inner].mean())

    crosswalk_fracs = []
    for cw in sorted(layout.crosswalks, key=lambda c: c.index):
        in_cw = _points_in_polygon(xs_g, ys_g, cw.polygon)
        frac = float(stereo_flat[in_cw].mean()) if in_cw.any() else 0.0
        crosswalk_fracs.append((cw.index, frac))

    approach_cov = []
    for ap in layout.approaches:
        sx, sy, arc = _polyline_samples(ap.polyline, grid.cell_m / 2.0)
        covered = _grid_lookup(grid, sx, sy, grid.mono_count, fill=0) >= 1
        if covered.all():
            dist = float(arc[-1])
        else:
            first_gap = int(np.argmin(covered))  # first False
            dist = float(arc[first_gap - 1]) if first_gap > 0 else 0.0
        approach_cov.append((ap.direction, dist))

    bike_mask = np.zeros(xs_g.shape, dtype=bool)
    for lane in layout.lanes:
        if lane.kind != "bicycle":
            continue
        half_w = lane.width_m / 2.0
        pts = np.asarray(lane.centerline, dtype=float)
        for p, q in zip(pts, pts[1:]):
            d = q - p
            seg_sq = float(d @ d)
            if seg_sq == 0.0:
                continue
            t = np.clip(((xs_g - p[0]) * d[0] + (ys_g - p[1]) * d[1]) / seg_sq, 0.0, 1.0)
            dist_sq = (xs_g - (p[0] + t * d[0]))**2 + (ys_g - (p[1] + t * d[1]))**2
            bike_mask |= dist_sq <= half_w**2
    bicycle_fraction = float(stereo_flat[bike_mask].mean()) if bike_mask.any() else 0.0

    return CoverageReport(
        stereo_fraction_inner=stereo_fraction_inner,
        mono_fraction_inner=mono_fraction_inner,
        crosswalk_stereo_fractions=tuple(crosswalk_fracs),
        approach_covered_m=tuple(approach_cov),
        bicycle_stereo_fraction=bicycle_fraction,
    )


# ---------------------------------------------------------------------------
# placement optimization

DEFAULT_YAW_OFFSETS_DEG = (-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0)

# search spaces up to this many placements are enumerated exhaustively
# (covers e.g. 6 candidates x 8 yaw steps x 3 cameras = 10240)
_EXACT_SEARCH_LIMIT = 20_000


def _candidate_camera(cand: PlacementCandidate, yaw_offset_deg: float,
                      cam_id: int, template: CameraModel) -> CameraModel:
    pose = CameraPose(
        position_m=(cand.position_m[0], cand.position_m[1], cand.height_m),
        yaw_rad=cand.yaw_rad + math.radians(yaw_offset_deg),
        pitch_rad=cand.pitch_rad,
    )
    return CameraModel(id=cam_id, intrinsics=template.intrinsics, pose=pose,
                       max_range_m=template.max_range_m)


def placement_objective(report: CoverageReport, weights: ObjectiveWeights) -> float:
    cw = [f for _, f in report.crosswalk_stereo_fractions]
    ap = [d for _, d in report.approach_covered_m]
    obj = weights.stereo_inner * report.stereo_fraction_inner
    if cw:
        obj += weights.crosswalk_mean * (sum(cw) / len(cw))
    obj += weights.bicycle * report.bicycle_stereo_fraction
    if ap:
        obj += weights.approach_per_100m * (sum(ap) / len(ap)) / 100.0
    return obj


def evaluate_placement(s: Scenario, cameras, grid_spec: GridSpec,
                       weights: ObjectiveWeights,
                       constraints: PairConstraints) -> tuple[float, CoverageReport]:
    trial = replace(s, cameras=tuple(cameras))
    grid = compute_coverage(trial, grid_spec, constraints=constraints)
    report = coverage_report(grid, s.layout)
    return placement_objective(report, weights), report


def optimize_placement(s: Scenario, candidates, n_cameras: int,
                       weights: ObjectiveWeights = ObjectiveWeights(), *,
                       grid_spec: GridSpec | None = None,
                       constraints: PairConstraints = PairConstraints(),
                       yaw_offsets_deg=DEFAULT_YAW_OFFSETS_DEG,
                       camera_template: CameraModel | None = None,
                       seed: int = 0) -> PlacementResult:
    """Optimize camera placement over a finite candidate × yaw-offset grid.

    Small search spaces (at most `_EXACT_SEARCH_LIMIT` evaluations) are
    enumerated exhaustively, so the result is the true optimum there.
    Larger instances use greedy seeding (one candidate at a time, offset
    0) followed by local search applying the best single-placement move
    — swapping a slot to any unselected candidate or re-aiming a slot to
    any other yaw offset — until no move improves. Deterministic:
    candidate/offset order breaks ties. The result is never worse than
    the greedy seed.

    `seed` is accepted for interface symmetry; the algorithm is
    deterministic and ignores it.
    """
    candidates = list(candidates)
    if n_cameras < 1:
        raise InvalidArgumentError("n_cameras must be >= 1")
    if len(candidates) < n_cameras:
        raise InvalidArgumentError(
            f"need at least {n_cameras} candidates, got {len(candidates)}")
    offsets = tuple(float(o) for o in yaw_offsets_deg)
    if not offsets:
        raise InvalidArgumentError("yaw_offsets_deg must be non-empty")

    if camera_template is None:
        camera_template = s.cameras[0] if s.cameras else CameraModel(
            id=1, intrinsics=intrinsics_from_lens(71.0, 4096, 2160),
            pose=CameraPose((0.0, 0.0, 6.0), 0.0, 0.0), max_range_m=120.0)
    if grid_spec is None:
        xs = [p[0] for p in s.layout.roi_inner]
        ys = [p[1] for p in s.layout.roi_inner]
        grid_spec = GridSpec.from_bounds((min(xs) - 10.0, min(ys) - 10.0),
                                         (max(xs) + 10.0, max(ys) + 10.0), 1.0)

    cache: dict[tuple[tuple[int, float], ...], tuple[float, CoverageReport]] = {}

    def evaluate(selection) -> tuple[float, CoverageReport]:
        key = tuple(sorted(selection))
        if key not in cache:
            cams = [_candidate_camera(candidates[ci], off, slot + 1, camera_template)
                    for slot, (ci, off) in enumerate(key)]
            cache[key] = evaluate_placement(s, cams, grid_spec, weights, constraints)
        return cache[key]

    # feasibility: at least one candidate must see some of the inner roi
    if all(evaluate(((ci, 0.0),))[1].mono_fraction_inner == 0.0
           for ci in range(len(candidates))):
        raise InfeasiblePlacementError("no candidate covers any of roi_inner")

    # greedy seeding at offset 0
    selection: list[tuple[int, float]] = []
    for _ in range(n_cameras):
        chosen = None
        best = -math.inf
        for ci in range(len(candidates)):
            if any(ci == used for used, _ in selection):
                continue
            obj, _ = evaluate(tuple(selection + [(ci, 0.0)]))
            if obj > best + 1e-12:
                best, chosen = obj, ci
        selection.append((chosen, 0.0))
    greedy_objective, _ = evaluate(tuple(selection))

    total_evals = math.comb(len(candidates), n_cameras) * len(offsets) ** n_cameras
    if total_evals <= _EXACT_SEARCH_LIMIT:
        # exact enumeration of every candidate subset and offset vector
        best_sel = tuple(selection)
        best_obj = greedy_objective
        for combo in combinations(range(len(candidates)), n_cameras):
            for offs in product(offsets, repeat=n_cameras):
                obj, _ = evaluate(tuple(zip(combo, offs)))
                if obj > best_obj + 1e-12:
                    best_obj = obj
                    best_sel = tuple(zip(combo, offs))
        selection = list(best_sel)
    else:
        # local search: best single-placement move per round
        current_obj = greedy_objective
        improved = True
        while improved:
            improved = False
            best_move = None
            best_obj = current_obj
            for slot in range(n_cameras):
                used = {ci for ci, _ in selection}
                for ci in range(len(candidates)):
                    if ci != selection[slot][0] and ci in used:
                        continue
                    for off in offsets:
                        if (ci, off) == selection[slot]:
                            continue
                        trial = list(selection)
                        trial[slot] = (ci, off)
                        obj, _ = evaluate(tuple(trial))
                        if obj > best_obj + 1e-12:
                            best_obj = obj
                            best_move = (slot, ci, off)
            if best_move is not None:
                slot, ci, off = best_move
                selection[slot] = (ci, off)
                current_obj = best_obj
                improved = True

    final_obj, report = evaluate(tuple(selection))
    ordered = sorted(selection)
    placed = tuple(
        SelectedPlacement(candidate=candidates[ci], yaw_offset_deg=off,
                          camera=_candidate_camera(candidates[ci], off, slot + 1,
                                                   camera_template))
        for slot, (ci, off) in enumerate(ordered))
    return PlacementResult(selected=placed, report=report,
                           objective=final_obj, greedy_objective=greedy_objective)
