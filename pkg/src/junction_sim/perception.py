"""Synthetic perception chain on ground-truth actors.

Per frame: noisy 2D detections per camera, epipolar stereo matching per
camera pair, midpoint triangulation to 3D observations, information-form
fusion of all stereo systems, and constant-velocity tracking in world
ground-plane coordinates. The detector is ground-truth-derived with
parametric noise (pixel sigma, miss rate, occlusion threshold, false
positives) so the whole chain is deterministic given the scenario and
noise seeds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .coverage import (
    PairConstraints,
    StereoPairSpec,
    _camera_visibility,
    enumerate_stereo_pairs,
    visible,
)
from .errors import (
    DegenerateGeometryError,
    DegenerateObservationError,
    InvalidArgumentError,
)
from .geometry import (
    CameraModel,
    _projection_jacobian,
    backproject,
    camera_forward,
    project,
    stereo_axis_angle,
    triangulate_midpoint,
)
from .scene import BoxShape, Scenario, actor_pose_at, validate_scenario
from .scenario_io import TrajectoryRecord

DEFAULT_START_UTC_NS = 1_700_000_000_000_000_000
GAP_LIMIT_M = 0.5          # midpoint gap above which a match is a mismatch
COVARIANCE_FLOOR_M2 = 1e-12  # keeps zero-noise observations invertible
_BIG_COST = 1e12


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class Detection2D:
    """One synthetic detector output in one camera image.

    Confidence is implied 1.0; detector confidence modeling is out of
    scope. `truth_actor_id` links back to the generating actor and is
    for evaluation only (None for false positives).
    """
    camera_id: int
    trigger_utc_ns: int
    center_px: tuple[float, float]
    bbox_px: tuple[float, float]
    kind: str
    keypoints_px: tuple[tuple[str, tuple[float, float]], ...] = ()
    truth_actor_id: int | None = None

    def __post_init__(self):
        if self.bbox_px[0] <= 0 or self.bbox_px[1] <= 0:
            raise InvalidArgumentError("bbox dimensions must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    """Parameters of the synthetic detector.

    Parameters
    ----------
    sigma_px : float
        Gaussian pixel noise SD added to every projected point.
    miss_base : float
        Per-detection Bernoulli miss probability.
    occlusion_miss_threshold : float
        An actor is dropped when more than this fraction of its 9
        silhouette sample points is blocked by occluders.
    fp_rate_per_frame : float
        Poisson intensity of uniform false positives per camera frame.
    seed : int
        Noise stream seed; combined with the scenario seed, camera id
        and frame time, so repeat runs are identical.
    """
    sigma_px: float = 0.0
    miss_base: float = 0.0
    occlusion_miss_threshold: float = 0.5
    fp_rate_per_frame: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_px < 0:
            raise InvalidArgumentError("sigma_px must be >= 0")
        if not 0.0 <= self.miss_base <= 1.0:
            raise InvalidArgumentError("miss_base must be in [0, 1]")
        if not 0.0 <= self.occlusion_miss_threshold <= 1.0:
            raise InvalidArgumentError(
                "occlusion_miss_threshold must be in [0, 1]")
        if self.fp_rate_per_frame < 0:
            raise InvalidArgumentError("fp_rate_per_frame must be >= 0")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be >= 0")


@dataclass(frozen=True, eq=False)
class Observation3D:
    """A triangulated 3D point with first-order uncertainty.

    `pair` is the producing stereo system, or None after fusion across
    systems; `n_views` counts contributing stereo observations.
    """
    position_m: np.ndarray
    covariance_m2: np.ndarray
    pair: StereoPairSpec | None
    trigger_utc_ns: int
    kind: str
    n_views: int = 1
    keypoints_m: tuple[tuple[str, tuple[float, float, float]], ...] = ()
    truth_actor_id: int | None = None

    def __post_init__(self):
        pos = np.asarray(self.position_m, dtype=float).reshape(3)
        cov = np.asarray(self.covariance_m2, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(cov)):
            raise InvalidArgumentError("observation must be finite")
        if not np.allclose(cov, cov.T, atol=1e-9):
            raise InvalidArgumentError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov)[0] < -1e-9:
            raise InvalidArgumentError("covariance must be PSD")
        object.__setattr__(self, "position_m", pos)
        object.__setattr__(self, "covariance_m2", 0.5 * (cov + cov.T))


@dataclass(frozen=True)
class TrackPoint:
    """One exported track state: time, plane position, velocity, and the
    number of stereo views behind the update (0 while coasting)."""
    trigger_utc_ns: int
    x_m: float
    y_m: float
    vx_mps: float
    vy_mps: float
    n_views: int


@dataclass
class Track:
    """A ground-plane constant-velocity track (x, y, vx, vy)."""
    id: int
    kind: str
    state: np.ndarray
    covariance: np.ndarray
    age_frames: int = 0
    hits: int = 0
    misses_in_row: int = 0
    confirmed: bool = False
    history: list[TrackPoint] = field(default_factory=list)


@dataclass(frozen=True)
class TrackerConfig:
    """Lifecycle and filter constants for the world-coordinate tracker."""
    sigma_accel: float = 2.0     # white-acceleration SD, m/s^2
    gate: float = 3.0            # Mahalanobis association gate
    confirm_hits: int = 3
    max_misses: int = 25         # 1 s at 25 Hz
    init_speed_sd: float = 10.0  # prior speed SD for new tracks, m/s

    def __post_init__(self):
        if self.sigma_accel <= 0 or self.gate <= 0 or self.init_speed_sd <= 0:
            raise InvalidArgumentError("tracker scales must be positive")
        if self.confirm_hits < 1 or self.max_misses < 1:
            raise InvalidArgumentError("lifecycle counts must be >= 1")


@dataclass(frozen=True)
class StereoMatches:
    """Output of one stereo matching step."""
    pair: StereoPairSpec
    trigger_utc_ns: int
    matches: tuple[tuple[Detection2D, Detection2D], ...]
    unmatched_a: tuple[Detection2D, ...]
    unmatched_b: tuple[Detection2D, ...]


# ---------------------------------------------------------------------------
# synthetic detection

def _actor_extent(shape) -> tuple[float, float]:
    """(lateral half-extent, height) of an actor shape."""
    if isinstance(shape, BoxShape):
        return 0.5 * math.hypot(shape.length_m, shape.width_m), shape.height_m
    return shape.radius_m, shape.height_m


def _silhouette_points(x: float, y: float, shape, cam_pos):
    """3x3 grid of sample points on the actor silhouette facing the
    camera: three heights times three lateral offsets perpendicular to
    the viewing direction."""
    half_w, h = _actor_extent(shape)
    vx, vy = x - cam_pos[0], y - cam_pos[1]
    norm = math.hypot(vx, vy)
    px, py = (-vy / norm, vx / norm) if norm > 1e-12 else (1.0, 0.0)
    xs, ys, zs = [], [], []
    for dz in (0.1 * h, 0.5 * h, 0.9 * h):
        for lat in (-half_w, 0.0, half_w):
            xs.append(x + lat * px)
            ys.append(y + lat * py)
            zs.append(dz)
    return np.array(xs), np.array(ys), np.array(zs)


def _keypoint_offsets(shape) -> tuple[tuple[str, float], ...]:
    h = _actor_extent(shape)[1]
    return (("head", 0.9 * h), ("center", 0.5 * h), ("base", 0.1 * h))


def synth_detect(s: Scenario, cam: CameraModel, t: float, noise: NoiseConfig,
                 *, start_utc_ns: int = DEFAULT_START_UTC_NS,
                 trigger_utc_ns: int | None = None,
                 with_keypoints: bool = False) -> list[Detection2D]:
    """Synthesize detections of all scenario actors in one camera frame.

    An actor alive at `t` is detected iff its reference point (plane
    position at `ref_height_m`) is in the camera frustum and range, the
    range does not
    exceed the current weather visibility, at most
    `occlusion_miss_threshold` of its silhouette samples are occluded,
    and the per-detection Bernoulli miss does not fire. Detected centers
    get Gaussian pixel noise; Poisson false positives are appended.
    Deterministic given (scenario seed, noise seed).
    """
    if not 0.0 <= t <= s.duration_s:
        raise InvalidArgumentError(f"t={t} outside scenario duration")
    frame_ns = round(t * 1e9)
    if trigger_utc_ns is None:
        trigger_utc_ns = start_utc_ns + frame_ns
    rng = np.random.default_rng([noise.seed, s.seed, cam.id, frame_ns])
    cam_pos = np.asarray(cam.pose.position_m)
    forward = camera_forward(cam)
    visibility_m = s.weather.visibility_at(t)
    intr = cam.intrinsics

    out: list[Detection2D] = []
    for actor in s.actors:
        pose = actor_pose_at(actor, t)
        if pose is None:
            continue
        x, y, _ = pose
        half_w, h = _actor_extent(actor.shape)
        ref = np.array([x, y, actor.ref_height_m])
        if not visible(cam, ref):  # frustum + range; occlusion handled below
            continue
        if float(np.linalg.norm(ref - cam_pos)) > visibility_m:
            continue
        if s.occluders:
            sx, sy, sz = _silhouette_points(x, y, actor.shape, cam_pos)
            clear = _camera_visibility(cam, sx, sy, sz, ())
            with_occ = _camera_visibility(cam, sx, sy, sz, s.occluders)
            occluded_fraction = float(np.mean(clear & ~with_occ))
            if occluded_fraction > noise.occlusion_miss_threshold:
                continue
        if rng.random() < noise.miss_base:
            continue
        u, v = project(cam, ref)
        du, dv = rng.normal(0.0, noise.sigma_px, 2)
        depth = float((ref - cam_pos) @ forward)
        bbox = (max(1.0, intr.fx_px * 2.0 * half_w / depth),
                max(1.0, intr.fy_px * h / depth))
        keypoints: tuple = ()
        if with_keypoints:
            kps = []
            for name, z in _keypoint_offsets(actor.shape):
                pix = project(cam, (x, y, z))
                if pix is not None:
                    ku, kv = rng.normal(0.0, noise.sigma_px, 2)
                    kps.append((name, (pix[0] + ku, pix[1] + kv)))
            keypoints = tuple(kps)
        out.append(Detection2D(cam.id, trigger_utc_ns, (u + du, v + dv),
                               bbox, actor.kind, keypoints, actor.id))

    for _ in range(int(rng.poisson(noise.fp_rate_per_frame))):
        fu = rng.uniform(0.0, intr.width_px)
        fv = rng.uniform(0.0, intr.height_px)
        out.append(Detection2D(cam.id, trigger_utc_ns, (float(fu), float(fv)),
                               (8.0, 16.0), "clutter"))
    return out


# ---------------------------------------------------------------------------
# stereo matching

def epipolar_distance_px(cam_a: CameraModel, cam_b: CameraModel,
                         uv_a: tuple[float, float],
                         uv_b: tuple[float, float]) -> float:
    """Distance in image b from `uv_b` to the epipolar line of `uv_a`.

    The line is traced by projecting two points of the back-projected
    ray; returns inf when the ray does not project into image b.
    """
    ray = backproject(cam_a, *uv_a)
    pts = []
    for depth in (2.0, 30.0, 120.0, 500.0):
        pix = project(cam_b, ray.origin_m + depth * ray.direction)
        if pix is not None:
            pts.append(pix)
            if len(pts) == 2:
                break
    if len(pts) < 2:
        return math.inf
    (x1, y1), (x2, y2) = pts
    dx, dy = x2 - x1, y2 - y1
    length = math.hypot(dx, dy)
    if length < 1e-9:
        return math.hypot(uv_b[0] - x1, uv_b[1] - y1)
    return abs(dy * (uv_b[0] - x1) - dx * (uv_b[1] - y1)) / length


def match_stereo(a: list[Detection2D], b: list[Detection2D],
                 cam_a: CameraModel, cam_b: CameraModel,
                 gate_px: float = 5.0, *,
                 pair: StereoPairSpec | None = None) -> StereoMatches:
    """Optimal one-to-one epipolar assignment between two detection lists.

    Minimizes the summed point-to-epipolar-line distance in image b
    (Hungarian assignment); pairs above `gate_px` or with differing
    classes are left unmatched. `pair` defaults to a spec built from the
    two cameras (overlap not computed).
    """
    if gate_px <= 0:
        raise InvalidArgumentError("gate_px must be positive")
    for det, cam in [(d, cam_a) for d in a] + [(d, cam_b) for d in b]:
        if det.camera_id != cam.id:
            raise InvalidArgumentError(
                f"detection camera {det.camera_id} does not match camera {cam.id}")
    triggers = {d.trigger_utc_ns for d in a} | {d.trigger_utc_ns for d in b}
    if len(triggers) > 1:
        raise InvalidArgumentError("detections span multiple trigger times")
    trigger = triggers.pop() if triggers else 0
    if pair is None:
        lo, hi = sorted((cam_a, cam_b), key=lambda c: c.id)
        pair = StereoPairSpec(lo.id, hi.id, stereo_axis_angle(lo, hi), 0.0)

    if not a or not b:
        return StereoMatches(pair, trigger, (), tuple(a), tuple(b))
    cost = np.full((len(a), len(b)), _BIG_COST)
    for i, da in enumerate(a):
        for j, db in enumerate(b):
            if da.kind != db.kind:
                continue
            d = epipolar_distance_px(cam_a, cam_b, da.center_px, db.center_px)
            if d <= gate_px:
                cost[i, j] = d
    rows, cols = linear_sum_assignment(cost)
    matched = [(i, j) for i, j in zip(rows, cols) if cost[i, j] < _BIG_COST]
    used_a = {i for i, _ in matched}
    used_b = {j for _, j in matched}
    return StereoMatches(
        pair, trigger,
        tuple((a[i], b[j]) for i, j in matched),
        tuple(d for i, d in enumerate(a) if i not in used_a),
        tuple(d for j, d in enumerate(b) if j not in used_b))


# ---------------------------------------------------------------------------
# triangulation to 3D observations

def _pair_covariance(cam_a: CameraModel, cam_b: CameraModel,
                     point: np.ndarray, sigma_px: float) -> np.ndarray:
    """First-order propagation of pixel noise through both projections:
    sigma^2 (J^T J)^-1 for the stacked 4x3 projection Jacobian, plus a
    tiny isotropic floor so zero-noise observations stay invertible."""
    ja = _projection_jacobian(cam_a, point)
    jb = _projection_jacobian(cam_b, point)
    if ja is None or jb is None:
        raise DegenerateGeometryError("triangulated point behind a camera")
    j = np.vstack([ja, jb])
    jtj = j.T @ j
    try:
        inv = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        raise DegenerateGeometryError("projection Jacobians are rank-deficient")
    cov = sigma_px**2 * inv + COVARIANCE_FLOOR_M2 * np.eye(3)
    return 0.5 * (cov + cov.T)


def observe(matched: StereoMatches, cam_a: CameraModel, cam_b: CameraModel,
            *, sigma_px: float = 0.0,
            gap_limit_m: float = GAP_LIMIT_M) -> list[Observation3D]:
    """Triangulate matched detections into 3D observations.

    Each match is triangulated at the midpoint of the common
    perpendicular; matches whose ray gap exceeds `gap_limit_m` are
    rejected as mismatches. Keypoints present in both detections are
    triangulated through the same code path.
    """
    out: list[Observation3D] = []
    for det_a, det_b in matched.matches:
        pos, gap = triangulate_midpoint(
            backproject(cam_a, *det_a.center_px),
            backproject(cam_b, *det_b.center_px))
        if gap > gap_limit_m:
            continue
        cov = _pair_covariance(cam_a, cam_b, pos, sigma_px)
        kp_b = dict(det_b.keypoints_px)
        keypoints = []
        for name, uv_a in det_a.keypoints_px:
            if name not in kp_b:
                continue
            kp_pos, kp_gap = triangulate_midpoint(
                backproject(cam_a, *uv_a), backproject(cam_b, *kp_b[name]))
            if kp_gap <= gap_limit_m:
                keypoints.append((name, tuple(float(c) for c in kp_pos)))
        truth = (det_a.truth_actor_id
                 if det_a.truth_actor_id == det_b.truth_actor_id else None)
        out.append(Observation3D(pos, cov, matched.pair,
                                 matched.trigger_utc_ns, det_a.kind,
                                 keypoints_m=tuple(keypoints),
                                 truth_actor_id=truth))
    return out


# ---------------------------------------------------------------------------
# fusion across stereo systems

def _mutual_mahalanobis(a: Observation3D, b: Observation3D) -> float:
    delta = a.position_m - b.position_m
    s = a.covariance_m2 + b.covariance_m2
    try:
        return float(math.sqrt(max(0.0, delta @ np.linalg.solve(s, delta))))
    except np.linalg.LinAlgError:
        raise DegenerateObservationError("singular pairwise covariance")


def fuse(observations: list[Observation3D],
         gate: float = 3.0) -> list[Observation3D]:
    """Fuse same-target observations from different stereo systems.

    Observations of equal class within mutual Mahalanobis distance
    `gate` are clustered (transitively) and combined in information
    form: the fused covariance is the inverse of the summed inverses.
    """
    if not observations:
        return []
    if len({o.trigger_utc_ns for o in observations}) > 1:
        raise InvalidArgumentError("observations span multiple trigger times")
    n = len(observations)
    infos = []
    for o in observations:
        try:
            infos.append(np.linalg.inv(o.covariance_m2))
        except np.linalg.LinAlgError:
            raise DegenerateObservationError("singular observation covariance")

    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if observations[i].kind != observations[j].kind:
                continue
            if _mutual_mahalanobis(observations[i], observations[j]) < gate:
                parent[find(i)] = find(j)

    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)

    out = []
    for members in sorted(clusters.values(), key=lambda m: m[0]):
        if len(members) == 1:
            out.append(observations[members[0]])
            continue
        info = sum(infos[i] for i in members)
        cov = np.linalg.inv(info)
        mean = cov @ sum(infos[i] @ observations[i].position_m for i in members)
        truths = {observations[i].truth_actor_id for i in members}
        first = observations[members[0]]
        out.append(Observation3D(
            mean, 0.5 * (cov + cov.T), None, first.trigger_utc_ns, first.kind,
            n_views=sum(observations[i].n_views for i in members),
            truth_actor_id=truths.pop() if len(truths) == 1 else None))
    return out


# ---------------------------------------------------------------------------
# tracking

_H = np.array([[1.0, 0.0, 0.0, 0.0],
               [0.0, 1.0, 0.0, 0.0]])


def _transition(dt: float, sigma_accel: float) -> tuple[np.ndarray, np.ndarray]:
    f = np.eye(4)
    f[0, 2] = f[1, 3] = dt
    q1 = sigma_accel**2 * np.array([[dt**4 / 4.0, dt**3 / 2.0],
                                    [dt**3 / 2.0, dt**2]])
    q = np.zeros((4, 4))
    q[np.ix_([0, 2], [0, 2])] = q1
    q[np.ix_([1, 3], [1, 3])] = q1
    return f, q


def _new_track(track_id: int, obs: Observation3D) -> Track:
    p = np.zeros((4, 4))
    p[:2, :2] = obs.covariance_m2[:2, :2]
    p[2, 2] = p[3, 3] = TrackerConfig().init_speed_sd**2
    state = np.array([obs.position_m[0], obs.position_m[1], 0.0, 0.0])
    return Track(track_id, obs.kind, state, p, age_frames=1, hits=1)


def _track_point(track: Track, trigger_utc_ns: int, n_views: int) -> TrackPoint:
    x, y, vx, vy = (float(c) for c in track.state)
    return TrackPoint(trigger_utc_ns, x, y, vx, vy, n_views)


def track_step(tracks: list[Track], fused: list[Observation3D], dt_s: float,
               config: TrackerConfig = TrackerConfig(), *,
               trigger_utc_ns: int | None = None,
               next_id: int | None = None) -> list[Track]:
    """Advance all tracks by one frame against the fused observations.

    Constant-velocity predict, Mahalanobis-gated optimal assignment,
    Kalman update for matches, coasting for unmatched tracks (deleted
    after `max_misses` consecutive misses) and tentative births for
    unmatched observations (confirmed after `confirm_hits` hits).
    Tracks are updated in place; the returned list is the new active set.
    """
    if dt_s <= 0:
        raise InvalidArgumentError("dt_s must be positive")
    if trigger_utc_ns is None:
        if fused:
            trigger_utc_ns = fused[0].trigger_utc_ns
        elif tracks and tracks[0].history:
            trigger_utc_ns = tracks[0].history[-1].trigger_utc_ns + round(dt_s * 1e9)
        else:
            trigger_utc_ns = 0
    if next_id is None:
        next_id = max((t.id for t in tracks), default=0) + 1

    f, q = _transition(dt_s, config.sigma_accel)
    for track in tracks:
        track.state = f @ track.state
        track.covariance = f @ track.covariance @ f.T + q
        track.age_frames += 1

    cost = np.full((len(tracks), len(fused)), _BIG_COST)
    gains = {}
    for i, track in enumerate(tracks):
        for j, obs in enumerate(fused):
            if track.kind != obs.kind:
                continue
            r = obs.covariance_m2[:2, :2]
            s = _H @ track.covariance @ _H.T + r
            innov = obs.position_m[:2] - _H @ track.state
            d = math.sqrt(max(0.0, float(innov @ np.linalg.solve(s, innov))))
            if d < config.gate:
                cost[i, j] = d
                gains[(i, j)] = (s, innov)
    rows, cols = linear_sum_assignment(cost) if tracks and fused else ((), ())
    matched = {(i, j) for i, j in zip(rows, cols) if cost[i, j] < _BIG_COST}
    matched_tracks = {i for i, _ in matched}
    matched_obs = {j for _, j in matched}

    survivors = []
    for i, track in enumerate(tracks):
        if i in matched_tracks:
            j = next(jj for ii, jj in matched if ii == i)
            s, innov = gains[(i, j)]
            k = track.covariance @ _H.T @ np.linalg.inv(s)
            track.state = track.state + k @ innov
            p = (np.eye(4) - k @ _H) @ track.covariance
            track.covariance = 0.5 * (p + p.T)
            track.hits += 1
            track.misses_in_row = 0
            if track.hits >= config.confirm_hits:
                track.confirmed = True
            track.history.append(
                _track_point(track, trigger_utc_ns, fused[j].n_views))
            survivors.append(track)
        else:
            track.misses_in_row += 1
            if track.misses_in_row >= config.max_misses:
                continue  # deleted
            track.history.append(_track_point(track, trigger_utc_ns, 0))
            survivors.append(track)

    for j, obs in enumerate(fused):
        if j in matched_obs:
            continue
        track = _new_track(next_id, obs)
        next_id += 1
        if track.hits >= config.confirm_hits:
            track.confirmed = True
        track.history.append(_track_point(track, trigger_utc_ns, obs.n_views))
        survivors.append(track)
    return survivors


class Tracker:
    """Stateful wrapper around track_step that owns id allocation and
    retains deleted tracks for export."""

    def __init__(self, config: TrackerConfig = TrackerConfig()):
        self.config = config
        self.active: list[Track] = []
        self.all: list[Track] = []
        self._next_id = 1

    def step(self, fused: list[Observation3D], dt_s: float,
             trigger_utc_ns: int | None = None) -> list[Track]:
        self.active = track_step(self.active, fused, dt_s, self.config,
                                 trigger_utc_ns=trigger_utc_ns,
                                 next_id=self._next_id)
        known = {t.id for t in self.all}
        for track in self.active:
            if track.id not in known:
                self.all.append(track)
        if self.active:
            self._next_id = max(self._next_id,
                                max(t.id for t in self.active) + 1)
        return self.active


# ---------------------------------------------------------------------------
# export and frame-loop driver

def export_trajectories(tracks, *,
                        include_tentative: bool = False) -> list[TrajectoryRecord]:
    """Flatten track histories into trajectory records, ordered by
    (track id, time). Tentative tracks are skipped unless requested."""
    records = []
    for track in sorted(tracks, key=lambda t: t.id):
        if not (track.confirmed or include_tentative):
            continue
        for pt in track.history:
            records.append(TrajectoryRecord(
                track.id, track.kind, pt.trigger_utc_ns, pt.x_m, pt.y_m,
                pt.vx_mps, pt.vy_mps, pt.n_views))
    return records


@dataclass(frozen=True)
class PerceptionStats:
    frames: int
    detections: int
    observations: int
    fused_observations: int
    tracks_created: int
    tracks_confirmed: int


@dataclass(frozen=True, eq=False)
class PerceptionResult:
    tracks: tuple[Track, ...]
    records: tuple[TrajectoryRecord, ...]
    stats: PerceptionStats


def run_perception(s: Scenario, noise: NoiseConfig = NoiseConfig(),
                   tracker_config: TrackerConfig = TrackerConfig(), *,
                   duration_s: float | None = None,
                   constraints: PairConstraints = PairConstraints(),
                   gate_px: float = 5.0, gap_limit_m: float = GAP_LIMIT_M,
                   start_utc_ns: int = DEFAULT_START_UTC_NS,
                   with_keypoints: bool = False) -> PerceptionResult:
    """Run the full perception chain over every frame of a scenario.

    Per trigger: detect in every camera, match and triangulate per
    stereo pair, fuse across pairs, and advance the tracker. Returns all
    tracks ever created (deleted ones included) plus the exported
    trajectory records of the confirmed ones.
    """
    violations = validate_scenario(s)
    if violations:
        v = violations[0]
        raise InvalidArgumentError(f"invalid scenario: {v.entity}: {v.detail}")
    pairs = enumerate_stereo_pairs(s.cameras, constraints)
    cams = {c.id: c for c in s.cameras}
    duration = s.duration_s if duration_s is None else float(duration_s)
    if not 0 < duration <= s.duration_s:
        raise InvalidArgumentError("duration_s must be in (0, scenario duration]")
    period_ns = round(1e9 / s.frame_rate_hz)
    n_frames = math.floor(duration * s.frame_rate_hz) + 1
    dt = 1.0 / s.frame_rate_hz

    tracker = Tracker(tracker_config)
    n_det = n_obs = n_fused = 0
    for k in range(n_frames):
        t = k / s.frame_rate_hz
        trigger = start_utc_ns + k * period_ns
        detections = {cam.id: synth_detect(s, cam, t, noise,
                                           trigger_utc_ns=trigger,
                                           with_keypoints=with_keypoints)
                      for cam in s.cameras}
        frame_obs: list[Observation3D] = []
        for pair in pairs:
            cam_a, cam_b = cams[pair.cam_a], cams[pair.cam_b]
            matched = match_stereo(detections[cam_a.id], detections[cam_b.id],
                                   cam_a, cam_b, gate_px, pair=pair)
            frame_obs.extend(observe(matched, cam_a, cam_b,
                                     sigma_px=noise.sigma_px,
                                     gap_limit_m=gap_limit_m))
        fused = fuse(frame_obs)
        tracker.step(fused, dt, trigger_utc_ns=trigger)
        n_det += sum(len(d) for d in detections.values())
        n_obs += len(frame_obs)
        n_fused += len(fused)

    records = export_trajectories(tracker.all)
    stats = PerceptionStats(n_frames, n_det, n_obs, n_fused,
                            len(tracker.all),
                            sum(1 for t in tracker.all if t.confirmed))
    return PerceptionResult(tuple(tracker.all), tuple(records), stats)
