import math
import random

import numpy as np
import pytest

from perception_oracle import (
    oracle_assignment,
    oracle_epipolar_distance,
)

from junction_sim import perception as pc
from junction_sim import scenario_io
from junction_sim.errors import (
    DegenerateObservationError,
    InvalidArgumentError,
)
from junction_sim.geometry import (
    CameraModel,
    CameraPose,
    intrinsics_from_lens,
    project,
)
from junction_sim.scene import (
    Actor,
    BoxShape,
    CylinderShape,
    JunctionLayout,
    Occluder,
    Scenario,
    WeatherState,
)

INTR = intrinsics_from_lens(71.0, 1920, 1080)
START = pc.DEFAULT_START_UTC_NS


def make_scene(actors, cams, occluders=(), weather=(), duration=10.0, seed=0):
    layout = JunctionLayout(lanes=(), crosswalks=(),
                            roi_inner=((-30.0, -30.0), (30.0, -30.0),
                                       (30.0, 30.0), (-30.0, 30.0)),
                            approaches=())
    return Scenario(layout=layout, occluders=tuple(occluders),
                    cameras=tuple(cams), actors=tuple(actors),
                    weather=WeatherState(tuple(weather)),
                    duration_s=duration, seed=seed)


def ped(aid, samples, kind="pedestrian"):
    return Actor(aid, kind, tuple(samples), CylinderShape(0.3, 1.8), 1.0)


def aimed_camera(cid, position, look_at, max_range=120.0):
    dx = look_at[0] - position[0]
    dy = look_at[1] - position[1]
    yaw = math.atan2(dy, dx)
    pitch = math.atan2(position[2] - look_at[2], math.hypot(dx, dy))
    return CameraModel(cid, INTR, CameraPose(tuple(position), yaw, pitch),
                       max_range)


CAM_A = aimed_camera(1, (0.0, 0.0, 4.0), (10.0, 28.0, 1.0))
CAM_B = aimed_camera(2, (20.0, 0.0, 4.0), (10.0, 28.0, 1.0))
WALKER = ped(1, [(0.0, -5.0, 0.0, 0.0, 1.0), (10.0, 5.0, 0.0, 0.0, 1.0)])
RING_A = aimed_camera(1, (-25.0, -25.0, 6.0), (0.0, 0.0, 1.0))
RING_B = aimed_camera(2, (25.0, -25.0, 6.0), (0.0, 0.0, 1.0))


def detection_at(cam, point, kind="pedestrian", trigger=START, actor_id=None):
    uv = project(cam, point)
    assert uv is not None
    return pc.Detection2D(cam.id, trigger, uv, (20.0, 40.0), kind,
                          truth_actor_id=actor_id)


class TestNoiseConfig:
    def test_validation(self):
        for kwargs in ({"sigma_px": -1.0}, {"miss_base": 1.5},
                       {"occlusion_miss_threshold": -0.1},
                       {"fp_rate_per_frame": -2.0}, {"seed": -1}):
            with pytest.raises(InvalidArgumentError):
                pc.NoiseConfig(**kwargs)


class TestSynthDetect:
    def test_noiseless_exact_projection(self):
        s = make_scene([WALKER], [RING_A, RING_B])
        dets = pc.synth_detect(s, RING_A, 0.0, pc.NoiseConfig())
        assert len(dets) == 1
        d = dets[0]
        assert d.center_px == pytest.approx(project(RING_A, (-5.0, 0.0, 1.0)))
        assert d.truth_actor_id == 1
        assert d.kind == "pedestrian"
        assert d.bbox_px[0] > 0 and d.bbox_px[1] > 0
        assert d.trigger_utc_ns == START

    def test_actor_behind_camera_not_detected(self):
        behind = ped(1, [(0.0, -40.0, -40.0, 0.0, 0.0),
                         (10.0, -40.0, -40.0, 0.0, 0.0)])
        s = make_scene([behind], [RING_A, RING_B])
        assert pc.synth_detect(s, RING_A, 0.0, pc.NoiseConfig()) == []

    def test_visibility_gate(self):
        s = make_scene([WALKER], [RING_A, RING_B], weather=[(0.0, 10.0)])
        assert pc.synth_detect(s, RING_A, 0.0, pc.NoiseConfig()) == []
        clear = make_scene([WALKER], [RING_A, RING_B], weather=[(0.0, 500.0)])
        assert len(pc.synth_detect(clear, RING_A, 0.0, pc.NoiseConfig())) == 1

    def test_occlusion_fraction_threshold(self):
        # camera at z=6 looks at a 1.8 m pedestrian 20 m away; a 3.5 m
        # wall halfway blocks sight lines to silhouette samples below
        # z=1.0: the 0.18 and 0.90 rows (6 of 9 points).
        cam = CameraModel(1, INTR, CameraPose((0.0, 0.0, 6.0), 0.0,
                                              math.radians(14.0)), 120.0)
        actor = ped(1, [(0.0, 20.0, 0.0, 0.0, 0.0), (10.0, 20.0, 0.0, 0.0, 0.0)])
        wall = Occluder(((9.9, -2.0), (10.1, -2.0), (10.1, 2.0), (9.9, 2.0)),
                        3.5, "building")
        s = make_scene([actor], [cam, RING_B], occluders=[wall])
        hidden = pc.synth_detect(s, cam, 0.0,
                                 pc.NoiseConfig(occlusion_miss_threshold=0.5))
        seen = pc.synth_detect(s, cam, 0.0,
                               pc.NoiseConfig(occlusion_miss_threshold=0.7))
        assert hidden == []
        assert len(seen) == 1

    def test_miss_rate_monte_carlo(self):
        stationary = ped(1, [(0.0, -5.0, 0.0, 0.0, 0.0),
                             (400.0, -5.0, 0.0, 0.0, 0.0)])
        s = make_scene([stationary], [RING_A, RING_B], duration=400.0)
        noise = pc.NoiseConfig(miss_base=0.1, seed=11)
        n_frames = 10_000
        hits = sum(len(pc.synth_detect(s, RING_A, k * 0.04, noise))
                   for k in range(n_frames))
        assert (1.0 - hits / n_frames) == pytest.approx(0.1, abs=0.01)

    def test_pixel_noise_scale(self):
        stationary = ped(1, [(0.0, -5.0, 0.0, 0.0, 0.0),
                             (100.0, -5.0, 0.0, 0.0, 0.0)])
        s = make_scene([stationary], [RING_A, RING_B], duration=100.0)
        exact = np.array(project(RING_A, (-5.0, 0.0, 1.0)))
        noise = pc.NoiseConfig(sigma_px=2.0, seed=5)
        residuals = []
        for k in range(2000):
            (d,) = pc.synth_detect(s, RING_A, k * 0.04, noise)
            residuals.append(np.array(d.center_px) - exact)
        assert np.std(residuals) == pytest.approx(2.0, rel=0.05)

    def test_false_positive_rate(self):
        s = make_scene([], [RING_A, RING_B], duration=200.0)
        noise = pc.NoiseConfig(fp_rate_per_frame=0.5, seed=2)
        counts = [len(pc.synth_detect(s, RING_A, k * 0.04, noise))
                  for k in range(4000)]
        assert np.mean(counts) == pytest.approx(0.5, abs=0.05)
        fps = pc.synth_detect(s, RING_A, 0.08, noise)
        assert all(d.kind == "clutter" and d.truth_actor_id is None
                   for d in fps)

    def test_keypoints_project_exactly(self):
        s = make_scene([WALKER], [RING_A, RING_B])
        (d,) = pc.synth_detect(s, RING_A, 0.0, pc.NoiseConfig(),
                               with_keypoints=True)
        named = dict(d.keypoints_px)
        assert set(named) == {"head", "center", "base"}
        for name, z in (("head", 1.62), ("center", 0.9), ("base", 0.18)):
            assert named[name] == pytest.approx(project(RING_A, (-5.0, 0.0, z)))

    def test_time_outside_duration_rejected(self):
        s = make_scene([WALKER], [RING_A, RING_B])
        with pytest.raises(InvalidArgumentError):
            pc.synth_detect(s, RING_A, 10.5, pc.NoiseConfig())

    def test_deterministic(self):
        s = make_scene([WALKER], [RING_A, RING_B], seed=9)
        noise = pc.NoiseConfig(sigma_px=1.0, miss_base=0.2,
                               fp_rate_per_frame=1.0, seed=4)
        assert (pc.synth_detect(s, RING_A, 1.0, noise)
                == pc.synth_detect(s, RING_A, 1.0, noise))


class TestEpipolarDistance:
    def test_corresponding_pixels_on_line(self):
        p = (5.0, 20.0, 1.0)
        d = pc.epipolar_distance_px(CAM_A, CAM_B, project(CAM_A, p),
                                    project(CAM_B, p))
        assert d < 1e-6
        assert oracle_epipolar_distance(CAM_A, CAM_B, project(CAM_A, p),
                                        project(CAM_B, p)) < 1e-6

    def test_matches_fundamental_matrix_oracle(self):
        rng = random.Random(42)
        for _ in range(200):
            pa = (rng.uniform(0.0, 20.0), rng.uniform(15.0, 30.0),
                  rng.uniform(0.0, 2.0))
            uv_a = project(CAM_A, pa)
            uv_b = (rng.uniform(0.0, 1920.0), rng.uniform(0.0, 1080.0))
            got = pc.epipolar_distance_px(CAM_A, CAM_B, uv_a, uv_b)
            want = oracle_epipolar_distance(CAM_A, CAM_B, uv_a, uv_b)
            assert got == pytest.approx(want, rel=1e-6, abs=1e-6)

    def test_off_line_distance_grows(self):
        p = (5.0, 20.0, 1.0)
        uv_b = project(CAM_B, p)
        line = pc.epipolar_distance_px
        assert line(CAM_A, CAM_B, project(CAM_A, p),
                    (uv_b[0], uv_b[1] + 50.0)) > 10.0


def random_match_scene(seed):
    """Two ring cameras plus 2-4 actors near the center, with pixel
    noise; every actor is visible in both views."""
    rng = random.Random(seed)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    sep = rng.uniform(math.radians(45.0), math.radians(100.0))
    cams = []
    for cid, ang in ((1, theta), (2, theta + sep)):
        pos = (28.0 * math.cos(ang), 28.0 * math.sin(ang), rng.uniform(5.0, 7.0))
        cams.append(aimed_camera(cid, pos, (0.0, 0.0, 1.0)))
    actors = []
    for aid in range(1, rng.randint(2, 4) + 1):
        x, y = rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0)
        kind = rng.choice(("pedestrian", "cyclist"))
        actors.append(ped(aid, [(0.0, x, y, 0.0, 0.0), (1.0, x, y, 0.0, 0.0)],
                          kind))
    s = make_scene(actors, cams, duration=1.0, seed=seed)
    noise = pc.NoiseConfig(sigma_px=1.0, seed=seed)
    a = pc.synth_detect(s, cams[0], 0.0, noise)
    b = pc.synth_detect(s, cams[1], 0.0, noise)
    assert len(a) == len(actors) and len(b) == len(actors)
    return cams[0], cams[1], a, b


class TestMatchStereo:
    def test_single_actor_single_match(self):
        s = make_scene([WALKER], [RING_A, RING_B])
        a = pc.synth_detect(s, RING_A, 0.0, pc.NoiseConfig())
        b = pc.synth_detect(s, RING_B, 0.0, pc.NoiseConfig())
        m = pc.match_stereo(a, b, RING_A, RING_B)
        assert len(m.matches) == 1
        assert m.unmatched_a == () and m.unmatched_b == ()
        assert (m.pair.cam_a, m.pair.cam_b) == (1, 2)
        assert m.trigger_utc_ns == START

    def test_two_actors_matched_by_identity(self):
        a1 = ped(1, [(0.0, -6.0, -3.0, 0.0, 0.0), (1.0, -6.0, -3.0, 0.0, 0.0)])
        a2 = ped(2, [(0.0, 6.0, 4.0, 0.0, 0.0), (1.0, 6.0, 4.0, 0.0, 0.0)])
        s = make_scene([a1, a2], [RING_A, RING_B], duration=1.0)
        a = pc.synth_detect(s, RING_A, 0.0, pc.NoiseConfig())
        b = pc.synth_detect(s, RING_B, 0.0, pc.NoiseConfig())
        m = pc.match_stereo(a, b, RING_A, RING_B)
        assert {(da.truth_actor_id, db.truth_actor_id)
                for da, db in m.matches} == {(1, 1), (2, 2)}

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_exhaustive_assignment_oracle(self, seed):
        cam_a, cam_b, a, b = random_match_scene(2000 + seed)
        m = pc.match_stereo(a, b, cam_a, cam_b, gate_px=5.0)
        got = {(a.index(da), b.index(db)) for da, db in m.matches}
        want = oracle_assignment(
            a, b,
            lambda da, db: oracle_epipolar_distance(cam_a, cam_b,
                                                    da.center_px, db.center_px),
            5.0)
        assert got == set(want)

    def test_gate_excludes_outliers(self):
        da = detection_at(CAM_A, (5.0, 20.0, 1.0), actor_id=1)
        uv = project(CAM_B, (5.0, 20.0, 1.0))
        db_off = pc.Detection2D(2, START, (uv[0], uv[1] + 60.0), (20.0, 40.0),
                                "pedestrian")
        m = pc.match_stereo([da], [db_off], CAM_A, CAM_B, gate_px=5.0)
        assert m.matches == ()
        assert m.unmatched_a == (da,) and m.unmatched_b == (db_off,)

    def test_class_gating(self):
        da = detection_at(CAM_A, (5.0, 20.0, 1.0), kind="pedestrian")
        db = detection_at(CAM_B, (5.0, 20.0, 1.0), kind="vehicle")
        m = pc.match_stereo([da], [db], CAM_A, CAM_B)
        assert m.matches == ()

    def test_mismatched_timestamps_rejected(self):
        da = detection_at(CAM_A, (5.0, 20.0, 1.0), trigger=START)
        db = detection_at(CAM_B, (5.0, 20.0, 1.0), trigger=START + 40_000_000)
        with pytest.raises(InvalidArgumentError):
            pc.match_stereo([da], [db], CAM_A, CAM_B)

    def test_wrong_camera_rejected(self):
        da = detection_at(CAM_A, (5.0, 20.0, 1.0))
        with pytest.raises(InvalidArgumentError):
            pc.match_stereo([da], [], CAM_B, CAM_A)

    def test_empty_inputs(self):
        m = pc.match_stereo([], [], CAM_A, CAM_B)
        assert m.matches == () and m.unmatched_a == () and m.unmatched_b == ()


def match_of(point, kind="pedestrian", actor_id=1):
    return pc.StereoMatches(
        pc.StereoPairSpec(1, 2, 45.0, 100.0), START,
        ((detection_at(CAM_A, point, kind, actor_id=actor_id),
          detection_at(CAM_B, point, kind, actor_id=actor_id)),), (), ())


class TestObserve:
    def test_noiseless_position_recovery(self):
        obs = pc.observe(match_of((10.0, 28.0, 1.0)), CAM_A, CAM_B)
        assert len(obs) == 1
        assert np.linalg.norm(obs[0].position_m - [10.0, 28.0, 1.0]) < 1e-6
        assert obs[0].truth_actor_id == 1
        assert obs[0].n_views == 1

    def test_zero_noise_covariance_is_floor(self):
        (obs,) = pc.observe(match_of((10.0, 28.0, 1.0)), CAM_A, CAM_B,
                            sigma_px=0.0)
        assert np.allclose(obs.covariance_m2,
                           pc.COVARIANCE_FLOOR_M2 * np.eye(3))
        np.linalg.inv(obs.covariance_m2)  # must stay invertible

    def test_monte_carlo_rmse_within_analytic_bound(self):
        truth = np.array([10.0, 28.0, 1.0])
        (calibration,) = pc.observe(match_of(tuple(truth)), CAM_A, CAM_B,
                                    sigma_px=0.5)
        predicted_rmse = math.sqrt(np.trace(calibration.covariance_m2))
        rng = np.random.default_rng(17)
        uv_a = np.array(project(CAM_A, truth))
        uv_b = np.array(project(CAM_B, truth))
        errors = []
        for _ in range(400):
            na, nb = rng.normal(0.0, 0.5, 2), rng.normal(0.0, 0.5, 2)
            matched = pc.StereoMatches(
                pc.StereoPairSpec(1, 2, 45.0, 100.0), START,
                ((pc.Detection2D(1, START, tuple(uv_a + na), (20.0, 40.0),
                                 "pedestrian"),
                  pc.Detection2D(2, START, tuple(uv_b + nb), (20.0, 40.0),
                                 "pedestrian")),), (), ())
            (obs,) = pc.observe(matched, CAM_A, CAM_B, sigma_px=0.5,
                                gap_limit_m=10.0)
            errors.append(float(np.linalg.norm(obs.position_m - truth)))
        mc_rmse = math.sqrt(np.mean(np.square(errors)))
        assert predicted_rmse / 3.0 <= mc_rmse <= 3.0 * predicted_rmse

    def test_crossed_match_rejected_by_gap(self):
        # detection of actor 1 in camera A paired with actor 2 in camera
        # B: skew rays with a 1.4 m perpendicular gap
        crossed = pc.StereoMatches(
            pc.StereoPairSpec(1, 2, 45.0, 100.0), START,
            ((detection_at(CAM_A, (5.0, 20.0, 1.0), actor_id=1),
              detection_at(CAM_B, (16.0, 25.0, 1.0), actor_id=2)),), (), ())
        assert pc.observe(crossed, CAM_A, CAM_B) == []
        assert len(pc.observe(crossed, CAM_A, CAM_B, gap_limit_m=2.0)) == 1

    def test_keypoints_share_the_triangulation_path(self):
        s = make_scene([WALKER], [RING_A, RING_B])
        noise = pc.NoiseConfig()
        a = pc.synth_detect(s, RING_A, 0.0, noise, with_keypoints=True)
        b = pc.synth_detect(s, RING_B, 0.0, noise, with_keypoints=True)
        m = pc.match_stereo(a, b, RING_A, RING_B)
        (obs,) = pc.observe(m, RING_A, RING_B)
        named = dict(obs.keypoints_m)
        for name, z in (("head", 1.62), ("center", 0.9), ("base", 0.18)):
            assert np.linalg.norm(np.array(named[name]) - [-5.0, 0.0, z]) < 1e-6


def iso_obs(x, y, z=1.0, sd=0.2, kind="pedestrian", trigger=START, n_views=1):
    return pc.Observation3D(np.array([x, y, z]), sd**2 * np.eye(3), None,
                            trigger, kind, n_views=n_views)


class TestFuse:
    def test_identical_pair_halves_covariance(self):
        c = np.diag([0.04, 0.09, 0.01])
        a = pc.Observation3D(np.array([1.0, 2.0, 1.0]), c, None, START,
                             "pedestrian")
        b = pc.Observation3D(np.array([1.0, 2.0, 1.0]), c, None, START,
                             "pedestrian")
        (fused,) = pc.fuse([a, b])
        assert np.allclose(fused.position_m, [1.0, 2.0, 1.0])
        assert np.allclose(fused.covariance_m2, c / 2.0)
        assert fused.n_views == 2
        assert fused.pair is None

    def test_distant_observations_stay_separate(self):
        out = pc.fuse([iso_obs(0.0, 0.0), iso_obs(10.0, 0.0)])
        assert len(out) == 2
        assert out[0].position_m[0] == 0.0 and out[1].position_m[0] == 10.0

    def test_class_gating(self):
        out = pc.fuse([iso_obs(0.0, 0.0, kind="pedestrian"),
                       iso_obs(0.0, 0.0, kind="vehicle")])
        assert len(out) == 2

    def test_transitive_chain_clusters_once(self):
        # neighbors are 2.4 sigma-pair apart (inside the gate), the ends
        # are 4.7 apart (outside): still one cluster via the middle
        chain = [iso_obs(0.0, 0.0, sd=0.15), iso_obs(0.5, 0.0, sd=0.15),
                 iso_obs(1.0, 0.0, sd=0.15)]
        (fused,) = pc.fuse(chain)
        assert fused.n_views == 3
        assert fused.position_m[0] == pytest.approx(0.5)

    def test_mixed_triggers_rejected(self):
        with pytest.raises(InvalidArgumentError):
            pc.fuse([iso_obs(0.0, 0.0, trigger=START),
                     iso_obs(0.0, 0.0, trigger=START + 1)])

    def test_singular_covariance_rejected(self):
        degenerate = pc.Observation3D(np.zeros(3), np.zeros((3, 3)), None,
                                      START, "pedestrian")
        with pytest.raises(DegenerateObservationError):
            pc.fuse([degenerate, iso_obs(0.0, 0.0)])

    def test_trace_never_increases(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            group = []
            for _ in range(rng.integers(2, 5)):
                m = rng.normal(size=(3, 3))
                cov = m @ m.T + 0.01 * np.eye(3)
                group.append(pc.Observation3D(
                    rng.normal(0.0, 0.01, 3), cov, None, START, "pedestrian"))
            fused = pc.fuse(group, gate=1e9)
            assert len(fused) == 1
            best = min(np.trace(o.covariance_m2) for o in group)
            assert np.trace(fused[0].covariance_m2) <= best + 1e-12

    def test_fused_beats_best_single_monte_carlo(self):
        truth = np.array([3.0, -2.0, 1.0])
        c1 = np.diag([0.25, 0.01, 0.04])
        c2 = np.diag([0.01, 0.25, 0.04])
        rng = np.random.default_rng(23)
        sq_err = {"a": [], "b": [], "fused": []}
        for _ in range(400):
            xa = rng.multivariate_normal(truth, c1)
            xb = rng.multivariate_normal(truth, c2)
            a = pc.Observation3D(xa, c1, None, START, "pedestrian")
            b = pc.Observation3D(xb, c2, None, START, "pedestrian")
            (fused,) = pc.fuse([a, b], gate=1e9)
            sq_err["a"].append(np.sum((xa - truth) ** 2))
            sq_err["b"].append(np.sum((xb - truth) ** 2))
            sq_err["fused"].append(np.sum((fused.position_m - truth) ** 2))
        rmse = {k: math.sqrt(np.mean(v)) for k, v in sq_err.items()}
        assert rmse["fused"] <= min(rmse["a"], rmse["b"])


class TestTrackStep:
    def step_series(self, observations, config=pc.TrackerConfig(), dt=0.04):
        tracks = []
        for k, frame in enumerate(observations):
            tracks = pc.track_step(tracks, frame, dt, config,
                                   trigger_utc_ns=START + k * 40_000_000)
        return tracks

    def test_stationary_noiseless_fixed_point(self):
        frames = [[iso_obs(4.0, -3.0, sd=1e-6)] for _ in range(10)]
        (track,) = self.step_series(frames)
        assert math.hypot(track.state[0] - 4.0, track.state[1] + 3.0) < 1e-6
        assert math.hypot(track.state[2], track.state[3]) < 1e-6
        assert track.confirmed and track.hits == 10

    def test_constant_velocity_convergence(self):
        frames = [[iso_obs(2.0 * k * 0.04, 0.0, sd=1e-6)] for k in range(25)]
        (track,) = self.step_series(frames)
        assert abs(track.state[2] - 2.0) < 1e-3
        assert abs(track.state[3]) < 1e-3

    def test_confirmation_at_third_hit(self):
        frames = [[iso_obs(0.0, 0.0)] for _ in range(3)]
        tracks = self.step_series(frames[:2])
        assert not tracks[0].confirmed
        tracks = pc.track_step(tracks, frames[2], 0.04,
                               trigger_utc_ns=START + 2 * 40_000_000)
        assert tracks[0].confirmed

    def test_deletion_after_max_misses(self):
        config = pc.TrackerConfig(max_misses=25)
        tracks = self.step_series([[iso_obs(0.0, 0.0)]] * 3, config)
        for k in range(24):
            tracks = pc.track_step(tracks, [], 0.04, config,
                                   trigger_utc_ns=START + (3 + k) * 40_000_000)
        assert len(tracks) == 1 and tracks[0].misses_in_row == 24
        tracks = pc.track_step(tracks, [], 0.04, config,
                               trigger_utc_ns=START + 28 * 40_000_000)
        assert tracks == []

    def test_occlusion_gap_retains_id_with_raised_coast_limit(self):
        config = pc.TrackerConfig(max_misses=60)
        dt = 0.04
        frames = [[iso_obs(2.0 * k * dt, 0.0, sd=1e-4)] for k in range(10)]
        frames += [[] for _ in range(50)]
        frames += [[iso_obs(2.0 * k * dt, 0.0, sd=1e-4)] for k in range(60, 70)]
        tracks = self.step_series(frames, config)
        assert len(tracks) == 1
        assert tracks[0].id == 1  # survived the 2 s gap on the predicted path
        assert tracks[0].misses_in_row == 0

    def test_occlusion_gap_splits_track_at_default_limit(self):
        dt = 0.04
        tracker = pc.Tracker()  # default 25-miss deletion
        frames = [[iso_obs(2.0 * k * dt, 0.0, sd=1e-4)] for k in range(10)]
        frames += [[] for _ in range(50)]
        frames += [[iso_obs(2.0 * k * dt, 0.0, sd=1e-4)] for k in range(60, 70)]
        for k, frame in enumerate(frames):
            tracker.step(frame, dt, START + k * 40_000_000)
        assert [t.id for t in tracker.active] == [2]
        assert [t.id for t in tracker.all] == [1, 2]

    def test_far_observation_starts_new_track(self):
        tracks = self.step_series([[iso_obs(0.0, 0.0)]] * 3)
        tracks = pc.track_step(tracks, [iso_obs(30.0, 0.0)], 0.04,
                               trigger_utc_ns=START + 3 * 40_000_000)
        assert len(tracks) == 2
        assert tracks[0].misses_in_row == 1
        assert tracks[1].id == 2 and tracks[1].hits == 1

    def test_class_gating(self):
        tracks = self.step_series([[iso_obs(0.0, 0.0, kind="pedestrian")]] * 3)
        tracks = pc.track_step(tracks, [iso_obs(0.0, 0.0, kind="vehicle")],
                               0.04, trigger_utc_ns=START + 3 * 40_000_000)
        kinds = {t.kind for t in tracks}
        assert kinds == {"pedestrian", "vehicle"} and len(tracks) == 2

    def test_bad_dt_rejected(self):
        with pytest.raises(InvalidArgumentError):
            pc.track_step([], [], 0.0)

    def test_covariance_stays_symmetric_psd(self):
        rng = np.random.default_rng(8)
        frames = [[iso_obs(float(rng.normal(0.0, 0.1)),
                           float(rng.normal(0.0, 0.1)))] for _ in range(50)]
        (track,) = self.step_series(frames)
        assert np.allclose(track.covariance, track.covariance.T)
        assert np.linalg.eigvalsh(track.covariance)[0] >= -1e-12

    def test_history_records_views_and_order(self):
        frames = [[iso_obs(0.0, 0.0, n_views=3)]] * 3 + [[]] * 2
        (track,) = self.step_series(frames)
        times = [p.trigger_utc_ns for p in track.history]
        assert times == sorted(times) and len(times) == 5
        assert [p.n_views for p in track.history] == [3, 3, 3, 0, 0]

    def test_tracker_never_reuses_ids(self):
        tracker = pc.Tracker(pc.TrackerConfig(max_misses=2))
        for k in range(3):
            tracker.step([iso_obs(0.0, 0.0)], 0.04, START + k * 40_000_000)
        for k in range(3, 5):
            tracker.step([], 0.04, START + k * 40_000_000)
        assert tracker.active == []
        tracker.step([iso_obs(0.0, 0.0)], 0.04, START + 5 * 40_000_000)
        assert [t.id for t in tracker.all] == [1, 2]
        assert tracker.active[0].id == 2


class TestExportTrajectories:
    def test_empty(self):
        assert pc.export_trajectories([]) == []

    def test_rows_equal_history(self):
        track = pc.Track(4, "cyclist", np.zeros(4), np.eye(4), confirmed=True,
                         history=[pc.TrackPoint(START, 1.0, 2.0, 0.5, -0.5, 2),
                                  pc.TrackPoint(START + 40_000_000, 1.02, 1.98,
                                                0.5, -0.5, 3)])
        records = pc.export_trajectories([track])
        assert [r.track_id for r in records] == [4, 4]
        assert records[0] == scenario_io.TrajectoryRecord(
            4, "cyclist", START, 1.0, 2.0, 0.5, -0.5, 2)

    def test_tentative_tracks_skipped_unless_requested(self):
        track = pc.Track(1, "pedestrian", np.zeros(4), np.eye(4),
                         history=[pc.TrackPoint(START, 0.0, 0.0, 0.0, 0.0, 1)])
        assert pc.export_trajectories([track]) == []
        assert len(pc.export_trajectories([track], include_tentative=True)) == 1

    def test_round_trip_through_file(self, tmp_path):
        track = pc.Track(2, "pedestrian", np.zeros(4), np.eye(4),
                         confirmed=True,
                         history=[pc.TrackPoint(START, -1.5, 2.25, 1.0, 0.0, 2)])
        records = pc.export_trajectories([track])
        path = tmp_path / "tracks.jsonl"
        scenario_io.save_trajectories(records, path)
        assert scenario_io.load_trajectories(path) == records


class TestRunPerception:
    def test_noiseless_end_to_end_matches_ground_truth(self):
        s = make_scene([WALKER], [RING_A, RING_B])
        result = pc.run_perception(s, pc.NoiseConfig(), duration_s=8.0)
        assert result.stats.tracks_confirmed == 1
        (track,) = [t for t in result.tracks if t.confirmed]
        worst = max(
            math.hypot(p.x_m - (-5.0 + (p.trigger_utc_ns - START) / 1e9),
                       p.y_m)
            for p in track.history)
        assert worst < 1e-3
        assert all(p.n_views == 1 for p in track.history)
        assert result.records == tuple(pc.export_trajectories(result.tracks))

    def test_three_camera_fusion_raises_view_count(self):
        # optical-axis yaws ~0, 55 and 110 degrees: all three pairings
        # fall inside the stereo angle window
        cams = [aimed_camera(1, (-28.0, 0.0, 6.0), (0.0, 0.0, 1.0)),
                aimed_camera(2, (-16.1, -22.9, 6.0), (0.0, 0.0, 1.0)),
                aimed_camera(3, (9.6, -26.3, 6.0), (0.0, 0.0, 1.0))]
        s = make_scene([WALKER], cams)
        result = pc.run_perception(s, pc.NoiseConfig(), duration_s=2.0)
        (track,) = [t for t in result.tracks if t.confirmed]
        assert max(p.n_views for p in track.history) == 3

    def test_repeat_runs_byte_identical(self, tmp_path):
        s = make_scene([WALKER], [RING_A, RING_B], seed=21)
        noise = pc.NoiseConfig(sigma_px=0.5, miss_base=0.05,
                               fp_rate_per_frame=0.3, seed=6)
        paths = []
        for name in ("a.jsonl", "b.jsonl"):
            result = pc.run_perception(s, noise, duration_s=4.0)
            path = tmp_path / name
            scenario_io.save_trajectories(list(result.records), path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_noisy_run_stays_on_the_actor(self):
        s = make_scene([WALKER], [RING_A, RING_B], seed=2)
        noise = pc.NoiseConfig(sigma_px=1.0, miss_base=0.1,
                               fp_rate_per_frame=0.2, seed=1)
        result = pc.run_perception(s, noise, duration_s=8.0)
        confirmed = [t for t in result.tracks
                     if t.confirmed and t.kind == "pedestrian"]
        assert confirmed
        # one track carries most of the duration; occasional gate breaks
        # may split off short duplicates but never ghosts off the path
        assert max(len(t.history) for t in confirmed) >= 0.7 * result.stats.frames
        for track in confirmed:
            for p in track.history:
                truth_x = -5.0 + (p.trigger_utc_ns - START) / 1e9
                assert math.hypot(p.x_m - truth_x, p.y_m) < 1.5

    def test_invalid_scenario_rejected(self):
        import dataclasses
        bad = dataclasses.replace(make_scene([WALKER], [RING_A, RING_B]),
                                  duration_s=-1.0)
        with pytest.raises(InvalidArgumentError):
            pc.run_perception(bad)

    def test_bad_duration_rejected(self):
        s = make_scene([WALKER], [RING_A, RING_B])
        with pytest.raises(InvalidArgumentError):
            pc.run_perception(s, duration_s=99.0)
