import dataclasses
import math
import random
import struct

import pytest

from junction_sim import pipeline as pl
from junction_sim.errors import (
    CorruptRecordingError,
    InvalidArgumentError,
    PipelineConfigError,
)
from junction_sim.geometry import CameraModel, CameraPose, intrinsics_from_lens
from junction_sim.scene import (
    JunctionLayout,
    Scenario,
    WeatherState,
    reference_scenario,
)
from junction_sim.sync import FrameStamp

INTR_4K = intrinsics_from_lens(71.0, 4096, 2160)
INTR_TINY = intrinsics_from_lens(71.0, 64, 48)


def tiny_scenario(n_cameras=3, duration_s=3.0, seed=0):
    cams = tuple(
        CameraModel(i + 1, INTR_TINY,
                    CameraPose((20.0 * i, -30.0, 6.0), math.radians(90.0), 0.2),
                    120.0)
        for i in range(n_cameras))
    layout = JunctionLayout(lanes=(), crosswalks=(),
                            roi_inner=((-5.0, -5.0), (5.0, -5.0), (5.0, 5.0),
                                       (-5.0, 5.0)),
                            approaches=())
    return Scenario(layout=layout, occluders=(), cameras=cams, actors=(),
                    weather=WeatherState(()), duration_s=duration_s, seed=seed)


def frame(cam=1, seq=0, payload=1000, activity=0.0):
    return pl.FrameMessage(FrameStamp(cam, seq, 1_000_000_000 + seq * 40_000_000,
                                      1_000_000_000 + seq * 40_000_000 + 5_000_000),
                           payload, activity)


class TestBitrates:
    def test_installation_camera_rate(self):
        rate = pl.per_camera_bitrate(INTR_4K, 8, 25.0)
        assert rate == 4096 * 2160 * 8 * 25
        assert 1.765e9 <= rate <= 1.775e9  # the advertised 1.77 Gbit/s

    def test_six_camera_aggregate(self):
        total = 6 * pl.per_camera_bitrate(INTR_4K, 8, 25.0)
        assert 10.59e9 <= total <= 10.65e9  # the advertised 10.62 Gbit/s

    def test_unit_rate(self):
        intr = dataclasses.replace(INTR_TINY, width_px=1, height_px=1,
                                   cx_px=0.5, cy_px=0.5)
        assert pl.per_camera_bitrate(intr, 1, 1.0) == 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidArgumentError):
            pl.per_camera_bitrate(INTR_4K, 0, 25.0)
        with pytest.raises(InvalidArgumentError):
            pl.per_camera_bitrate(INTR_4K, 8, 0.0)


class TestStorageDuration:
    def test_trivial(self):
        assert pl.storage_duration(1.0, 8e9, 1.0) == pytest.approx(1000.0)

    def test_server_at_conservative_compression(self):
        days = pl.storage_duration(576.0, 10.62e9, 8.0) / 86_400.0
        assert days == pytest.approx(40.2, rel=0.01)

    def test_server_at_best_compression(self):
        days = pl.storage_duration(576.0, 10.62e9, 10.0) / 86_400.0
        assert days == pytest.approx(50.2, rel=0.01)

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidArgumentError):
            pl.storage_duration(0.0, 1e9, 8.0)


class TestEncodeChunk:
    def test_idle_frames_compress_at_ten(self):
        chunk = pl.encode_chunk([frame(seq=i, activity=0.0) for i in range(25)])
        assert chunk.ratio == pytest.approx(10.0, rel=1e-3)
        assert chunk.raw_bytes == 25_000

    def test_busy_frames_compress_at_eight(self):
        chunk = pl.encode_chunk([frame(seq=i, activity=1.0) for i in range(25)])
        assert chunk.ratio == pytest.approx(8.0, rel=1e-3)

    def test_half_activity_is_nine(self):
        chunk = pl.encode_chunk([frame(seq=i, activity=0.5) for i in range(25)])
        assert chunk.ratio == pytest.approx(9.0, rel=1e-3)

    def test_ratio_model_is_linear(self):
        model = pl.RatioModel(8.0, 10.0)
        assert model.ratio_for(0.25) == pytest.approx(9.5)

    def test_mixed_cameras_rejected(self):
        with pytest.raises(InvalidArgumentError):
            pl.encode_chunk([frame(cam=1, seq=0), frame(cam=2, seq=1)])

    def test_seq_gap_rejected(self):
        with pytest.raises(InvalidArgumentError):
            pl.encode_chunk([frame(seq=0), frame(seq=2)])

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            pl.encode_chunk([])

    def test_chunk_invariants(self):
        with pytest.raises(InvalidArgumentError):
            pl.EncodedChunk(1, 0, 0, 100, 10)
        with pytest.raises(InvalidArgumentError):
            pl.EncodedChunk(1, 0, 25, 100, 200)  # ratio < 1


class TestNodeGraph:
    def test_two_streams_per_worker(self):
        graph = pl.build_node_graph([1, 2, 3, 4, 5, 6], 3)
        assert graph.workers == ((1, 2), (3, 4), (5, 6))
        assert graph.worker_of(4) == 1

    def test_overloaded_worker_rejected(self):
        with pytest.raises(PipelineConfigError):
            pl.build_node_graph([1, 2, 3, 4, 5, 6], 1)
        with pytest.raises(PipelineConfigError):
            pl.build_node_graph([1, 2, 3, 4, 5, 6], 2)

    def test_spare_workers_sit_idle(self):
        graph = pl.build_node_graph([1, 2, 3], 3)
        assert graph.workers == ((1, 2), (3,), ())


class TestPipelineConfig:
    def test_rejects_bad_values(self):
        for kwargs in ({"workers": 0}, {"workers": 1, "worker_throughput_fps": 0.0},
                       {"workers": 1, "channel_capacity_frames": 0},
                       {"workers": 1, "ratio_min": 12.0},
                       {"workers": 1, "ratio_min": 0.5},
                       {"workers": 1, "drop_policy": "drop-oldest"}):
            with pytest.raises(PipelineConfigError):
                pl.PipelineConfig(**kwargs)


class TestRunPipeline:
    def test_reference_sixty_seconds_no_drops(self):
        stats, handle = pl.run_pipeline(reference_scenario(),
                                        pl.PipelineConfig(workers=3))
        assert stats.frames_produced == 6 * 1501
        assert stats.frames_written == 6 * 1501
        assert stats.frames_dropped == 0
        assert stats.in_flight == 0
        assert stats.chunks_written == 6 * 61  # 60 full chunks + 1 partial
        per_cam = {cid: [f for f in handle.stamps if f.camera_id == cid]
                   for cid in (1, 2, 3, 4, 5, 6)}
        assert all(len(v) == 1501 for v in per_cam.values())
        assert stats.aggregate_bitrate_bps == pytest.approx(10.617e9, rel=1e-3)

    def test_written_triggers_monotone_with_exact_spacing(self):
        _, handle = pl.run_pipeline(tiny_scenario(2, duration_s=4.0),
                                    pl.PipelineConfig(workers=1))
        for cid in (1, 2):
            stamps = [f for f in handle.stamps if f.camera_id == cid]
            deltas = {b.trigger_utc_ns - a.trigger_utc_ns
                      for a, b in zip(stamps, stamps[1:])}
            assert deltas == {40_000_000}

    def test_conservation_under_load(self):
        stats, _ = pl.run_pipeline(
            reference_scenario(),
            pl.PipelineConfig(workers=3, worker_throughput_fps=30.0,
                              channel_capacity_frames=50))
        assert stats.frames_dropped > 0
        assert stats.frames_produced == (stats.frames_encoded
                                         + stats.frames_dropped
                                         + stats.in_flight)
        assert stats.frames_written == stats.frames_encoded

    def test_half_throughput_drops_half(self):
        # 3 workers x 25 fps = half of the 6 x 25 fps source rate
        stats, _ = pl.run_pipeline(reference_scenario(),
                                   pl.PipelineConfig(workers=3,
                                                     worker_throughput_fps=25.0))
        fraction = stats.frames_dropped / stats.frames_produced
        assert fraction == pytest.approx(0.5, abs=0.05)

    def test_deterministic(self):
        s = tiny_scenario(4, duration_s=5.0)
        cfg = pl.PipelineConfig(workers=2, worker_throughput_fps=60.0)
        a_stats, a_handle = pl.run_pipeline(s, cfg)
        b_stats, b_handle = pl.run_pipeline(s, cfg)
        assert a_stats == b_stats
        assert a_handle.chunks == b_handle.chunks
        assert a_handle.stamps == b_handle.stamps
        assert a_handle.scenario_sha256 == b_handle.scenario_sha256

    def test_writer_backpressure_blocks_but_conserves(self):
        stats, _ = pl.run_pipeline(
            tiny_scenario(2, duration_s=6.0),
            pl.PipelineConfig(workers=1, writer_throughput_fps=20.0,
                              writer_capacity_chunks=2,
                              channel_capacity_frames=50))
        assert stats.writer_queue_high_water == 2
        assert stats.frames_dropped > 0  # backpressure propagates to sources
        assert stats.frames_produced == (stats.frames_encoded
                                         + stats.frames_dropped
                                         + stats.in_flight)
        assert stats.frames_written == stats.frames_encoded

    def test_too_many_streams_per_worker(self):
        with pytest.raises(PipelineConfigError):
            pl.run_pipeline(reference_scenario(), pl.PipelineConfig(workers=2))

    def test_invalid_scenario_rejected(self):
        bad = dataclasses.replace(tiny_scenario(1), duration_s=-2.0)
        with pytest.raises(InvalidArgumentError):
            pl.run_pipeline(bad, pl.PipelineConfig(workers=1), duration_s=1.0)

    def test_virtual_time_covers_duration(self):
        stats, _ = pl.run_pipeline(tiny_scenario(1, duration_s=7.0),
                                   pl.PipelineConfig(workers=1))
        assert stats.wall_time_s >= 7.0


def sufficient_config(seed: int):
    """A randomized configuration satisfying the zero-drop preconditions:
    every worker's throughput covers its stream load and source queues
    hold at least two chunks."""
    rng = random.Random(seed)
    n = rng.randint(1, 6)
    workers = rng.randint(math.ceil(n / 2), 4)
    graph = pl.build_node_graph(range(1, n + 1), workers)
    max_streams = max((len(g) for g in graph.workers), default=1)
    cfg = pl.PipelineConfig(
        workers=workers,
        worker_throughput_fps=25.0 * max(max_streams, 1) * rng.uniform(1.0, 3.0),
        channel_capacity_frames=rng.randint(50, 200),
        writer_capacity_chunks=rng.randint(2, 6),
        latency_ns=rng.randint(0, 20_000_000),
    )
    return tiny_scenario(n, seed=seed), cfg, rng.uniform(2.0, 8.0)


class TestSufficiencyTheorem:
    @pytest.mark.parametrize("seed", range(100))
    def test_sufficient_throughput_never_drops(self, seed):
        s, cfg, duration = sufficient_config(seed)
        stats, _ = pl.run_pipeline(s, cfg, duration_s=duration)
        assert stats.frames_dropped == 0
        assert stats.in_flight == 0
        assert stats.frames_written == stats.frames_produced
        assert stats.frames_produced == (stats.frames_encoded
                                         + stats.frames_dropped
                                         + stats.in_flight)


class TestRecording:
    def run_small(self, tmp_path, n=3, duration=3.0, seed=7):
        s = tiny_scenario(n, seed=seed)
        stats, handle = pl.run_pipeline(s, pl.PipelineConfig(workers=2),
                                        duration_s=duration)
        out = pl.write_recording(handle, tmp_path / "rec")
        return s, handle, out

    def test_directory_inventory(self, tmp_path):
        six_cam = dataclasses.replace(
            reference_scenario(),
            cameras=tuple(dataclasses.replace(c, intrinsics=INTR_TINY)
                          for c in reference_scenario().cameras))
        _, handle = pl.run_pipeline(six_cam, pl.PipelineConfig(workers=3),
                                    duration_s=10.0)
        out = pl.write_recording(handle, tmp_path / "rec")
        names = sorted(p.name for p in out.iterdir())
        assert names == ["cam1.chunks", "cam2.chunks", "cam3.chunks",
                         "cam4.chunks", "cam5.chunks", "cam6.chunks",
                         "manifest.json", "sync.csv"]

    def test_round_trip(self, tmp_path):
        s, handle, out = self.run_small(tmp_path)
        manifest, chunks, stamps = pl.read_recording(out)
        assert manifest["scenario_sha256"] == handle.scenario_sha256
        assert stamps == list(handle.stamps)
        by_key = {(c.camera_id, c.first_seq): c for c in chunks}
        assert len(by_key) == len(handle.chunks)
        for chunk in handle.chunks:
            stored = by_key[(chunk.camera_id, chunk.first_seq)]
            assert stored.frame_count == chunk.frame_count
            assert stored.raw_bytes == chunk.raw_bytes
            assert len(stored.payload) == chunk.encoded_bytes

    def test_rewrite_is_byte_identical(self, tmp_path):
        _, handle, out = self.run_small(tmp_path)
        out2 = pl.write_recording(handle, tmp_path / "rec2")
        for p in sorted(out.iterdir()):
            assert (out2 / p.name).read_bytes() == p.read_bytes()

    def test_payload_determinism(self):
        a = pl.chunk_payload(7, 1, 0, 512)
        assert a == pl.chunk_payload(7, 1, 0, 512)
        assert a != pl.chunk_payload(7, 1, 25, 512)
        assert a != pl.chunk_payload(8, 1, 0, 512)

    def test_missing_sync_detected(self, tmp_path):
        _, _, out = self.run_small(tmp_path)
        (out / "sync.csv").unlink()
        with pytest.raises(CorruptRecordingError):
            pl.read_recording(out)

    def test_missing_manifest_detected(self, tmp_path):
        _, _, out = self.run_small(tmp_path)
        (out / "manifest.json").unlink()
        with pytest.raises(CorruptRecordingError):
            pl.read_recording(out)

    def test_payload_corruption_detected(self, tmp_path):
        _, _, out = self.run_small(tmp_path)
        path = out / "cam1.chunks"
        raw = bytearray(path.read_bytes())
        raw[-1] ^= 0xFF  # last payload byte
        path.write_bytes(bytes(raw))
        with pytest.raises(CorruptRecordingError) as err:
            pl.read_recording(out)
        assert "CRC" in str(err.value)

    def test_truncation_detected(self, tmp_path):
        _, _, out = self.run_small(tmp_path)
        path = out / "cam1.chunks"
        raw = path.read_bytes()
        path.write_bytes(raw[:-10])
        with pytest.raises(CorruptRecordingError):
            pl.read_recording(out)

    def test_overlapping_chunks_detected(self, tmp_path):
        out = tmp_path / "rec"
        out.mkdir()
        payload = pl.chunk_payload(0, 1, 0, 64)
        import zlib
        header = pl._CHUNK_HEADER.pack(1, 0, 25, 640, 64,
                                       zlib.crc32(payload) & 0xFFFFFFFF)
        record = struct.pack("<I", len(header) + len(payload)) + header + payload
        (out / "cam1.chunks").write_bytes(record + record)  # same seq twice
        (out / "sync.csv").write_text("camera_id,seq,trigger_utc_ns,arrival_ns\n")
        from junction_sim import scenario_io
        scenario_io.save_manifest(out / "manifest.json", scenario_sha256="0" * 64,
                                  config={}, stats={})
        with pytest.raises(CorruptRecordingError):
            pl.read_recording(out)
