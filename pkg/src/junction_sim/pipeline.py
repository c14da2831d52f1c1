"""Publisher-subscriber recording pipeline on simulated time.

Sources emit one frame per trigger and never block (full source queues
drop the arriving frame); encoder workers carry at most two streams each
and chunk 25 frames into compressed groups; the storage writer applies
backpressure to workers through a bounded chunk queue. The whole graph
runs on virtual nanoseconds driven by an event heap, so throughput
statements are exact and every run is reproducible bit for bit.

Compression is ratio bookkeeping, not a codec: payloads are deterministic
pseudo-random bytes of the encoded size, generated only when a recording
is written to disk — the simulation itself moves metadata.
"""

from __future__ import annotations

import heapq
import math
import struct
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import scenario_io, sync
from .coverage import _camera_visibility
from .errors import (
    CorruptRecordingError,
    InvalidArgumentError,
    PipelineConfigError,
)
from .geometry import CameraIntrinsics
from .scene import BoxShape, Scenario, actor_pose_at, validate_scenario
from .sync import FrameStamp, TriggerClock

CHUNK_FRAMES_DEFAULT = 25
RAW_BITS_PER_PIXEL = 8  # implied by 4096x2160 at 25 Hz transmitting 1.77 Gbit/s


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True)
class FrameMessage:
    stamp: FrameStamp
    payload_bytes: int  # width*height*bytes_per_pixel of the producing camera
    activity: float     # fraction of pixels covered by moving actors, in [0,1]


@dataclass(frozen=True)
class EncodedChunk:
    camera_id: int
    first_seq: int
    frame_count: int
    raw_bytes: int
    encoded_bytes: int

    def __post_init__(self):
        if self.frame_count < 1:
            raise InvalidArgumentError("frame_count must be >= 1")
        if self.encoded_bytes > self.raw_bytes:
            raise InvalidArgumentError("compression ratio must be >= 1")

    @property
    def ratio(self) -> float:
        return self.raw_bytes / self.encoded_bytes


@dataclass(frozen=True)
class RatioModel:
    """Linear activity model: idle frames compress best."""
    ratio_min: float = 8.0   # fully busy
    ratio_max: float = 10.0  # fully idle

    def ratio_for(self, mean_activity: float) -> float:
        return self.ratio_max - (self.ratio_max - self.ratio_min) * mean_activity


@dataclass(frozen=True)
class NodeGraph:
    """Static wiring: which encoder worker serves which camera streams."""
    sources: tuple[int, ...]                 # camera ids
    workers: tuple[tuple[int, ...], ...]     # per worker, the streams it owns

    def worker_of(self, camera_id: int) -> int:
        for i, streams in enumerate(self.workers):
            if camera_id in streams:
                return i
        raise InvalidArgumentError(f"camera {camera_id} not wired to any worker")


def build_node_graph(camera_ids, workers: int) -> NodeGraph:
    """Assign streams to workers contiguously, two per worker at most."""
    ids = tuple(sorted(camera_ids))
    if workers < 1:
        raise PipelineConfigError("need at least one encoder worker")
    if len(ids) > 2 * workers:
        raise PipelineConfigError(
            f"{len(ids)} streams exceed {workers} worker(s) x 2 streams each")
    assignment = tuple(ids[2 * i:2 * i + 2] for i in range(workers))
    return NodeGraph(sources=ids, workers=assignment)


@dataclass(frozen=True)
class PipelineConfig:
    workers: int
    worker_throughput_fps: float = 75.0   # frames/s each worker encodes
    channel_capacity_frames: int = 75     # per-stream source queue depth
    writer_capacity_chunks: int = 4       # encoder -> writer queue depth
    writer_throughput_fps: float = 0.0    # 0 = unlimited disk
    chunk_frames: int = CHUNK_FRAMES_DEFAULT
    bits_per_pixel: int = RAW_BITS_PER_PIXEL
    ratio_min: float = 8.0
    ratio_max: float = 10.0
    latency_ns: int = 5_000_000
    drop_policy: str = "drop-newest"
    realtime_factor: float = 0.0          # > 0 slows playback for demos

    def __post_init__(self):
        if self.workers < 1:
            raise PipelineConfigError("workers must be >= 1")
        if self.worker_throughput_fps <= 0:
            raise PipelineConfigError("worker_throughput_fps must be positive")
        if self.channel_capacity_frames < 1:
            raise PipelineConfigError("channel_capacity_frames must be >= 1")
        if self.writer_capacity_chunks < 1:
            raise PipelineConfigError("writer_capacity_chunks must be >= 1")
        if self.chunk_frames < 1:
            raise PipelineConfigError("chunk_frames must be >= 1")
        if self.bits_per_pixel < 1:
            raise PipelineConfigError("bits_per_pixel must be >= 1")
        if not 1.0 <= self.ratio_min <= self.ratio_max:
            raise PipelineConfigError("need 1 <= ratio_min <= ratio_max")
        if self.drop_policy != "drop-newest":
            raise PipelineConfigError(
                f"unsupported drop_policy {self.drop_policy!r}")

    def to_manifest_dict(self) -> dict:
        d = asdict(self)
        del d["realtime_factor"]
        return d


@dataclass
class ThroughputStats:
    per_camera_bitrate_bps: dict
    aggregate_bitrate_bps: float
    frames_produced: int
    frames_encoded: int
    frames_written: int
    frames_dropped: int
    in_flight: int
    chunks_written: int
    raw_bytes: int
    encoded_bytes: int
    queue_high_water: dict
    writer_queue_high_water: int
    wall_time_s: float  # virtual end-to-end duration

    def as_dict(self) -> dict:
        return {
            "per_camera_bitrate_bps": {str(k): v for k, v
                                       in self.per_camera_bitrate_bps.items()},
            "aggregate_bitrate_bps": self.aggregate_bitrate_bps,
            "frames_produced": self.frames_produced,
            "frames_encoded": self.frames_encoded,
            "frames_written": self.frames_written,
            "frames_dropped": self.frames_dropped,
            "in_flight": self.in_flight,
            "chunks_written": self.chunks_written,
            "raw_bytes": self.raw_bytes,
            "encoded_bytes": self.encoded_bytes,
            "queue_high_water": {str(k): v for k, v
                                 in self.queue_high_water.items()},
            "writer_queue_high_water": self.writer_queue_high_water,
            "wall_time_s": self.wall_time_s,
        }


# ---------------------------------------------------------------------------
# rate arithmetic

def per_camera_bitrate(intr: CameraIntrinsics, bits_per_pixel: int,
                       fps: float) -> float:
    """Raw transport rate in bit/s."""
    if bits_per_pixel <= 0 or fps <= 0:
        raise InvalidArgumentError("bits_per_pixel and fps must be positive")
    return float(intr.width_px) * intr.height_px * bits_per_pixel * fps


def storage_duration(capacity_tb: float, aggregate_bitrate_bps: float,
                     ratio: float) -> float:
    """Seconds of footage a storage volume holds at the given compression."""
    if min(capacity_tb, aggregate_bitrate_bps, ratio) <= 0:
        raise InvalidArgumentError("all storage inputs must be positive")
    return capacity_tb * 8e12 / (aggregate_bitrate_bps / ratio)


def encode_chunk(frames, model: RatioModel = RatioModel()) -> EncodedChunk:
    """Compress one contiguous single-camera frame group (metadata only)."""
    frames = list(frames)
    if not frames:
        raise InvalidArgumentError("cannot encode an empty chunk")
    cam = frames[0].stamp.camera_id
    if any(f.stamp.camera_id != cam for f in frames):
        raise InvalidArgumentError("chunk mixes cameras")
    seqs = [f.stamp.seq for f in frames]
    if seqs != list(range(seqs[0], seqs[0] + len(seqs))):
        raise InvalidArgumentError("chunk frames must be seq-contiguous")
    raw = sum(f.payload_bytes for f in frames)
    ratio = model.ratio_for(sum(f.activity for f in frames) / len(frames))
    return EncodedChunk(camera_id=cam, first_seq=seqs[0], frame_count=len(frames),
                        raw_bytes=raw, encoded_bytes=max(1, round(raw / ratio)))


# ---------------------------------------------------------------------------
# per-frame activity from the scene

def _shape_extent(shape) -> tuple[float, float]:
    if isinstance(shape, BoxShape):
        return shape.width_m, shape.height_m
    return 2.0 * shape.radius_m, shape.height_m


def activity_profile(s: Scenario, triggers) -> dict[int, np.ndarray]:
    """Per camera: fraction of image area covered by visible actors at
    each trigger, via the pinhole small-object approximation, clamped to
    [0, 1]."""
    n = len(triggers)
    times = np.array([(t - triggers[0]) / 1e9 for t in triggers])
    out: dict[int, np.ndarray] = {}
    for cam in s.cameras:
        total = np.zeros(n)
        pos = np.asarray(cam.pose.position_m)
        area_px = cam.intrinsics.width_px * cam.intrinsics.height_px
        for actor in s.actors:
            poses = [actor_pose_at(actor, float(t)) for t in times]
            alive = np.array([p is not None for p in poses])
            if not alive.any():
                continue
            xs = np.array([p[0] for p, a in zip(poses, alive) if a])
            ys = np.array([p[1] for p, a in zip(poses, alive) if a])
            zs = np.full(xs.shape, actor.ref_height_m)
            vis = _camera_visibility(cam, xs, ys, zs, s.occluders)
            w_m, h_m = _shape_extent(actor.shape)
            d_sq = ((xs - pos[0])**2 + (ys - pos[1])**2 + (zs - pos[2])**2)
            frac = np.where(
                vis,
                (cam.intrinsics.fx_px * w_m) * (cam.intrinsics.fy_px * h_m)
                / np.maximum(d_sq, 1.0) / area_px,
                0.0)
            total[alive] += frac
        out[cam.id] = np.clip(total, 0.0, 1.0)
    return out


# ---------------------------------------------------------------------------
# virtual-time pipeline

_EV_WRITER_DONE, _EV_WORKER_DONE, _EV_ARRIVE = 0, 1, 2


@dataclass
class RecordingHandle:
    """Everything needed to materialize a recording directory later.

    Chunks are metadata; payload bytes are regenerated deterministically
    from (payload_seed, camera_id, first_seq) at write time.
    """
    scenario_sha256: str
    config: PipelineConfig
    stats: ThroughputStats
    chunks: tuple[EncodedChunk, ...]        # writer completion order
    stamps: tuple[FrameStamp, ...]          # written frames, (camera, seq) order
    payload_seed: int


def run_pipeline(s: Scenario, config: PipelineConfig,
                 duration_s: float | None = None,
                 start_utc_ns: int = 1_700_000_000_000_000_000
                 ) -> tuple[ThroughputStats, RecordingHandle]:
    """Simulate the full recording graph over virtual time.

    Frames enter per-camera source queues at trigger + latency; full
    queues drop the arriving frame (sources never block). Each worker
    encodes `chunk_frames`-sized groups — partial groups only once its
    stream has ended — at worker_throughput_fps, picking the longest
    serviceable queue. The writer consumes chunks through a bounded queue
    that blocks workers when full. Deterministic for a given scenario and
    config.
    """
    violations = validate_scenario(s)
    if violations:
        first = violations[0]
        raise InvalidArgumentError(
            f"scenario invalid: {first.entity}: {first.rule}")
    if not s.cameras:
        raise PipelineConfigError("scenario has no cameras")
    graph = build_node_graph([c.id for c in s.cameras], config.workers)
    duration = s.duration_s if duration_s is None else duration_s

    clock = TriggerClock(start_utc_ns, round(1e9 / s.frame_rate_hz))
    triggers = sync.generate_triggers(clock, duration)
    activity = activity_profile(s, triggers)
    cam_by_id = {c.id: c for c in s.cameras}
    frame_bytes = {cid: cam_by_id[cid].intrinsics.width_px
                   * cam_by_id[cid].intrinsics.height_px
                   * config.bits_per_pixel // 8
                   for cid in graph.sources}
    model = RatioModel(config.ratio_min, config.ratio_max)
    service_ns = {n: round(n / config.worker_throughput_fps * 1e9)
                  for n in range(1, config.chunk_frames + 1)}

    queues: dict[int, list[FrameMessage]] = {cid: [] for cid in graph.sources}
    high_water = {cid: 0 for cid in graph.sources}
    ended = {cid: False for cid in graph.sources}
    worker_of = {cid: graph.worker_of(cid) for cid in graph.sources}
    worker_busy = [False] * config.workers
    blocked: list[tuple[int, EncodedChunk]] = []  # (worker, finished chunk)
    writer_queue: list[EncodedChunk] = []
    writer_busy = False
    writer_high_water = 0

    produced = encoded = written_frames = dropped = 0
    raw_total = enc_total = 0
    written_chunks: list[EncodedChunk] = []
    written_stamps: list[FrameStamp] = []
    pending_stamps: dict[tuple[int, int], tuple[FrameStamp, ...]] = {}

    heap: list[tuple[int, int, int, tuple]] = []
    counter = 0

    def push(t: int, rank: int, data: tuple):
        nonlocal counter
        heapq.heappush(heap, (t, rank, counter, data))
        counter += 1

    for cid in graph.sources:
        for k, trig in enumerate(triggers):
            push(trig + config.latency_ns, _EV_ARRIVE, ("arrive", cid, k))

    def try_start_worker(w: int, now: int):
        nonlocal encoded, raw_total, enc_total
        if worker_busy[w] or any(bw == w for bw, _ in blocked):
            return
        serviceable = [cid for cid in graph.workers[w]
                       if len(queues[cid]) >= config.chunk_frames
                       or (ended[cid] and queues[cid])]
        if not serviceable:
            return
        cid = max(serviceable, key=lambda c: (len(queues[c]), -c))
        take = min(config.chunk_frames, len(queues[cid]))
        frames = queues[cid][:take]
        del queues[cid][:take]
        chunk = encode_chunk(frames, model)
        pending_stamps[(chunk.camera_id, chunk.first_seq)] = tuple(
            f.stamp for f in frames)
        worker_busy[w] = True
        push(now + service_ns[take], _EV_WORKER_DONE, ("worker_done", w, chunk))

    def try_start_writer(now: int):
        nonlocal writer_busy
        if writer_busy or not writer_queue:
            return
        chunk = writer_queue.pop(0)
        writer_busy = True
        if config.writer_throughput_fps > 0:
            dt = round(chunk.frame_count / config.writer_throughput_fps * 1e9)
        else:
            dt = 0
        push(now + dt, _EV_WRITER_DONE, ("writer_done", chunk))

    def offer_chunk(w: int, chunk: EncodedChunk, now: int):
        nonlocal writer_high_water
        if len(writer_queue) >= config.writer_capacity_chunks:
            blocked.append((w, chunk))  # backpressure: worker holds its result
            return
        writer_queue.append(chunk)
        writer_high_water = max(writer_high_water, len(writer_queue))
        worker_busy[w] = False
        try_start_writer(now)
        try_start_worker(w, now)

    last_event_ns = clock.start_utc_ns
    while heap:
        now, _rank, _c, data = heapq.heappop(heap)
        if config.realtime_factor > 0 and now > last_event_ns:
            time.sleep((now - last_event_ns) / 1e9 * config.realtime_factor)
        last_event_ns = max(last_event_ns, now)
        kind = data[0]

        if kind == "arrive":
            _, cid, k = data
            produced += 1
            if k == len(triggers) - 1:
                ended[cid] = True
            if len(queues[cid]) >= config.channel_capacity_frames:
                dropped += 1  # drop-newest: the arriving frame is discarded
            else:
                queues[cid].append(FrameMessage(
                    stamp=FrameStamp(cid, k, triggers[k], now),
                    payload_bytes=frame_bytes[cid],
                    activity=float(activity[cid][k])))
                high_water[cid] = max(high_water[cid], len(queues[cid]))
            try_start_worker(worker_of[cid], now)

        elif kind == "worker_done":
            _, w, chunk = data
            encoded += chunk.frame_count
            raw_total += chunk.raw_bytes
            enc_total += chunk.encoded_bytes
            offer_chunk(w, chunk, now)

        elif kind == "writer_done":
            _, chunk = data
            writer_busy = False
            written_chunks.append(chunk)
            written_frames += chunk.frame_count
            written_stamps.extend(
                pending_stamps.pop((chunk.camera_id, chunk.first_seq)))
            while blocked and len(writer_queue) < config.writer_capacity_chunks:
                bw, bchunk = blocked.pop(0)
                offer_chunk(bw, bchunk, now)
            try_start_writer(now)

    in_flight = produced - encoded - dropped
    assert in_flight == sum(len(q) for q in queues.values())
    assert written_frames == encoded  # the writer drains before shutdown

    fps = s.frame_rate_hz
    per_cam = {cid: per_camera_bitrate(cam_by_id[cid].intrinsics,
                                       config.bits_per_pixel, fps)
               for cid in graph.sources}
    stats = ThroughputStats(
        per_camera_bitrate_bps=per_cam,
        aggregate_bitrate_bps=sum(per_cam.values()),
        frames_produced=produced,
        frames_encoded=encoded,
        frames_written=written_frames,
        frames_dropped=dropped,
        in_flight=in_flight,
        chunks_written=len(written_chunks),
        raw_bytes=raw_total,
        encoded_bytes=enc_total,
        queue_high_water=high_water,
        writer_queue_high_water=writer_high_water,
        wall_time_s=(last_event_ns - clock.start_utc_ns) / 1e9,
    )
    written_stamps.sort(key=lambda f: (f.camera_id, f.seq))
    handle = RecordingHandle(
        scenario_sha256=scenario_io.scenario_hash(s),
        config=config,
        stats=stats,
        chunks=tuple(written_chunks),
        stamps=tuple(written_stamps),
        payload_seed=s.seed,
    )
    return stats, handle


# ---------------------------------------------------------------------------
# recording directory

_CHUNK_HEADER = struct.Struct("<HQIQQI")  # camera, first_seq, count, raw, enc, crc32


def chunk_payload(payload_seed: int, camera_id: int, first_seq: int,
                  encoded_bytes: int) -> bytes:
    """The deterministic pseudo-random payload of one stored chunk."""
    rng = np.random.default_rng([payload_seed, camera_id, first_seq])
    return rng.bytes(encoded_bytes)


@dataclass(frozen=True)
class StoredChunk:
    camera_id: int
    first_seq: int
    frame_count: int
    raw_bytes: int
    encoded_bytes: int
    crc32: int
    payload: bytes


def write_recording(handle: RecordingHandle, directory) -> Path:
    """Materialize manifest.json, cam<N>.chunks, and sync.csv."""
    import zlib

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    by_cam: dict[int, list[EncodedChunk]] = {}
    for chunk in handle.chunks:
        by_cam.setdefault(chunk.camera_id, []).append(chunk)
    for cid in sorted(by_cam):
        chunks = sorted(by_cam[cid], key=lambda c: c.first_seq)
        end = -1
        with open(directory / f"cam{cid}.chunks", "wb") as f:
            for chunk in chunks:
                if chunk.first_seq <= end:
                    raise InvalidArgumentError(
                        f"overlapping chunks for camera {cid} at seq "
                        f"{chunk.first_seq}")
                end = chunk.first_seq + chunk.frame_count - 1
                payload = chunk_payload(handle.payload_seed, cid,
                                        chunk.first_seq, chunk.encoded_bytes)
                header = _CHUNK_HEADER.pack(
                    chunk.camera_id, chunk.first_seq, chunk.frame_count,
                    chunk.raw_bytes, chunk.encoded_bytes,
                    zlib.crc32(payload) & 0xFFFFFFFF)
                f.write(struct.pack("<I", len(header) + len(payload)))
                f.write(header)
                f.write(payload)

    sync.write_sync_csv(handle.stamps, directory / "sync.csv")
    scenario_io.save_manifest(directory / "manifest.json",
                              scenario_sha256=handle.scenario_sha256,
                              config=handle.config.to_manifest_dict(),
                              stats=handle.stats.as_dict())
    return directory


def read_recording(directory) -> tuple[dict, list[StoredChunk], list[FrameStamp]]:
    """Parse and verify a recording directory.

    Returns (manifest, chunks, stamps). Raises CorruptRecordingError for
    missing pieces, truncated records, CRC mismatches, or per-camera seq
    overlaps/disorder.
    """
    import zlib

    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise CorruptRecordingError(f"{directory}: manifest.json missing")
    manifest = scenario_io.load_manifest(manifest_path)
    sync_path = directory / "sync.csv"
    if not sync_path.exists():
        raise CorruptRecordingError(f"{directory}: sync.csv missing")
    stamps = sync.read_sync_csv(sync_path)

    chunks: list[StoredChunk] = []
    for path in sorted(directory.glob("cam*.chunks"),
                       key=lambda p: int(p.stem[3:])):
        raw = path.read_bytes()
        offset = 0
        end = -1
        while offset < len(raw):
            if offset + 4 > len(raw):
                raise CorruptRecordingError(
                    f"{path}: truncated record length", offset=offset)
            (length,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            if length < _CHUNK_HEADER.size or offset + length > len(raw):
                raise CorruptRecordingError(
                    f"{path}: truncated chunk record", offset=offset - 4)
            cam, first_seq, count, raw_b, enc_b, crc = _CHUNK_HEADER.unpack_from(
                raw, offset)
            payload = raw[offset + _CHUNK_HEADER.size:offset + length]
            if len(payload) != enc_b:
                raise CorruptRecordingError(
                    f"{path}: payload length {len(payload)} != encoded_bytes "
                    f"{enc_b}", offset=offset)
            if zlib.crc32(payload) & 0xFFFFFFFF != crc:
                raise CorruptRecordingError(
                    f"{path}: payload CRC mismatch for chunk at seq {first_seq}",
                    offset=offset)
            if first_seq <= end:
                raise CorruptRecordingError(
                    f"{path}: chunk at seq {first_seq} overlaps its predecessor",
                    offset=offset)
            end = first_seq + count - 1
            chunks.append(StoredChunk(cam, first_seq, count, raw_b, enc_b,
                                      crc, payload))
            offset += length
    return manifest, chunks, stamps
