"""GPS-disciplined trigger clock, arrival association, and drop detection.

All timestamps are integer nanoseconds since the UTC epoch. The 25 Hz
period is exactly 40,000,000 ns, so trigger arithmetic is exact — no
float time enters the bookkeeping anywhere. Triggers fire exactly on the
lattice start + k·period; only frame *arrivals* jitter.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousAssociationError,
    CorruptFileError,
    InvalidArgumentError,
)

PERIOD_25HZ_NS = 40_000_000


@dataclass(frozen=True)
class TriggerClock:
    start_utc_ns: int
    period_ns: int = PERIOD_25HZ_NS
    jitter_sd_ns: int = 0  # arrival jitter; the triggers themselves are exact

    def __post_init__(self):
        if self.period_ns <= 0:
            raise InvalidArgumentError("period_ns must be positive")
        if self.jitter_sd_ns < 0:
            raise InvalidArgumentError("jitter_sd_ns must be >= 0")

    @staticmethod
    def at_rate(start_utc_ns: int, frame_rate_hz: float,
                jitter_sd_ns: int = 0) -> "TriggerClock":
        if frame_rate_hz <= 0:
            raise InvalidArgumentError("frame_rate_hz must be positive")
        return TriggerClock(start_utc_ns, round(1e9 / frame_rate_hz), jitter_sd_ns)


@dataclass(frozen=True)
class FrameArrival:
    """A frame as it reaches the processing host, before association."""
    camera_id: int
    arrival_ns: int


@dataclass(frozen=True)
class FrameStamp:
    camera_id: int
    seq: int               # trigger index: trigger_utc_ns = start + seq*period
    trigger_utc_ns: int
    arrival_ns: int


def generate_triggers(clock: TriggerClock, duration_s: float) -> list[int]:
    """Trigger times covering [0, duration_s]: floor(duration*1e9/period)+1
    instants, spaced exactly period_ns apart."""
    if duration_s <= 0:
        raise InvalidArgumentError("duration_s must be positive")
    count = math.floor(duration_s * 1e9) // clock.period_ns + 1
    return [clock.start_utc_ns + k * clock.period_ns for k in range(count)]


def associate(arrivals, clock: TriggerClock, latency_ns=0) -> list[FrameStamp]:
    """Assign each arrival the nearest trigger to (arrival - latency).

    Exact half-period ties break to the earlier trigger. latency_ns is
    the constant transport latency, either one integer for all cameras or
    a mapping camera_id -> integer. Two frames of one camera landing on
    the same trigger raise AmbiguousAssociationError listing every
    conflict. Output is sorted by (camera_id, seq), so the result does
    not depend on input order.
    """
    period = clock.period_ns
    tie_shift = (period - 1) // 2  # floor((t + shift)/period) ties downward

    def latency_of(cid: int) -> int:
        return latency_ns[cid] if isinstance(latency_ns, dict) else latency_ns

    taken: dict[tuple[int, int], int] = {}
    conflicts: list[tuple[int, int, int, int]] = []
    out: list[FrameStamp] = []
    for fr in arrivals:
        t = fr.arrival_ns - latency_of(fr.camera_id)
        k = (t - clock.start_utc_ns + tie_shift) // period
        if k < 0:
            k = 0
        trigger = clock.start_utc_ns + k * period
        if abs(t - trigger) > period // 2:
            raise InvalidArgumentError(
                f"arrival {fr.arrival_ns} of camera {fr.camera_id} predates "
                f"the trigger clock")
        key = (fr.camera_id, k)
        if key in taken:
            conflicts.append((fr.camera_id, trigger, taken[key], fr.arrival_ns))
            continue
        taken[key] = fr.arrival_ns
        out.append(FrameStamp(fr.camera_id, int(k), trigger, fr.arrival_ns))
    if conflicts:
        raise AmbiguousAssociationError(
            f"{len(conflicts)} arrival(s) mapped to an already-taken trigger",
            conflicts=conflicts)
    out.sort(key=lambda f: (f.camera_id, f.seq))
    return out


def detect_drops(frames) -> list[tuple[int, tuple[int, ...]]]:
    """Per-camera gaps in the associated trigger sequence.

    Returns (camera_id, missing trigger times) for every camera with at
    least one hole between its first and last observed frame; complete
    streams produce nothing. Trigger spacing is recovered from the
    observed stamps by exact integer division.
    """
    by_cam: dict[int, list[FrameStamp]] = {}
    for fr in frames:
        by_cam.setdefault(fr.camera_id, []).append(fr)
    report = []
    for cid in sorted(by_cam):
        stamps = sorted(by_cam[cid], key=lambda f: f.seq)
        missing: list[int] = []
        for a, b in zip(stamps, stamps[1:]):
            gap = b.seq - a.seq
            if gap > 1:
                step = (b.trigger_utc_ns - a.trigger_utc_ns) // gap
                missing.extend(a.trigger_utc_ns + m * step for m in range(1, gap))
        if missing:
            report.append((cid, tuple(missing)))
    return report


def simulate_arrivals(clock: TriggerClock, camera_ids, duration_s: float,
                      latency_ns=5_000_000, seed: int = 0) -> list[FrameStamp]:
    """Ground-truth frame stream: every camera answers every trigger.

    Arrival = trigger + latency + jitter, with Gaussian jitter clipped to
    +-3 sigma and rounded to integer ns; arrivals never precede their
    trigger. Deterministic in `seed`.
    """
    triggers = generate_triggers(clock, duration_s)
    rng = np.random.default_rng(seed)

    def latency_of(cid: int) -> int:
        return latency_ns[cid] if isinstance(latency_ns, dict) else latency_ns

    frames: list[FrameStamp] = []
    for cid in sorted(camera_ids):
        lat = latency_of(cid)
        if clock.jitter_sd_ns > 0:
            sd = float(clock.jitter_sd_ns)
            jitter = np.rint(np.clip(rng.normal(0.0, sd, len(triggers)),
                                     -3.0 * sd, 3.0 * sd)).astype(np.int64)
        else:
            jitter = np.zeros(len(triggers), dtype=np.int64)
        for k, t in enumerate(triggers):
            frames.append(FrameStamp(cid, k, t, max(t, t + lat + int(jitter[k]))))
    return frames


# ---------------------------------------------------------------------------
# sync file

SYNC_CSV_HEADER = ("camera_id", "seq", "trigger_utc_ns", "arrival_ns")


def write_sync_csv(frames, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SYNC_CSV_HEADER)
        for fr in frames:
            w.writerow((fr.camera_id, fr.seq, fr.trigger_utc_ns, fr.arrival_ns))


def read_sync_csv(path) -> list[FrameStamp]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != list(SYNC_CSV_HEADER):
            raise CorruptFileError(f"{path}: bad sync header {header!r}", offset=0)
        frames = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CorruptFileError(
                    f"{path}: line {lineno}: expected 4 fields, found {len(row)}")
            try:
                cid, seq, trigger, arrival = (int(v) for v in row)
            except ValueError as e:
                raise CorruptFileError(f"{path}: line {lineno}: {e}") from e
            frames.append(FrameStamp(cid, seq, trigger, arrival))
    return frames
