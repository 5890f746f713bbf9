"""Per-user playback session stepping.

Each step prepares one GoP (decode, render, transmit in placement order)
and advances the buffer recursion:

    stall = (D + P + T - B)_+
    wait  = ((B - D - P - T)_+ + gop_duration - B_max)_+
    B'    = ((B - D - P - T)_+ + gop_duration - wait)_+
    t'    = t + D + P + T + wait

Edge-side stages run before transmission and headset-side stages after
reception; stages never overlap (store-and-forward).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from . import compute, network, video
from .compute import ComputeProfile, EcuAllocation, Placement
from .network import ThroughputTrace
from .video import VideoManifest


class SessionCompleteError(RuntimeError):
    """Raised when stepping a session whose GoPs are all consumed."""


@dataclass(frozen=True)
class StepTiming:
    decode_s: float
    render_s: float
    transmit_s: float
    wait_s: float
    stall_s: float
    segment_bits: float
    payload_bits: float
    mean_throughput_bps: float

    @property
    def busy_s(self) -> float:
        return self.decode_s + self.render_s + self.transmit_s


@dataclass
class SessionState:
    user: int
    num_gops: int
    buffer_cap_s: float
    history_len: int = 8
    clock_s: float = 0.0
    gop_cursor: int = 0
    buffer_s: float = 0.0
    total_stall_s: float = 0.0
    last_quality_db: float = 0.0
    throughput_hist: deque = field(default_factory=deque)
    decode_hist: deque = field(default_factory=deque)
    render_hist: deque = field(default_factory=deque)
    transmit_hist: deque = field(default_factory=deque)
    selection_hist: deque = field(default_factory=deque)

    def __post_init__(self) -> None:
        for name in ("throughput_hist", "decode_hist", "render_hist", "transmit_hist", "selection_hist"):
            setattr(self, name, deque(getattr(self, name), maxlen=self.history_len))

    @property
    def complete(self) -> bool:
        return self.gop_cursor >= self.num_gops

    def record(self, timing: StepTiming, layer_count: int) -> None:
        self.throughput_hist.append(timing.mean_throughput_bps)
        self.decode_hist.append(timing.decode_s)
        self.render_hist.append(timing.render_s)
        self.transmit_hist.append(timing.transmit_s)
        self.selection_hist.append(layer_count)


def rebuffer_time(buffer_s: float, decode_s: float, render_s: float, transmit_s: float) -> float:
    """Stall incurred when preparation outlasts the buffered content."""
    return max(0.0, decode_s + render_s + transmit_s - buffer_s)


def prepare_gop(
    state: SessionState,
    placement: Placement,
    layer_count: int,
    manifest: VideoManifest,
    viewport_tiles: tuple[int, ...],
    profile: ComputeProfile,
    alloc: EcuAllocation,
    trace: ThroughputTrace,
) -> StepTiming:
    """Timing of the session's next GoP under the given joint decision.

    Transmission starts after any edge-side stages; wait and stall are
    left for step_user, which owns the buffer update.
    """
    if state.complete:
        raise SessionCompleteError(f"user {state.user} already played all {state.num_gops} GoPs")
    d = video.segment_size(manifest, state.gop_cursor, viewport_tiles, layer_count)
    times = compute.stage_times(
        placement, d, profile, alloc, state.user, manifest.beta, manifest.alpha
    )
    transmit_start = state.clock_s + compute.ecu_side_duration(placement, times)
    transmit_s = network.transmission_time(trace, transmit_start, times.payload_bits)
    if transmit_s > 0:
        mean_bps = times.payload_bits / transmit_s
    else:
        mean_bps = network.instantaneous_rate(trace, transmit_start)
    return StepTiming(
        decode_s=times.decode_s,
        render_s=times.render_s,
        transmit_s=transmit_s,
        wait_s=0.0,
        stall_s=0.0,
        segment_bits=d,
        payload_bits=times.payload_bits,
        mean_throughput_bps=mean_bps,
    )


def step_user(
    state: SessionState,
    timing: StepTiming,
    gop_duration_s: float,
) -> StepTiming:
    """Advance the buffer recursion by one GoP and return the completed
    timing record (wait and stall filled in)."""
    if state.complete:
        raise SessionCompleteError(f"user {state.user} already played all {state.num_gops} GoPs")
    busy = timing.busy_s
    stall = max(0.0, busy - state.buffer_s)
    drained = max(0.0, state.buffer_s - busy)
    wait = max(0.0, drained + gop_duration_s - state.buffer_cap_s)
    state.buffer_s = max(0.0, drained + gop_duration_s - wait)
    state.clock_s += busy + wait
    state.total_stall_s += stall
    state.gop_cursor += 1
    return StepTiming(
        decode_s=timing.decode_s,
        render_s=timing.render_s,
        transmit_s=timing.transmit_s,
        wait_s=wait,
        stall_s=stall,
        segment_bits=timing.segment_bits,
        payload_bits=timing.payload_bits,
        mean_throughput_bps=timing.mean_throughput_bps,
    )


TELEMETRY_COLUMNS = (
    "user",
    "m",
    "placement",
    "layers",
    "d_bits",
    "payload_bits",
    "D_s",
    "P_s",
    "T_s",
    "wait_s",
    "stall_s",
    "buffer_s",
    "psnr_db",
)


def telemetry_row(
    state: SessionState,
    gop: int,
    placement: Placement,
    layer_count: int,
    timing: StepTiming,
    psnr_db: float,
) -> dict:
    """One per-step telemetry record (see TELEMETRY_COLUMNS)."""
    return {
        "user": state.user,
        "m": gop,
        "placement": int(placement),
        "layers": layer_count,
        "d_bits": timing.segment_bits,
        "payload_bits": timing.payload_bits,
        "D_s": timing.decode_s,
        "P_s": timing.render_s,
        "T_s": timing.transmit_s,
        "wait_s": timing.wait_s,
        "stall_s": timing.stall_s,
        "buffer_s": state.buffer_s,
        "psnr_db": psnr_db,
    }
