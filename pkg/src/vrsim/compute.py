"""Decode/render timing on the headset and the edge computing unit.

Decode workload of a GoP equals its compressed size d; render workload
equals the decoded size d/beta. Edge capacity is split proportionally to
workload among the users that offload at the same decision step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum


class ComputeConfigError(ValueError):
    """Raised when placements and allocations are inconsistent."""


class Placement(IntEnum):
    ECU_BOTH = 0
    ECU_DECODE_HEADSET_RENDER = 1
    HEADSET_BOTH = 2


# §V operating point of the evaluated system (bits/second).
DEFAULT_ECU_DECODE_BPS = 7.5e9
DEFAULT_ECU_RENDER_BPS = 20e9
DEFAULT_HEADSET_DECODE_BPS = 0.2e9
DEFAULT_HEADSET_RENDER_BPS = 9.4e9


@dataclass(frozen=True)
class ComputeProfile:
    headset_decode_bps: float = DEFAULT_HEADSET_DECODE_BPS
    headset_render_bps: float = DEFAULT_HEADSET_RENDER_BPS
    ecu_decode_bps: float = DEFAULT_ECU_DECODE_BPS
    ecu_render_bps: float = DEFAULT_ECU_RENDER_BPS

    def __post_init__(self) -> None:
        for name in ("headset_decode_bps", "headset_render_bps", "ecu_decode_bps", "ecu_render_bps"):
            if getattr(self, name) <= 0:
                raise ComputeConfigError(f"{name} must be positive")


@dataclass(frozen=True)
class EcuAllocation:
    """Per-user decode/render shares (bits/second) of the edge capacity."""

    decode_share_bps: dict[int, float] = field(default_factory=dict)
    render_share_bps: dict[int, float] = field(default_factory=dict)

    def decode_for(self, user: int) -> float:
        return self.decode_share_bps.get(user, 0.0)

    def render_for(self, user: int) -> float:
        return self.render_share_bps.get(user, 0.0)


@dataclass(frozen=True)
class StageTimes:
    decode_s: float
    render_s: float
    payload_bits: float


def decode_workload(d_bits: float) -> float:
    """Decode complexity in bits: the compressed viewport size itself."""
    if d_bits < 0:
        raise ValueError("size must be nonnegative")
    return d_bits


def render_workload(d_bits: float, beta: float) -> float:
    """Render complexity in bits: the decoded size d/beta."""
    if d_bits < 0:
        raise ValueError("size must be nonnegative")
    return d_bits / beta


def ecu_allocate(
    requests: list[tuple[int, float, float]],
    profile: ComputeProfile,
) -> EcuAllocation:
    """Split edge capacity proportionally to per-user workloads.

    ``requests`` holds (user, decode_workload_bits, render_workload_bits);
    a zero workload means that stage is not offloaded by that user. The
    split is work-conserving: shares of each stage sum to full capacity
    whenever any user requests it.
    """
    decode_total = sum(w for _, w, _ in requests)
    render_total = sum(w for _, _, w in requests)
    if any(w < 0 or r < 0 for _, w, r in requests):
        raise ValueError("workloads must be nonnegative")
    decode = {}
    render = {}
    for user, w_dec, w_rend in requests:
        if w_dec > 0:
            decode[user] = profile.ecu_decode_bps * w_dec / decode_total
        if w_rend > 0:
            render[user] = profile.ecu_render_bps * w_rend / render_total
    return EcuAllocation(decode_share_bps=decode, render_share_bps=render)


def stage_times(
    placement: Placement,
    d_bits: float,
    profile: ComputeProfile,
    alloc: EcuAllocation,
    user: int,
    beta: float,
    alpha: float,
) -> StageTimes:
    """Decode time, render time, and over-the-air payload for one GoP.

    The payload is what crosses the wireless link: alpha*d/beta when the
    edge does both stages, d/beta after edge decode only, and d when the
    headset does everything.
    """
    if d_bits < 0:
        raise ValueError("size must be nonnegative")
    if d_bits == 0:
        return StageTimes(0.0, 0.0, 0.0)
    decoded = d_bits / beta
    if placement == Placement.ECU_BOTH:
        psi = alloc.decode_for(user)
        theta = alloc.render_for(user)
        if psi <= 0 or theta <= 0:
            raise ComputeConfigError("edge placement requires positive decode and render shares")
        return StageTimes(d_bits / psi, decoded / theta, alpha * decoded)
    if placement == Placement.ECU_DECODE_HEADSET_RENDER:
        psi = alloc.decode_for(user)
        if psi <= 0:
            raise ComputeConfigError("edge decode placement requires a positive decode share")
        return StageTimes(d_bits / psi, decoded / profile.headset_render_bps, decoded)
    return StageTimes(
        d_bits / profile.headset_decode_bps,
        decoded / profile.headset_render_bps,
        d_bits,
    )


def ecu_side_duration(placement: Placement, times: StageTimes) -> float:
    """Seconds of edge-side work that precede transmission."""
    if placement == Placement.ECU_BOTH:
        return times.decode_s + times.render_s
    if placement == Placement.ECU_DECODE_HEADSET_RENDER:
        return times.decode_s
    return 0.0
