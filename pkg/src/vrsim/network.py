"""Throughput-trace replay and exact transmission-time inversion.

A trace is a piecewise-constant rate signal: each sample's rate applies
from its timestamp up to (but excluding) the next one. Without
wraparound the final rate extends forever; with wraparound the trace
repeats with a period of last timestamp plus one trailing interval
(equal to the preceding interval, or 1 s for single-sample traces).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRACE_HEADER = "trace-version 1"


class TraceError(ValueError):
    """Raised for malformed traces or invalid query arguments."""


class UnreachableTransferError(RuntimeError):
    """Raised when the remaining trace can never carry the requested bits."""


@dataclass(frozen=True)
class ThroughputTrace:
    timestamps_s: np.ndarray
    rates_bps: np.ndarray
    wraparound: bool = True

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps_s, dtype=float)
        rates = np.asarray(self.rates_bps, dtype=float)
        object.__setattr__(self, "timestamps_s", ts)
        object.__setattr__(self, "rates_bps", rates)
        if ts.ndim != 1 or ts.shape != rates.shape or ts.size == 0:
            raise TraceError("trace needs matching 1-D timestamp and rate arrays")
        if ts[0] != 0.0:
            raise TraceError("trace must start at timestamp 0")
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            raise TraceError("timestamps must be strictly increasing")
        if np.any(rates < 0):
            raise TraceError("rates must be nonnegative")
        if not np.any(rates > 0):
            raise TraceError("trace must contain a positive rate")

    @property
    def period_s(self) -> float:
        """Replay period used when wraparound is enabled."""
        ts = self.timestamps_s
        tail = ts[-1] - ts[-2] if ts.size > 1 else 1.0
        return float(ts[-1] + tail)

    @property
    def _segment_durations(self) -> np.ndarray:
        ts = self.timestamps_s
        tail = ts[-1] - ts[-2] if ts.size > 1 else 1.0
        return np.append(np.diff(ts), tail)

    def _period_bits(self) -> float:
        return float(np.dot(self._segment_durations, self.rates_bps))


def instantaneous_rate(trace: ThroughputTrace, t_s: float) -> float:
    """Rate of the segment containing time t (a new rate applies exactly
    at its own timestamp)."""
    if t_s < 0:
        raise TraceError("time must be nonnegative")
    if trace.wraparound:
        t_s = t_s % trace.period_s
    idx = int(np.searchsorted(trace.timestamps_s, t_s, side="right")) - 1
    return float(trace.rates_bps[idx])


def cumulative_bits(trace: ThroughputTrace, t_s: float) -> float:
    """Bits carried by the link over [0, t]."""
    if t_s < 0:
        raise TraceError("time must be nonnegative")
    ts = trace.timestamps_s
    rates = trace.rates_bps
    total = 0.0
    if trace.wraparound:
        period = trace.period_s
        full, t_s = divmod(t_s, period)
        total += full * trace._period_bits()
    idx = int(np.searchsorted(ts, t_s, side="right")) - 1
    if idx > 0:
        durations = np.diff(ts[: idx + 1])
        total += float(np.dot(durations, rates[:idx]))
    total += (t_s - ts[idx]) * float(rates[idx])
    return total


def mean_throughput(trace: ThroughputTrace, t_start_s: float, t_end_s: float) -> float:
    """Integral-average rate over [t_start, t_end]."""
    if t_end_s <= t_start_s:
        raise TraceError("interval end must exceed its start")
    return (cumulative_bits(trace, t_end_s) - cumulative_bits(trace, t_start_s)) / (
        t_end_s - t_start_s
    )


def transmission_time(trace: ThroughputTrace, t_start_s: float, size_bits: float) -> float:
    """Smallest tau such that the link carries ``size_bits`` over
    [t_start, t_start + tau].

    Walks trace segments and accumulates bits exactly, so the identity
    size = tau * mean_throughput(t_start, t_start + tau) holds by
    construction.
    """
    if size_bits < 0:
        raise TraceError("size must be nonnegative")
    if t_start_s < 0:
        raise TraceError("start time must be nonnegative")
    if size_bits == 0:
        return 0.0
    ts = trace.timestamps_s
    rates = trace.rates_bps
    durations = trace._segment_durations

    remaining = size_bits
    tau = 0.0
    if trace.wraparound:
        period = trace.period_s
        per_period = trace._period_bits()
        offset = t_start_s % period
        idx = int(np.searchsorted(ts, offset, side="right")) - 1
        # finish the partially elapsed segment, then whole segments
        seg_left = ts[idx] + durations[idx] - offset
        while True:
            if remaining <= 0:
                return tau
            rate = float(rates[idx])
            if rate > 0 and rate * seg_left >= remaining:
                return tau + remaining / rate
            remaining -= rate * seg_left
            tau += seg_left
            idx += 1
            if idx == len(ts):
                # skip whole periods at once once realigned to the start
                full = int(remaining // per_period)
                if full:
                    remaining -= full * per_period
                    tau += full * period
                idx = 0
            seg_left = float(durations[idx])
    else:
        idx = int(np.searchsorted(ts, t_start_s, side="right")) - 1
        seg_left = ts[idx] + durations[idx] - t_start_s if idx + 1 < len(ts) else np.inf
        while True:
            if remaining <= 0:
                return tau
            rate = float(rates[idx])
            if idx + 1 == len(ts):
                if rate <= 0:
                    raise UnreachableTransferError(
                        f"{remaining:.6g} bits remain but the trace tail rate is zero"
                    )
                return tau + remaining / rate
            if rate * seg_left >= remaining and rate > 0:
                return tau + remaining / rate
            remaining -= rate * seg_left
            tau += seg_left
            idx += 1
            seg_left = float(durations[idx]) if idx + 1 < len(ts) else np.inf


def save_trace(trace: ThroughputTrace, path: str | Path) -> None:
    lines = [TRACE_HEADER]
    for t, r in zip(trace.timestamps_s, trace.rates_bps):
        lines.append(f"{float(t)!r} {float(r)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_trace(path: str | Path, wraparound: bool = True) -> ThroughputTrace:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise TraceError(f"trace file must start with '{TRACE_HEADER}'")
    ts = []
    rates = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise TraceError(f"bad trace line: {ln!r}")
        ts.append(float(parts[0]))
        rates.append(float(parts[1]))
    return ThroughputTrace(np.array(ts), np.array(rates), wraparound=wraparound)


def generate_trace(
    rng: np.random.Generator,
    duration_s: float = 120.0,
    sample_interval_s: float = 1.0,
    mean_rate_bps: float = 800e6,
    std_rate_bps: float = 300e6,
    min_rate_bps: float = 10e6,
) -> ThroughputTrace:
    """Synthetic link trace: an AR(1) walk around the mean rate, floored
    at a positive minimum so transfers always complete."""
    n = max(2, int(round(duration_s / sample_interval_s)))
    rates = np.empty(n)
    level = mean_rate_bps
    for i in range(n):
        level = 0.8 * level + 0.2 * mean_rate_bps + rng.normal(0.0, std_rate_bps) * 0.3
        rates[i] = max(min_rate_bps, level)
    ts = np.arange(n) * sample_interval_s
    return ThroughputTrace(ts, rates, wraparound=True)
