"""Deterministic reference policies and the evaluation harness."""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import qoe
from .compute import ComputeProfile, Placement
from .env import ScenarioConfig, StreamingEnv


@dataclass(frozen=True)
class MaxAffordable:
    """Pick the largest layer whose estimated preparation time fits in
    the current buffer minus a safety margin."""

    margin_s: float = 0.5

    def __post_init__(self) -> None:
        if self.margin_s < 0:
            raise ValueError("margin must be nonnegative")


@dataclass(frozen=True)
class FixedLayer:
    layer: int


@dataclass(frozen=True)
class BufferScaledRate:
    """Map buffer occupancy linearly onto the layer range."""

    buffer_cap_s: float = 4.0


class FixedPlacementPolicy:
    """All users use one placement; the layer comes from the rate rule."""

    def __init__(self, placement: Placement, rule=MaxAffordable()):
        self.placement = placement
        self.rule = rule

    def decide(self, env: StreamingEnv) -> tuple[list[int], list[int]]:
        layers = []
        for ctx in env.action_context():
            if ctx["complete"]:
                layers.append(1)
                continue
            layers.append(self._pick_layer(ctx, env.config.profile))
        placements = [int(self.placement)] * env.config.num_users
        return layers, placements

    def _pick_layer(self, ctx: dict, profile: ComputeProfile) -> int:
        if isinstance(self.rule, FixedLayer):
            return min(self.rule.layer, ctx["num_layers"])
        if isinstance(self.rule, BufferScaledRate):
            frac = min(1.0, ctx["buffer_s"] / self.rule.buffer_cap_s)
            return 1 + int(frac * (ctx["num_layers"] - 1))
        thr = ctx["last_throughput_bps"]
        budget = ctx["buffer_s"] - self.rule.margin_s
        for layer in range(ctx["num_layers"], 1, -1):
            if thr <= 0:
                break
            if self._estimate_prep_s(ctx, profile, layer, thr) <= budget:
                return layer
        return 1

    def _estimate_prep_s(
        self, ctx: dict, profile: ComputeProfile, layer: int, thr_bps: float
    ) -> float:
        d = ctx["layer_sizes_bits"][layer - 1]
        beta = ctx["beta"]
        alpha = ctx["alpha"]
        if self.placement == Placement.ECU_BOTH:
            decode = d / profile.ecu_decode_bps
            render = (d / beta) / profile.ecu_render_bps
            payload = alpha * d / beta
        elif self.placement == Placement.ECU_DECODE_HEADSET_RENDER:
            decode = d / profile.ecu_decode_bps
            render = (d / beta) / profile.headset_render_bps
            payload = d / beta
        else:
            decode = d / profile.headset_decode_bps
            render = (d / beta) / profile.headset_render_bps
            payload = d
        return decode + render + payload / thr_bps


class RandomPolicy:
    """Uniform draws over valid layers and placements, reproducible from
    its seed."""

    def __init__(self, seed: int):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def decide(self, env: StreamingEnv) -> tuple[list[int], list[int]]:
        n = env.config.num_users
        layers = [int(v) for v in self.rng.integers(1, env.num_layers + 1, size=n)]
        placements = [int(v) for v in self.rng.integers(0, 3, size=n)]
        return layers, placements


NAMED_POLICIES = ("ecu-all", "headset-all", "buffer-rate", "random")


def make_policy(name: str, seed: int = 0):
    if name == "ecu-all":
        return FixedPlacementPolicy(Placement.ECU_BOTH, MaxAffordable())
    if name == "headset-all":
        return FixedPlacementPolicy(Placement.HEADSET_BOTH, MaxAffordable())
    if name == "buffer-rate":
        return FixedPlacementPolicy(Placement.ECU_DECODE_HEADSET_RENDER, BufferScaledRate())
    if name == "random":
        return RandomPolicy(seed)
    raise ValueError(f"unknown policy {name!r}; choose from {NAMED_POLICIES}")


PER_EPISODE_COLUMNS = (
    "episode",
    "user",
    "psnr_mean_db",
    "psnr_std_db",
    "rebuffer_s",
    "aqv_db",
    "weighted_qoe",
    "lagrangian_qoe",
    "mean_transmit_s",
    "mean_prep_s",
    "mu0",
    "mu1",
)


@dataclass
class MetricsReport:
    policy: str
    episodes: int
    rows: list[dict]  # per (episode, user), PER_EPISODE_COLUMNS keys
    telemetry: list[dict]  # per step, playback.TELEMETRY_COLUMNS plus "episode"

    def summary(self) -> dict[str, tuple[float, float]]:
        """Mean and std over episodes x users for each metric."""
        out = {}
        for key in ("psnr_mean_db", "rebuffer_s", "aqv_db", "weighted_qoe",
                    "lagrangian_qoe", "mean_transmit_s", "mean_prep_s"):
            vals = [r[key] for r in self.rows]
            out[key] = (
                statistics.fmean(vals),
                statistics.pstdev(vals) if len(vals) > 1 else 0.0,
            )
        return out

    def table(self) -> str:
        lines = [f"policy: {self.policy} ({self.episodes} episodes)"]
        for key, (mean, std) in self.summary().items():
            lines.append(f"  {key:16s} {mean:12.4f} +- {std:.4f}")
        return "\n".join(lines)


def evaluate(
    policy,
    config: ScenarioConfig,
    episodes: int,
    base_seed: int | None = None,
    out_dir: str | Path | None = None,
) -> MetricsReport:
    """Run a policy for n episodes and collect paper-style metrics.

    Multipliers stay at their configured values; evaluation never tunes
    them.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    env = StreamingEnv(config)
    seed0 = config.seed if base_seed is None else base_seed
    rows = []
    telemetry = []
    for ep in range(episodes):
        env.reset(seed0 + ep)
        done = False
        while not done:
            layers, placements = policy.decide(env)
            result = env.step(layers, placements)
            done = result.done
        for row in env.telemetry:
            telemetry.append({"episode": ep, **row})
        per_user_q: dict[int, list[float]] = {}
        per_user_t: dict[int, list[float]] = {}
        per_user_prep: dict[int, list[float]] = {}
        for row in env.telemetry:
            per_user_q.setdefault(row["user"], []).append(row["psnr_db"])
            per_user_t.setdefault(row["user"], []).append(row["T_s"])
            per_user_prep.setdefault(row["user"], []).append(
                row["D_s"] + row["P_s"] + row["T_s"]
            )
        for user, acc in enumerate(env.accumulators):
            qs = per_user_q[user]
            rows.append(
                {
                    "episode": ep,
                    "user": user,
                    "psnr_mean_db": qoe.average_quality(acc),
                    "psnr_std_db": statistics.pstdev(qs) if len(qs) > 1 else 0.0,
                    "rebuffer_s": acc.stall_sum_s,
                    "aqv_db": qoe.quality_variation(acc) if acc.gop_count >= 2 else 0.0,
                    "weighted_qoe": qoe.weighted_qoe(acc, env.lagrangian.mu0, env.lagrangian.mu1),
                    "lagrangian_qoe": qoe.lagrangian_qoe(acc, env.lagrangian),
                    "mean_transmit_s": statistics.fmean(per_user_t[user]),
                    "mean_prep_s": statistics.fmean(per_user_prep[user]),
                    "mu0": env.lagrangian.mu0,
                    "mu1": env.lagrangian.mu1,
                }
            )
    report = MetricsReport(
        policy=getattr(policy, "name", policy.__class__.__name__),
        episodes=episodes,
        rows=rows,
        telemetry=telemetry,
    )
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report: MetricsReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "per_episode.csv", PER_EPISODE_COLUMNS, report.rows)
    telemetry_cols = ("episode",) + tuple(
        c for c in report.telemetry[0] if c != "episode"
    ) if report.telemetry else ("episode",)
    _write_csv(out / "telemetry.csv", telemetry_cols, report.telemetry)
    summary_rows = [
        {"metric": key, "mean": mean, "std": std}
        for key, (mean, std) in report.summary().items()
    ]
    _write_csv(out / "summary.csv", ("metric", "mean", "std"), summary_rows)


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)
