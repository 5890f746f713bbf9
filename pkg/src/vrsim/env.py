"""Multi-user streaming environment for learning agents.

Loads a scenario (users, asset pools, compute profile, targets), steps
all users in lockstep one GoP per decision, and emits per-user rewards
equal to the change in the dualized QoE running sum. Episode asset
choices are drawn from named, independent RNG streams so trajectories
are reproducible from (config, seed) alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import compute, playback, qoe, video
from .compute import ComputeProfile, Placement
from .network import ThroughputTrace, load_trace
from .playback import SessionState, StepTiming
from .qoe import LagrangianState, QoeAccumulator
from .video import VideoManifest, ViewportTrace

CONFIG_VERSION = 1

# fixed per-subsystem RNG stream tags; adding a stream must not renumber these
_STREAM_VIDEO = 0
_STREAM_TRACE = 1
_STREAM_VIEWPORT = 2


class ConfigError(ValueError):
    """Raised for unresolvable or inconsistent scenario configs."""


class ActionError(ValueError):
    """Raised for out-of-range or malformed joint actions."""


class EpisodeStateError(RuntimeError):
    """Raised when stepping a finished episode or observing before reset."""


@dataclass(frozen=True)
class NormalizationSpec:
    throughput_ref_bps: float = 1e9
    size_ref_bits: float = 1e8


@dataclass(frozen=True)
class RandomizeFlags:
    video: bool = True
    trace: bool = True
    viewport: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    num_users: int
    manifest_paths: tuple[str, ...]
    viewport_paths: tuple[str, ...]
    trace_paths: tuple[str, ...]
    profile: ComputeProfile = ComputeProfile()
    buffer_cap_s: float | None = None  # None: 4 GoP durations per user
    history_len: int = 8
    future_window: int = 5
    lagrangian: LagrangianState = LagrangianState()
    seed: int = 0
    randomize: RandomizeFlags = RandomizeFlags()
    normalization: NormalizationSpec = NormalizationSpec()

    def __post_init__(self) -> None:
        if self.num_users < 1:
            raise ConfigError("num_users must be >= 1")
        if self.history_len < 1 or self.future_window < 1:
            raise ConfigError("history_len and future_window must be >= 1")
        if not (self.manifest_paths and self.viewport_paths and self.trace_paths):
            raise ConfigError("manifest, viewport, and trace pools must be nonempty")

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioConfig":
        if obj.get("config-version") != CONFIG_VERSION:
            raise ConfigError("unsupported or missing config-version")
        prof = obj.get("compute", {})
        lag = obj.get("lagrangian", {})
        rand = obj.get("randomize", {})
        norm = obj.get("normalization", {})
        return cls(
            num_users=int(obj["num_users"]),
            manifest_paths=tuple(obj["manifests"]),
            viewport_paths=tuple(obj["viewports"]),
            trace_paths=tuple(obj["traces"]),
            profile=ComputeProfile(**prof),
            buffer_cap_s=obj.get("buffer_cap_s"),
            history_len=int(obj.get("history_len", 8)),
            future_window=int(obj.get("future_window", 5)),
            lagrangian=LagrangianState(**lag),
            seed=int(obj.get("seed", 0)),
            randomize=RandomizeFlags(**rand),
            normalization=NormalizationSpec(**norm),
        )

    def to_dict(self) -> dict:
        return {
            "config-version": CONFIG_VERSION,
            "num_users": self.num_users,
            "manifests": list(self.manifest_paths),
            "viewports": list(self.viewport_paths),
            "traces": list(self.trace_paths),
            "compute": {
                "headset_decode_bps": self.profile.headset_decode_bps,
                "headset_render_bps": self.profile.headset_render_bps,
                "ecu_decode_bps": self.profile.ecu_decode_bps,
                "ecu_render_bps": self.profile.ecu_render_bps,
            },
            "buffer_cap_s": self.buffer_cap_s,
            "history_len": self.history_len,
            "future_window": self.future_window,
            "lagrangian": {
                "mu0": self.lagrangian.mu0,
                "mu1": self.lagrangian.mu1,
                "stall_target_s": self.lagrangian.stall_target_s,
                "variation_target_db": self.lagrangian.variation_target_db,
                "step_size": self.lagrangian.step_size,
                "mu_max": self.lagrangian.mu_max,
            },
            "seed": self.seed,
            "randomize": {
                "video": self.randomize.video,
                "trace": self.randomize.trace,
                "viewport": self.randomize.viewport,
            },
            "normalization": {
                "throughput_ref_bps": self.normalization.throughput_ref_bps,
                "size_ref_bits": self.normalization.size_ref_bits,
            },
        }

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        cfg = cls.from_dict(json.loads(path.read_text()))
        root = path.parent
        return cls(
            **{
                **cfg.__dict__,
                "manifest_paths": tuple(str(root / p) for p in cfg.manifest_paths),
                "viewport_paths": tuple(str(root / p) for p in cfg.viewport_paths),
                "trace_paths": tuple(str(root / p) for p in cfg.trace_paths),
            }
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class Observation:
    """Stacked per-user features plus the metadata needed to undo
    normalization. Layout per user: k past throughputs, k past decode
    times, k past transmit times, k past render times, one-hot last
    selection (L), buffer level, w future base-layer sizes, remaining
    GoP count."""

    features: np.ndarray  # shape (num_users, 4k + L + 1 + w + 1)
    metadata: dict

    @property
    def shape(self) -> tuple[int, int]:
        return self.features.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class EnvStep:
    observation: Observation
    rewards: tuple[float, ...]
    done: bool
    info: dict


def feature_width(history_len: int, num_layers: int, future_window: int) -> int:
    return 4 * history_len + num_layers + 1 + future_window + 1


class StreamingEnv:
    """One episodic environment instance over a loaded scenario."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.manifest_pool = [VideoManifest.load(p) for p in config.manifest_paths]
        self.viewport_pool = [ViewportTrace.load(p) for p in config.viewport_paths]
        self.trace_pool = [load_trace(p) for p in config.trace_paths]
        layer_counts = {m.num_layers for m in self.manifest_pool}
        if len(layer_counts) != 1:
            raise ConfigError("all manifests in a scenario must share num_layers")
        self.num_layers = layer_counts.pop()
        for vp in self.viewport_pool:
            for m in self.manifest_pool:
                if vp.grid_h != m.grid_h or vp.grid_v != m.grid_v:
                    raise ConfigError("viewport grid does not match manifest grid")
        self.lagrangian = config.lagrangian
        self._episode_stats: list[tuple[float, float]] = []  # (S total, V mean) per user-episode
        self._active = False
        self.sessions: list[SessionState] = []
        self.accumulators: list[QoeAccumulator] = []
        self.telemetry: list[dict] = []

    # -- episode lifecycle -------------------------------------------------

    def reset(self, episode_seed: int) -> Observation:
        pick_video = _stream(episode_seed, _STREAM_VIDEO)
        pick_trace = _stream(episode_seed, _STREAM_TRACE)
        pick_viewport = _stream(episode_seed, _STREAM_VIEWPORT)
        n = self.config.num_users
        self.manifests = [
            self._pick(self.manifest_pool, pick_video, self.config.randomize.video, i)
            for i in range(n)
        ]
        self.traces = [
            self._pick(self.trace_pool, pick_trace, self.config.randomize.trace, i)
            for i in range(n)
        ]
        self.viewports = [
            self._pick(self.viewport_pool, pick_viewport, self.config.randomize.viewport, i)
            for i in range(n)
        ]
        self.sessions = []
        self.accumulators = []
        for i, m in enumerate(self.manifests):
            cap = self.config.buffer_cap_s
            if cap is None:
                cap = 4.0 * m.gop_duration_s
            state = SessionState(
                user=i,
                num_gops=m.num_gops,
                buffer_cap_s=cap,
                history_len=self.config.history_len,
            )
            state.last_quality_db = video.gop_quality(m, 0, 1)
            self.sessions.append(state)
            acc = QoeAccumulator()
            acc.last_quality_db = state.last_quality_db
            self.accumulators.append(acc)
        self.telemetry = []
        self._active = True
        return self.observe()

    @staticmethod
    def _pick(pool: list, rng: np.random.Generator, randomized: bool, user: int):
        if randomized:
            return pool[int(rng.integers(0, len(pool)))]
        return pool[user % len(pool)]

    @property
    def done(self) -> bool:
        return bool(self.sessions) and all(s.complete for s in self.sessions)

    # -- stepping ----------------------------------------------------------

    def step(self, layers: list[int], placements: list[int]) -> EnvStep:
        if not self._active:
            raise EpisodeStateError("reset the environment before stepping")
        if self.done:
            raise EpisodeStateError("episode complete; reset to continue")
        self._validate_action(layers, placements)

        # edge capacity split across the users offloading this step
        requests = []
        chosen: dict[int, tuple[Placement, int, float]] = {}
        for s, layer, pl in zip(self.sessions, layers, placements):
            if s.complete:
                continue
            placement = Placement(pl)
            m = self.manifests[s.user]
            tiles = self.viewports[s.user].tiles_for(s.gop_cursor)
            d = video.segment_size(m, s.gop_cursor, tiles, layer)
            chosen[s.user] = (placement, layer, d)
            dec_w = d if placement != Placement.HEADSET_BOTH else 0.0
            rend_w = d / m.beta if placement == Placement.ECU_BOTH else 0.0
            requests.append((s.user, dec_w, rend_w))
        alloc = compute.ecu_allocate(requests, self.config.profile)

        rewards = []
        timings: list[StepTiming | None] = []
        for s in self.sessions:
            if s.complete:
                rewards.append(0.0)
                timings.append(None)
                continue
            placement, layer, _ = chosen[s.user]
            m = self.manifests[s.user]
            gop = s.gop_cursor
            tiles = self.viewports[s.user].tiles_for(gop)
            timing = playback.prepare_gop(
                s, placement, layer, m, tiles, self.config.profile, alloc, self.traces[s.user]
            )
            timing = playback.step_user(s, timing, m.gop_duration_s)
            q = video.gop_quality(m, gop, layer)
            acc = self.accumulators[s.user]
            before = acc.copy()
            acc.add_gop(q, timing.stall_s)
            rewards.append(qoe.step_reward(before, acc, self.lagrangian))
            s.record(timing, layer)
            s.last_quality_db = q
            timings.append(timing)
            self.telemetry.append(playback.telemetry_row(s, gop, placement, layer, timing, q))

        done = self.done
        if done:
            for acc in self.accumulators:
                v = qoe.quality_variation(acc) if acc.gop_count >= 2 else 0.0
                self._episode_stats.append((acc.stall_sum_s, v))
        info = {
            "timings": [
                None
                if t is None
                else {
                    "decode_s": t.decode_s,
                    "render_s": t.render_s,
                    "transmit_s": t.transmit_s,
                    "wait_s": t.wait_s,
                    "stall_s": t.stall_s,
                    "segment_bits": t.segment_bits,
                    "payload_bits": t.payload_bits,
                    "mean_throughput_bps": t.mean_throughput_bps,
                }
                for t in timings
            ],
            "accumulators": [
                {
                    "quality_sum_db": a.quality_sum_db,
                    "variation_sum_db": a.variation_sum_db,
                    "stall_sum_s": a.stall_sum_s,
                    "gop_count": a.gop_count,
                }
                for a in self.accumulators
            ],
            "multipliers": {"mu0": self.lagrangian.mu0, "mu1": self.lagrangian.mu1},
        }
        return EnvStep(self.observe(), tuple(rewards), done, info)

    def _validate_action(self, layers: list[int], placements: list[int]) -> None:
        n = self.config.num_users
        if len(layers) != n or len(placements) != n:
            raise ActionError(f"action must carry {n} layers and {n} placements")
        for layer in layers:
            if not isinstance(layer, (int, np.integer)) or not 1 <= layer <= self.num_layers:
                raise ActionError(f"layer {layer!r} out of range [1, {self.num_layers}]")
        for pl in placements:
            if not isinstance(pl, (int, np.integer)) or not 0 <= pl <= 2:
                raise ActionError(f"placement {pl!r} out of range [0, 2]")

    # -- observation -------------------------------------------------------

    def observe(self) -> Observation:
        if not self._active:
            raise EpisodeStateError("reset the environment before observing")
        cfg = self.config
        k = cfg.history_len
        w = cfg.future_window
        width = feature_width(k, self.num_layers, w)
        feats = np.zeros((cfg.num_users, width))
        norm = cfg.normalization
        for i, s in enumerate(self.sessions):
            m = self.manifests[i]
            dt = m.gop_duration_s
            if s.complete:
                continue  # terminal padding: all-zero row
            col = 0
            for hist, scale in (
                (s.throughput_hist, norm.throughput_ref_bps),
                (s.decode_hist, dt),
                (s.transmit_hist, dt),
                (s.render_hist, dt),
            ):
                vals = np.array(hist, dtype=float) / scale
                feats[i, col + k - len(vals) : col + k] = vals
                col += k
            if s.selection_hist:
                feats[i, col + s.selection_hist[-1] - 1] = 1.0
            col += self.num_layers
            feats[i, col] = s.buffer_s / s.buffer_cap_s
            col += 1
            tiles_now = self.viewports[i].tiles_for(s.gop_cursor)
            for j in range(w):
                gop = s.gop_cursor + j
                if gop < m.num_gops:
                    feats[i, col + j] = (
                        video.segment_size(m, gop, tiles_now, 1) / norm.size_ref_bits
                    )
            col += w
            feats[i, col] = (m.num_gops - s.gop_cursor) / m.num_gops
        metadata = {
            "num_users": cfg.num_users,
            "history_len": k,
            "num_layers": self.num_layers,
            "future_window": w,
            "throughput_ref_bps": norm.throughput_ref_bps,
            "size_ref_bits": norm.size_ref_bits,
            "gop_duration_s": [m.gop_duration_s for m in self.manifests],
            "buffer_cap_s": [s.buffer_cap_s for s in self.sessions],
            "num_gops": [m.num_gops for m in self.manifests],
        }
        return Observation(features=feats, metadata=metadata)

    # -- multipliers -------------------------------------------------------

    def update_multipliers_epoch(self) -> tuple[float, float]:
        """Apply one multiplier step from the mean stall total and mean
        quality variation over all episodes completed since the previous
        call."""
        if not self._episode_stats:
            raise EpisodeStateError("no completed episodes since the last multiplier update")
        stalls = [s for s, _ in self._episode_stats]
        variations = [v for _, v in self._episode_stats]
        self.lagrangian = qoe.update_multipliers(
            self.lagrangian,
            float(np.mean(stalls)),
            float(np.mean(variations)),
        )
        self._episode_stats = []
        return self.lagrangian.mu0, self.lagrangian.mu1

    # -- baseline support ----------------------------------------------------

    def action_context(self) -> list[dict]:
        """Per-user decision context for deterministic policies: per-layer
        segment sizes of the pending GoP, buffer level, and the most
        recent observed throughput."""
        out = []
        for i, s in enumerate(self.sessions):
            if s.complete:
                out.append({"complete": True})
                continue
            m = self.manifests[i]
            tiles = self.viewports[i].tiles_for(s.gop_cursor)
            sizes = [
                video.segment_size(m, s.gop_cursor, tiles, layer)
                for layer in range(1, m.num_layers + 1)
            ]
            out.append(
                {
                    "complete": False,
                    "layer_sizes_bits": sizes,
                    "buffer_s": s.buffer_s,
                    "last_throughput_bps": s.throughput_hist[-1] if s.throughput_hist else 0.0,
                    "beta": m.beta,
                    "alpha": m.alpha,
                    "num_layers": m.num_layers,
                }
            )
        return out


def _stream(episode_seed: int, stream_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=[episode_seed, stream_id]))
