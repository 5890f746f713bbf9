"""Multi-layer tiled 360-degree video model.

Units: sizes in bits, rates in bits/second, durations in seconds,
quality in dB. A video holds M GoPs of fixed duration; each GoP is split
into a grid_h x grid_v tile grid, and every tile carries a base layer
plus enhancement layers. Layer rates are stored incrementally (bits/s
added by each layer) and summed cumulatively when sizing a selection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MANIFEST_VERSION = 1
VIEWPORT_VERSION = 1


class ManifestError(ValueError):
    """Raised when a manifest or viewport trace violates its invariants."""


@dataclass(frozen=True)
class VideoManifest:
    video_id: str
    num_gops: int
    gop_duration_s: float
    grid_h: int
    grid_v: int
    num_layers: int
    # incremental rates, shape (num_gops, num_tiles, num_layers)
    layer_rate_bps: np.ndarray
    # per-GoP per-layer distortion, shape (num_gops, num_layers)
    layer_mse: np.ndarray
    beta: float
    alpha: float

    @property
    def num_tiles(self) -> int:
        return self.grid_h * self.grid_v

    def __post_init__(self) -> None:
        rates = np.asarray(self.layer_rate_bps, dtype=float)
        mse = np.asarray(self.layer_mse, dtype=float)
        object.__setattr__(self, "layer_rate_bps", rates)
        object.__setattr__(self, "layer_mse", mse)
        if self.num_gops <= 0 or self.grid_h <= 0 or self.grid_v <= 0:
            raise ManifestError("num_gops and grid dimensions must be positive")
        if self.num_layers <= 0:
            raise ManifestError("num_layers must be positive")
        if self.gop_duration_s <= 0:
            raise ManifestError("gop_duration_s must be positive")
        if rates.shape != (self.num_gops, self.num_tiles, self.num_layers):
            raise ManifestError(
                f"layer_rate_bps shape {rates.shape} != "
                f"{(self.num_gops, self.num_tiles, self.num_layers)}"
            )
        if mse.shape != (self.num_gops, self.num_layers):
            raise ManifestError(
                f"layer_mse shape {mse.shape} != {(self.num_gops, self.num_layers)}"
            )
        # cumulative rate must be strictly increasing in the layer index,
        # so every incremental rate has to be positive
        if not np.all(rates > 0):
            raise ManifestError("all incremental layer rates must be positive")
        if not np.all(mse > 0):
            raise ManifestError("layer_mse must be positive")
        if self.num_layers > 1 and not np.all(np.diff(mse, axis=1) < 0):
            raise ManifestError("layer_mse must be strictly decreasing in the layer index")
        if not 0 < self.beta < 1:
            raise ManifestError("beta must lie in (0, 1)")
        if self.alpha < 2:
            raise ManifestError("alpha must be >= 2")

    def to_dict(self) -> dict:
        return {
            "manifest-version": MANIFEST_VERSION,
            "video_id": self.video_id,
            "num_gops": self.num_gops,
            "gop_duration_s": self.gop_duration_s,
            "grid": [self.grid_h, self.grid_v],
            "num_layers": self.num_layers,
            "beta": self.beta,
            "alpha": self.alpha,
            "layer_rate_bps": self.layer_rate_bps.tolist(),
            "layer_mse": self.layer_mse.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "VideoManifest":
        if obj.get("manifest-version") != MANIFEST_VERSION:
            raise ManifestError("unsupported or missing manifest-version")
        grid = obj["grid"]
        return cls(
            video_id=obj["video_id"],
            num_gops=int(obj["num_gops"]),
            gop_duration_s=float(obj["gop_duration_s"]),
            grid_h=int(grid[0]),
            grid_v=int(grid[1]),
            num_layers=int(obj["num_layers"]),
            layer_rate_bps=np.asarray(obj["layer_rate_bps"], dtype=float),
            layer_mse=np.asarray(obj["layer_mse"], dtype=float),
            beta=float(obj["beta"]),
            alpha=float(obj["alpha"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "VideoManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ViewportTrace:
    """Per-GoP sets of visible tile indices for one user.

    Shorter traces than the video repeat cyclically.
    """

    grid_h: int
    grid_v: int
    tiles_per_gop: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self) -> None:
        n = self.grid_h * self.grid_v
        if not self.tiles_per_gop:
            raise ManifestError("viewport trace must cover at least one GoP")
        normalized = []
        for tiles in self.tiles_per_gop:
            tiles = tuple(sorted(set(int(t) for t in tiles)))
            if not tiles:
                raise ManifestError("viewport must contain at least one tile")
            if tiles[0] < 0 or tiles[-1] >= n:
                raise ManifestError(f"tile index out of range for {self.grid_h}x{self.grid_v} grid")
            normalized.append(tiles)
        object.__setattr__(self, "tiles_per_gop", tuple(normalized))

    def tiles_for(self, gop: int) -> tuple[int, ...]:
        return self.tiles_per_gop[gop % len(self.tiles_per_gop)]

    def to_dict(self) -> dict:
        return {
            "viewport-version": VIEWPORT_VERSION,
            "grid": [self.grid_h, self.grid_v],
            "tiles_per_gop": [list(t) for t in self.tiles_per_gop],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ViewportTrace":
        if obj.get("viewport-version") != VIEWPORT_VERSION:
            raise ManifestError("unsupported or missing viewport-version")
        grid = obj["grid"]
        return cls(
            grid_h=int(grid[0]),
            grid_v=int(grid[1]),
            tiles_per_gop=tuple(tuple(t) for t in obj["tiles_per_gop"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ViewportTrace":
        return cls.from_dict(json.loads(Path(path).read_text()))


def segment_size(
    manifest: VideoManifest,
    gop: int,
    viewport_tiles: Sequence[int],
    layer_count: int,
) -> float:
    """Compressed size in bits of one GoP restricted to the viewport.

    Sums the cumulative per-tile rate through ``layer_count`` layers over
    every viewport tile and multiplies by the GoP duration.
    """
    _check_gop(manifest, gop)
    _check_layer(manifest, layer_count)
    tiles = list(viewport_tiles)
    if not tiles:
        raise ManifestError("viewport must contain at least one tile")
    if min(tiles) < 0 or max(tiles) >= manifest.num_tiles:
        raise IndexError("viewport tile index out of range")
    rate = manifest.layer_rate_bps[gop, tiles, :layer_count].sum()
    return manifest.gop_duration_s * float(rate)


def decoded_size(manifest: VideoManifest, d_bits: float) -> float:
    """Size in bits after decoding: the compressed size divided by beta."""
    if d_bits < 0:
        raise ValueError("size must be nonnegative")
    return d_bits / manifest.beta


def rendered_size(manifest: VideoManifest, d_bits: float) -> float:
    """Size in bits after decoding and rendering: alpha * d / beta."""
    if d_bits < 0:
        raise ValueError("size must be nonnegative")
    return manifest.alpha * d_bits / manifest.beta


def gop_quality(manifest: VideoManifest, gop: int, layer_count: int) -> float:
    """PSNR in dB of one GoP at the given layer count: 10*log10(255^2/MSE)."""
    _check_gop(manifest, gop)
    _check_layer(manifest, layer_count)
    mse = float(manifest.layer_mse[gop, layer_count - 1])
    if mse <= 0:
        raise ValueError("MSE must be positive")
    return 10.0 * math.log10(255.0**2 / mse)


def _check_gop(manifest: VideoManifest, gop: int) -> None:
    if not 0 <= gop < manifest.num_gops:
        raise IndexError(f"gop {gop} out of range [0, {manifest.num_gops})")


def _check_layer(manifest: VideoManifest, layer_count: int) -> None:
    if not 1 <= layer_count <= manifest.num_layers:
        raise IndexError(f"layer_count {layer_count} out of range [1, {manifest.num_layers}]")


def generate_manifest(
    rng: np.random.Generator,
    video_id: str,
    num_gops: int = 60,
    grid_h: int = 8,
    grid_v: int = 8,
    num_layers: int = 7,
    gop_duration_s: float = 1.0,
    beta: float = 0.5,
    alpha: float = 2.0,
    tile_rate_range_bps: tuple[float, float] = (0.2e6, 2.0e6),
) -> VideoManifest:
    """Synthesize a manifest whose invariants hold by construction.

    Incremental layer rates are independent positive draws, and the MSE
    table is a per-GoP decreasing geometric sequence.
    """
    lo, hi = tile_rate_range_bps
    rates = rng.uniform(lo, hi, size=(num_gops, grid_h * grid_v, num_layers))
    mse0 = rng.uniform(40.0, 160.0, size=(num_gops, 1))
    ratio = rng.uniform(0.35, 0.7, size=(num_gops, 1))
    mse = mse0 * ratio ** np.arange(num_layers)
    return VideoManifest(
        video_id=video_id,
        num_gops=num_gops,
        gop_duration_s=gop_duration_s,
        grid_h=grid_h,
        grid_v=grid_v,
        num_layers=num_layers,
        layer_rate_bps=rates,
        layer_mse=mse,
        beta=beta,
        alpha=alpha,
    )


def generate_viewport_trace(
    rng: np.random.Generator,
    grid_h: int,
    grid_v: int,
    num_gops: int,
    span_h: int = 3,
    span_v: int = 3,
) -> ViewportTrace:
    """Random-walk viewport: a span_h x span_v block whose center drifts
    one tile at a time, wrapping horizontally and clamping vertically.
    """
    cx = int(rng.integers(0, grid_h))
    cy = int(rng.integers(0, grid_v))
    gops = []
    for _ in range(num_gops):
        cx = (cx + int(rng.integers(-1, 2))) % grid_h
        cy = min(grid_v - 1, max(0, cy + int(rng.integers(-1, 2))))
        tiles = set()
        for dy in range(-(span_v // 2), span_v // 2 + 1):
            y = min(grid_v - 1, max(0, cy + dy))
            for dx in range(-(span_h // 2), span_h // 2 + 1):
                x = (cx + dx) % grid_h
                tiles.add(y * grid_h + x)
        gops.append(tuple(sorted(tiles)))
    return ViewportTrace(grid_h=grid_h, grid_v=grid_v, tiles_per_gop=tuple(gops))
