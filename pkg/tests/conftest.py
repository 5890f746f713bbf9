from pathlib import Path

import numpy as np
import pytest

from vrsim.video import VideoManifest


def make_manifest(
    incremental_rates,
    mse=None,
    gop_duration_s=1.0,
    grid=(1, 1),
    beta=0.5,
    alpha=2.0,
    video_id="test",
):
    """Manifest from an explicit incremental-rate array of shape
    (gops, tiles, layers); MSE defaults to a valid geometric table."""
    rates = np.asarray(incremental_rates, dtype=float)
    num_gops, num_tiles, num_layers = rates.shape
    if mse is None:
        mse = 100.0 * 0.5 ** np.arange(num_layers) * np.ones((num_gops, 1))
    return VideoManifest(
        video_id=video_id,
        num_gops=num_gops,
        gop_duration_s=gop_duration_s,
        grid_h=grid[0],
        grid_v=grid[1],
        num_layers=num_layers,
        layer_rate_bps=rates,
        layer_mse=np.asarray(mse, dtype=float),
        beta=beta,
        alpha=alpha,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def build_scenario(
    root,
    num_users=2,
    gops=8,
    layers=3,
    grid=(4, 4),
    seed=0,
    constant_rate_bps=None,
    num_videos=2,
    **config_kwargs,
):
    """Write a small synthetic scenario (manifests, viewports, traces,
    config) under ``root`` and return the loaded ScenarioConfig."""
    import vrsim.network as network
    import vrsim.video as video
    from vrsim.env import ScenarioConfig

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    gen = np.random.default_rng(seed)
    manifests, viewports, traces = [], [], []
    for i in range(num_videos):
        m = video.generate_manifest(
            gen,
            video_id=f"v{i}",
            num_gops=gops,
            grid_h=grid[0],
            grid_v=grid[1],
            num_layers=layers,
            tile_rate_range_bps=(0.2e6, 1.5e6),
        )
        m.save(root / f"m{i}.json")
        manifests.append(f"m{i}.json")
        vp = video.generate_viewport_trace(gen, grid[0], grid[1], gops)
        vp.save(root / f"vp{i}.json")
        viewports.append(f"vp{i}.json")
        if constant_rate_bps is not None:
            tr = network.ThroughputTrace(
                np.array([0.0]), np.array([float(constant_rate_bps)]), wraparound=True
            )
        else:
            tr = network.generate_trace(gen, duration_s=30.0, mean_rate_bps=300e6)
        network.save_trace(tr, root / f"tr{i}.txt")
        traces.append(f"tr{i}.txt")
    config = ScenarioConfig(
        num_users=num_users,
        manifest_paths=tuple(manifests),
        viewport_paths=tuple(viewports),
        trace_paths=tuple(traces),
        seed=seed,
        **config_kwargs,
    )
    config.save(root / "scenario.json")
    return ScenarioConfig.load(root / "scenario.json")
