"""Single-user walkthrough: one session stepping GoP by GoP.

Builds a tiny synthetic video and a two-rate link, then prints the
decode/render/transmit breakdown, stall, wait, and buffer level for each
GoP under headset-only and edge-only placements.
"""

import numpy as np

from vrsim import compute, playback, video
from vrsim.compute import ComputeProfile, EcuAllocation, Placement
from vrsim.network import ThroughputTrace
from vrsim.playback import SessionState

rng = np.random.default_rng(0)
manifest = video.generate_manifest(
    rng, "walkthrough", num_gops=8, grid_h=4, grid_v=4, num_layers=3,
    tile_rate_range_bps=(0.5e6, 3e6),
)
viewport = video.generate_viewport_trace(rng, 4, 4, 8)
trace = ThroughputTrace(np.array([0.0, 4.0]), np.array([300e6, 60e6]), wraparound=True)
profile = ComputeProfile()

for placement in (Placement.HEADSET_BOTH, Placement.ECU_BOTH):
    print(f"\n=== placement: {placement.name} ===")
    print(f"{'m':>2} {'layer':>5} {'D [s]':>8} {'P [s]':>8} {'T [s]':>8} "
          f"{'stall':>7} {'wait':>6} {'buffer':>7} {'PSNR':>6}")
    state = SessionState(user=0, num_gops=8, buffer_cap_s=4.0)
    while not state.complete:
        gop = state.gop_cursor
        layer = 1 + gop % manifest.num_layers  # cycle through layers
        tiles = viewport.tiles_for(gop)
        d = video.segment_size(manifest, gop, tiles, layer)
        if placement == Placement.HEADSET_BOTH:
            alloc = EcuAllocation()
        else:
            alloc = compute.ecu_allocate([(0, d, d / manifest.beta)], profile)
        timing = playback.prepare_gop(
            state, placement, layer, manifest, tiles, profile, alloc, trace
        )
        timing = playback.step_user(state, timing, manifest.gop_duration_s)
        q = video.gop_quality(manifest, gop, layer)
        print(f"{gop:>2} {layer:>5} {timing.decode_s:8.4f} {timing.render_s:8.4f} "
              f"{timing.transmit_s:8.4f} {timing.stall_s:7.3f} {timing.wait_s:6.3f} "
              f"{state.buffer_s:7.3f} {q:6.2f}")
    print(f"total stall: {state.total_stall_s:.3f} s, wall clock: {state.clock_s:.3f} s")
