"""Command line entry point: run baselines, serve the protocol,
generate synthetic assets, validate configs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import baselines, network, protocol, video
from .env import ScenarioConfig, StreamingEnv


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a baseline policy and write metrics")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--policy", required=True, choices=baselines.NAMED_POLICIES)
    p_run.add_argument("--episodes", type=int, default=1)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")

    p_serve = sub.add_parser("serve", help="serve the environment protocol")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--tcp", type=int, default=None, help="TCP port (default: stdio)")

    p_gen = sub.add_parser("gen", help="generate synthetic scenario assets")
    p_gen.add_argument("--videos", type=int, default=3)
    p_gen.add_argument("--gops", type=int, default=60)
    p_gen.add_argument("--layers", type=int, default=7)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--users", type=int, default=2)
    p_gen.add_argument("--grid", type=int, nargs=2, default=(8, 8), metavar=("H", "V"))
    p_gen.add_argument("--gop-duration", type=float, default=1.0)

    p_val = sub.add_parser("validate", help="check a config and its assets")
    p_val.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "gen":
            return _cmd_gen(args)
        return _cmd_validate(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _cmd_run(args) -> int:
    config = ScenarioConfig.load(args.config)
    policy = baselines.make_policy(args.policy, seed=config.seed)
    report = baselines.evaluate(
        policy,
        config,
        episodes=args.episodes,
        base_seed=args.seed,
        out_dir=args.out,
    )
    print(report.table())
    return 0


def _cmd_serve(args) -> int:
    config = ScenarioConfig.load(args.config)
    if args.tcp is not None:
        protocol.serve_tcp(lambda: StreamingEnv(config), port=args.tcp)
    else:
        protocol.serve_stdio(StreamingEnv(config))
    return 0


def _cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    grid_h, grid_v = args.grid
    manifests = []
    for i in range(args.videos):
        m = video.generate_manifest(
            rng,
            video_id=f"video-{i:02d}",
            num_gops=args.gops,
            grid_h=grid_h,
            grid_v=grid_v,
            num_layers=args.layers,
            gop_duration_s=args.gop_duration,
        )
        name = f"manifest_{i:02d}.json"
        m.save(out / name)
        manifests.append(name)
    viewports = []
    traces = []
    for i in range(max(args.users, args.videos)):
        vp = video.generate_viewport_trace(rng, grid_h, grid_v, args.gops)
        vp_name = f"viewport_{i:02d}.json"
        vp.save(out / vp_name)
        viewports.append(vp_name)
        tr = network.generate_trace(rng, duration_s=2.0 * args.gops * args.gop_duration)
        tr_name = f"trace_{i:02d}.txt"
        network.save_trace(tr, out / tr_name)
        traces.append(tr_name)
    config = ScenarioConfig(
        num_users=args.users,
        manifest_paths=tuple(manifests),
        viewport_paths=tuple(viewports),
        trace_paths=tuple(traces),
        seed=args.seed,
    )
    config.save(out / "scenario.json")
    print(f"wrote {args.videos} manifests, {len(traces)} traces, scenario.json to {out}")
    return 0


def _cmd_validate(args) -> int:
    config = ScenarioConfig.load(args.config)
    env = StreamingEnv(config)
    obs = env.reset(config.seed)
    print(
        f"config ok: {config.num_users} users, {len(env.manifest_pool)} manifests, "
        f"{len(env.trace_pool)} traces, {len(env.viewport_pool)} viewports, "
        f"observation shape {obs.shape[0]}x{obs.shape[1]}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
