"""Evaluate the deterministic baseline policies on a synthetic scenario
and print paper-style metric tables (PSNR, rebuffering, quality
variation, weighted QoE)."""

import tempfile
from pathlib import Path

from vrsim import baselines
from vrsim.cli import main as sim
from vrsim.env import ScenarioConfig

workdir = Path(tempfile.mkdtemp(prefix="vrsim-demo-"))
sim(["gen", "--videos", "3", "--gops", "30", "--layers", "5", "--seed", "7",
     "--users", "4", "--out", str(workdir)])
config = ScenarioConfig.load(workdir / "scenario.json")

for name in baselines.NAMED_POLICIES:
    policy = baselines.make_policy(name, seed=config.seed)
    report = baselines.evaluate(policy, config, episodes=10)
    report.policy = name
    print()
    print(report.table())
