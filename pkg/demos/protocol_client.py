"""Drive the environment through the line protocol exactly as an
external learner would: spawn `sim serve`, send JSON requests over
stdio, and print the rewards coming back."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from vrsim.cli import main as sim

workdir = Path(tempfile.mkdtemp(prefix="vrsim-demo-"))
sim(["gen", "--videos", "2", "--gops", "6", "--layers", "3", "--seed", "3",
     "--out", str(workdir)])

server = subprocess.Popen(
    [sys.executable, "-m", "vrsim.cli", "serve", "--config", str(workdir / "scenario.json")],
    stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True,
)


def call(msg):
    server.stdin.write(json.dumps(msg) + "\n")
    server.stdin.flush()
    return json.loads(server.stdout.readline())


resp = call({"cmd": "reset", "seed": 1})
n, width = resp["obs"]["shape"]
print(f"observation: {n} users x {width} features")

done = False
step = 0
while not done:
    resp = call({"cmd": "step", "layers": [2] * n, "placements": [1] * n})
    print(f"step {step}: rewards={['%.2f' % r for r in resp['rewards']]} done={resp['done']}")
    done = resp["done"]
    step += 1

resp = call({"cmd": "update_multipliers"})
print(f"multipliers after epoch: mu0={resp['mu0']:.3f} mu1={resp['mu1']:.3f}")
call({"cmd": "close"})
server.wait(timeout=5)
