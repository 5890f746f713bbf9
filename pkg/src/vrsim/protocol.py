"""Newline-delimited JSON protocol for driving one environment instance.

Requests (one JSON object per line):
    {"cmd": "reset", "seed": <int>}
    {"cmd": "step", "layers": [...], "placements": [...]}
    {"cmd": "update_multipliers"}
    {"cmd": "close"}

Every response carries "proto": 1 and either the command's payload or
an "error" object with "code" and "message". Malformed input never
mutates the episode.
"""

from __future__ import annotations

import json
import socketserver
import sys

from .env import ActionError, EpisodeStateError, Observation, StreamingEnv

PROTO_VERSION = 1


def encode(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _obs_payload(obs: Observation) -> dict:
    return {
        "data": obs.features.ravel().tolist(),
        "shape": list(obs.shape),
        "metadata": obs.metadata,
    }


def _error(code: str, message: str) -> dict:
    return {"proto": PROTO_VERSION, "error": {"code": code, "message": message}}


class ProtocolSession:
    """Parses request lines against one environment and renders replies."""

    def __init__(self, env: StreamingEnv):
        self.env = env
        self.closed = False

    def handle_line(self, line: str) -> str:
        return encode(self.handle(line))

    def handle(self, line: str) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error("bad-json", str(exc))
        if not isinstance(msg, dict) or "cmd" not in msg:
            return _error("bad-request", "message must be an object with a 'cmd' field")
        cmd = msg["cmd"]
        try:
            if cmd == "reset":
                if "seed" not in msg or not isinstance(msg["seed"], int):
                    return _error("bad-request", "reset requires an integer 'seed'")
                obs = self.env.reset(msg["seed"])
                return {"proto": PROTO_VERSION, "obs": _obs_payload(obs)}
            if cmd == "step":
                layers = msg.get("layers")
                placements = msg.get("placements")
                if not isinstance(layers, list) or not isinstance(placements, list):
                    return _error("bad-request", "step requires 'layers' and 'placements' lists")
                step = self.env.step(layers, placements)
                return {
                    "proto": PROTO_VERSION,
                    "obs": _obs_payload(step.observation),
                    "rewards": list(step.rewards),
                    "done": step.done,
                    "info": step.info,
                }
            if cmd == "update_multipliers":
                mu0, mu1 = self.env.update_multipliers_epoch()
                return {"proto": PROTO_VERSION, "mu0": mu0, "mu1": mu1}
            if cmd == "close":
                self.closed = True
                return {"proto": PROTO_VERSION, "ok": True}
        except ActionError as exc:
            return _error("bad-action", str(exc))
        except EpisodeStateError as exc:
            return _error("bad-state", str(exc))
        return _error("bad-request", f"unknown command {cmd!r}")


def serve_stdio(env: StreamingEnv, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    session = ProtocolSession(env)
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(session.handle_line(line) + "\n")
        stdout.flush()
        if session.closed:
            break


def serve_tcp(env_factory, port: int, host: str = "127.0.0.1") -> None:
    """Serve one environment per connection; blocks until interrupted."""

    class Handler(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            session = ProtocolSession(env_factory())
            for raw in self.rfile:
                line = raw.decode("utf-8")
                if not line.strip():
                    continue
                self.wfile.write((session.handle_line(line) + "\n").encode("utf-8"))
                if session.closed:
                    break

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server((host, port), Handler) as server:
        print(f"listening on {host}:{server.server_address[1]}", flush=True)
        server.serve_forever()
