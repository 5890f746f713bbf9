import io
import json
from pathlib import Path

import numpy as np
import pytest

from vrsim.env import ScenarioConfig, StreamingEnv
from vrsim.protocol import PROTO_VERSION, ProtocolSession, encode, serve_stdio

from conftest import build_scenario

GOLDEN_DIR = Path(__file__).parent / "data" / "golden"


@pytest.fixture
def session(tmp_path):
    config = build_scenario(tmp_path / "scn", num_users=2, gops=4, layers=3)
    return ProtocolSession(StreamingEnv(config))


class TestCommands:
    def test_reset_returns_observation(self, session):
        resp = session.handle('{"cmd":"reset","seed":1}')
        assert resp["proto"] == PROTO_VERSION
        obs = resp["obs"]
        assert len(obs["data"]) == obs["shape"][0] * obs["shape"][1]
        assert obs["metadata"]["num_users"] == 2

    def test_step_roundtrip(self, session):
        session.handle('{"cmd":"reset","seed":1}')
        resp = session.handle('{"cmd":"step","layers":[1,2],"placements":[0,2]}')
        assert set(resp) == {"proto", "obs", "rewards", "done", "info"}
        assert len(resp["rewards"]) == 2
        assert resp["done"] is False

    def test_update_multipliers(self, session):
        session.handle('{"cmd":"reset","seed":1}')
        for _ in range(4):
            resp = session.handle('{"cmd":"step","layers":[1,1],"placements":[2,2]}')
        assert resp["done"] is True
        resp = session.handle('{"cmd":"update_multipliers"}')
        assert "mu0" in resp and "mu1" in resp

    def test_close(self, session):
        resp = session.handle('{"cmd":"close"}')
        assert resp["ok"] is True
        assert session.closed

    def test_serialize_parse_identity(self, session):
        session.handle('{"cmd":"reset","seed":3}')
        resp = session.handle('{"cmd":"step","layers":[2,2],"placements":[1,1]}')
        assert json.loads(encode(resp)) == resp


class TestErrors:
    @pytest.mark.parametrize(
        "line,code",
        [
            ("not json", "bad-json"),
            ("[1,2]", "bad-request"),
            ('{"seed":1}', "bad-request"),
            ('{"cmd":"launch"}', "bad-request"),
            ('{"cmd":"reset"}', "bad-request"),
            ('{"cmd":"reset","seed":"x"}', "bad-request"),
            ('{"cmd":"step","layers":[1,2]}', "bad-request"),
        ],
    )
    def test_error_codes(self, session, line, code):
        resp = session.handle(line)
        assert resp["error"]["code"] == code

    def test_step_before_reset(self, session):
        resp = session.handle('{"cmd":"step","layers":[1,1],"placements":[2,2]}')
        assert resp["error"]["code"] == "bad-state"

    def test_malformed_step_preserves_state(self, session):
        session.handle('{"cmd":"reset","seed":1}')
        good = session.handle('{"cmd":"step","layers":[1,1],"placements":[2,2]}')
        bad = session.handle('{"cmd":"step","layers":[99,1],"placements":[2,2]}')
        assert bad["error"]["code"] == "bad-action"
        # the episode continues exactly where it left off
        after = session.handle('{"cmd":"step","layers":[1,1],"placements":[2,2]}')
        assert after["info"]["accumulators"][0]["gop_count"] == 2
        assert good["done"] is False


class TestGoldenTranscript:
    def test_replay_matches_recorded_responses(self):
        config = ScenarioConfig.load(GOLDEN_DIR / "scenario.json")
        session = ProtocolSession(StreamingEnv(config))
        lines = (GOLDEN_DIR / "transcript.jsonl").read_text().splitlines()
        assert lines and len(lines) % 2 == 0
        for request, expected in zip(lines[::2], lines[1::2]):
            assert session.handle_line(request) == expected


class TestStdioServer:
    def test_serves_until_close(self, tmp_path):
        config = build_scenario(tmp_path / "scn", num_users=1, gops=2, layers=2)
        stdin = io.StringIO(
            '{"cmd":"reset","seed":1}\n'
            "\n"
            '{"cmd":"step","layers":[1],"placements":[2]}\n'
            '{"cmd":"close"}\n'
            '{"cmd":"reset","seed":2}\n'  # after close: ignored
        )
        stdout = io.StringIO()
        serve_stdio(StreamingEnv(config), stdin=stdin, stdout=stdout)
        out = [json.loads(l) for l in stdout.getvalue().splitlines()]
        assert len(out) == 3
        assert "obs" in out[0] and "rewards" in out[1] and out[2]["ok"] is True
