"""Protocol-level tests of the bridge server, driven in process through
StringIO pipes; the out-of-process client lives in frontend/ with its own
parity suite."""

import io
import json

import numpy as np

from tokenmark import Message, TokenDistribution, WatermarkConfig, detect, watermark_step
from tokenmark.bridge import BridgeServer, serve

CONFIG = {
    "secret_key": "0123456789abcdef0123456789abcdef",
    "vocab_size": 32,
    "message_bits": 16,
    "segment_bits": 8,
    "num_segments": 2,
    "num_layers": 3,
    "context_window": 2,
    "sampling_seed": 0,
}


def run_session(lines):
    stdin = io.StringIO("\n".join(lines) + "\n")
    stdout = io.StringIO()
    code = serve(stdin=stdin, stdout=stdout)
    return code, [json.loads(line) for line in stdout.getvalue().splitlines()]


class TestHandshake:
    def test_good_handshake(self):
        code, replies = run_session([json.dumps({"hello": 1})])
        assert code == 0
        assert replies == [{"hello": 1}]

    def test_version_mismatch_clean_shutdown(self):
        code, replies = run_session([json.dumps({"hello": 2}), json.dumps({"op": "open"})])
        assert code == 0
        assert replies[0]["error"]["kind"] == "Handshake"
        assert len(replies) == 1  # nothing after shutdown

    def test_garbage_first_line(self):
        code, replies = run_session(["not json"])
        assert code == 0
        assert replies[0]["error"]["kind"] == "Handshake"


class TestOps:
    def open_request(self):
        return {"op": "open", "config": CONFIG, "message_hex": "a55a"}

    def test_open_reweight_parity(self):
        server = BridgeServer()
        sid = server.handle(self.open_request())["session"]
        rng = np.random.Generator(np.random.PCG64(0))
        cfg = WatermarkConfig.from_dict(CONFIG)
        message = Message.from_hex("a55a", 16)
        for step in range(20):
            probs = rng.dirichlet(np.full(32, 0.8))
            context = rng.integers(0, 32, size=rng.integers(0, 5)).tolist()
            wire = json.loads(json.dumps({"probs": probs.tolist(), "context": context}))
            reply = server.handle({"op": "reweight", "session": sid, **wire})
            direct = watermark_step(
                TokenDistribution(np.array(wire["probs"])), wire["context"], message, cfg
            )
            np.testing.assert_allclose(reply["probs"], direct.probs, atol=1e-9)

    def test_detect_parity_and_empty(self):
        server = BridgeServer()
        sid = server.handle(self.open_request())["session"]
        cfg = WatermarkConfig.from_dict(CONFIG)
        rng = np.random.Generator(np.random.PCG64(1))
        tokens = rng.integers(0, 32, size=60).tolist()
        reply = server.handle({"op": "detect", "session": sid, "tokens": tokens})
        direct = detect(tokens, cfg)
        assert reply["bits_hex"] == direct.bits_hex
        assert reply["margins"] == direct.margins.tolist()

        empty = server.handle({"op": "detect", "session": sid, "tokens": []})
        assert empty["bits_hex"] == "0000"
        assert all(m == 0.0 for m in empty["margins"])

    def test_unknown_session(self):
        server = BridgeServer()
        reply = server.handle({"op": "reweight", "session": "s99", "probs": [], "context": []})
        assert reply["error"]["kind"] == "NoSession"

    def test_unknown_op(self):
        server = BridgeServer()
        assert server.handle({"op": "frobnicate"})["error"]["kind"] == "UnknownOp"

    def test_bad_config_reports_kind(self):
        bad = dict(CONFIG, secret_key="00")
        reply = BridgeServer().handle({"op": "open", "config": bad, "message_hex": "a55a"})
        assert reply["error"]["kind"] == "KeyTooShort"

    def test_close_frees_session(self):
        server = BridgeServer()
        sid = server.handle(self.open_request())["session"]
        assert server.handle({"op": "close", "session": sid}) == {"closed": sid}
        reply = server.handle({"op": "detect", "session": sid, "tokens": []})
        assert reply["error"]["kind"] == "NoSession"


class TestLineLoop:
    def test_malformed_line_keeps_session_alive(self):
        open_line = json.dumps({"op": "open", "config": CONFIG, "message_hex": "a55a"})
        code, replies = run_session([
            json.dumps({"hello": 1}),
            open_line,
            "{ruined json",
            json.dumps({"op": "detect", "session": "s1", "tokens": [1, 2, 3]}),
        ])
        assert code == 0
        assert replies[0] == {"hello": 1}
        assert replies[1] == {"session": "s1"}
        assert replies[2]["error"]["kind"] == "Parse"
        assert "bits_hex" in replies[3]

    def test_blank_lines_skipped(self):
        code, replies = run_session([json.dumps({"hello": 1}), "", "   "])
        assert replies == [{"hello": 1}]
