"""Line-delimited JSON protocol server over stdin/stdout.

Lets an external inference loop delegate per-step reweighting and post-hoc
detection to this process. Strictly request/response, one UTF-8 JSON object
per line.

Handshake: the client's first line must be {"hello": 1}; the server answers
{"hello": 1}. Anything else gets an error object and a clean shutdown.

Requests after the handshake:
  {"op": "open", "config": {...}, "message_hex": "..."}   -> {"session": id}
  {"op": "reweight", "session": id, "probs": [...], "context": [...]}
                                                          -> {"probs": [...]}
  {"op": "detect", "session": id, "tokens": [...]}        -> decoded message
  {"op": "close", "session": id}                          -> {"closed": id}

Failures never kill the session: the server answers
{"error": {"kind": ..., "detail": ...}} and keeps reading. Floats ride
through json's shortest round-trip decimal form, so reweight responses are
numerically identical to the in-process values.
"""

from __future__ import annotations

import json
import sys
from typing import IO

from .detection import detect
from .generation import watermark_step
from .types import Message, TokenDistribution, WatermarkConfig, WatermarkError, validate_config

PROTOCOL_VERSION = 1


def _error(kind: str, detail: str = "") -> dict:
    return {"error": {"kind": kind, "detail": detail}}


class BridgeServer:
    """One session registry per server process; sessions are cheap."""

    def __init__(self):
        self._sessions: dict[str, tuple[WatermarkConfig, Message]] = {}
        self._next_id = 0

    def handle(self, request: dict) -> dict:
        if not isinstance(request, dict):
            return _error("Parse", "request must be a JSON object")
        op = request.get("op")
        try:
            if op == "open":
                return self._open(request)
            if op == "reweight":
                return self._reweight(request)
            if op == "detect":
                return self._detect(request)
            if op == "close":
                return self._close(request)
        except WatermarkError as e:
            return _error(e.kind, str(e))
        except (KeyError, TypeError, ValueError) as e:
            return _error("BadRequest", str(e))
        return _error("UnknownOp", f"op={op!r}")

    def _session(self, request: dict) -> tuple[WatermarkConfig, Message]:
        sid = request.get("session")
        if sid not in self._sessions:
            raise _NoSession(sid)
        return self._sessions[sid]

    def _open(self, request: dict) -> dict:
        cfg = validate_config(WatermarkConfig.from_dict(request["config"]))
        message = Message.from_hex(request["message_hex"], cfg.message_bits)
        self._next_id += 1
        sid = f"s{self._next_id}"
        self._sessions[sid] = (cfg, message)
        return {"session": sid}

    def _reweight(self, request: dict) -> dict:
        cfg, message = self._session(request)
        dist = TokenDistribution(request["probs"])
        context = [int(t) for t in request["context"]]
        out = watermark_step(dist, context, message, cfg)
        return {"probs": out.probs.tolist()}

    def _detect(self, request: dict) -> dict:
        cfg, _ = self._session(request)
        tokens = [int(t) for t in request["tokens"]]
        return detect(tokens, cfg).to_dict()

    def _close(self, request: dict) -> dict:
        sid = request.get("session")
        if sid not in self._sessions:
            raise _NoSession(sid)
        del self._sessions[sid]
        return {"closed": sid}


class _NoSession(WatermarkError):
    def __init__(self, sid):
        super().__init__(f"unknown session {sid!r}")

    @property
    def kind(self) -> str:
        return "NoSession"


def serve(stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> int:
    """Run the request loop until EOF. Returns the process exit code."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def reply(obj: dict) -> None:
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    first = stdin.readline()
    if not first:
        return 0
    try:
        hello = json.loads(first)
    except json.JSONDecodeError as e:
        reply(_error("Handshake", f"first line must be a hello object: {e}"))
        return 0
    if hello != {"hello": PROTOCOL_VERSION}:
        reply(_error("Handshake", f"expected {{\"hello\": {PROTOCOL_VERSION}}}"))
        return 0
    reply({"hello": PROTOCOL_VERSION})

    server = BridgeServer()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as e:
            reply(_error("Parse", str(e)))
            continue
        reply(server.handle(request))
    return 0
