"""Server side of the scorer wire protocol.

Newline-delimited JSON frames. Requests: {"id": int, "type": str,
"payload": object}. Responses echo the id with the same type on success or
type "error" with {"code", "message"}. The server greets each connection
with {"type": "hello", "payload": {"protocol_version", "capabilities"}}.
Any line that cannot be parsed into a valid request - bad JSON, missing or
unknown type, non-integer id, wrong payload shape - is answered with an
error frame; the connection is never dropped because of peer input.
"""

from __future__ import annotations

import json

PROTOCOL_VERSION = 1
MASK = "[MASK]"
CAPABILITIES = ("verify", "fluency", "saliency", "propose_token", "score_entities")


class RequestError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def encode(frame: dict) -> str:
    return json.dumps(frame, sort_keys=True, separators=(",", ":"))


def hello_frame() -> dict:
    return {
        "type": "hello",
        "payload": {"protocol_version": PROTOCOL_VERSION, "capabilities": list(CAPABILITIES)},
    }


def error_frame(rid, code: str, message: str) -> dict:
    return {"id": rid, "type": "error", "payload": {"code": code, "message": message[:200]}}


def parse_request(line: str) -> tuple[int, str, dict]:
    """Validate one raw line into (id, type, payload) or raise RequestError."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RequestError("bad_json", exc.msg) from exc
    if not isinstance(obj, dict):
        raise RequestError("bad_frame", "frame must be a JSON object")
    rid = obj.get("id")
    if not isinstance(rid, int) or isinstance(rid, bool):
        raise RequestError("bad_id", "id must be an integer")
    rtype = obj.get("type")
    if rtype not in CAPABILITIES:
        raise RequestError("unknown_type", f"unsupported type {rtype!r}")
    payload = obj.get("payload")
    if not isinstance(payload, dict):
        raise RequestError("bad_payload", "payload must be an object")
    return rid, rtype, payload


def want_str(payload: dict, key: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str):
        raise RequestError("bad_payload", f"{key} must be a string")
    return value


def want_str_list(payload: dict, key: str, default=None) -> list[str]:
    value = payload.get(key, default)
    if value is None or not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise RequestError("bad_payload", f"{key} must be a list of strings")
    return value
