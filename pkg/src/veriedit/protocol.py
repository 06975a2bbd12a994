"""Scorer wire protocol: newline-delimited JSON frames.

Frames flow over a TCP socket or a child process's standard streams. Every
request is one line {"id": int, "type": str, "payload": {...}}; the server
answers with a frame echoing the id, either of the same type (success) or
of type "error" with {"code", "message"} in the payload. On connection the
server first sends a handshake frame {"type": "hello", "payload":
{"protocol_version", "capabilities"}}. One request is in flight per
connection at a time.

Request payloads:
  verify         {"claim": str, "evidence": [str]}          -> {"prob": float}
  fluency        {"claim": str}                             -> {"pseudo_loglik": float}
  saliency       {"claim": str, "evidence": [str]}          -> {"saliency": [float]}
  propose_token  {"masked_claim": str, "evidence": [str],
                  "top_k"?: int}                            -> {"tokens": [str], "probs": [float]}
  score_entities {"masked_claim": str, "evidence": [str],
                  "candidates": [str]}                      -> {"scores": [float]}

``masked_claim`` contains exactly one literal "[MASK]" token.
"""

from __future__ import annotations

import json
import select
import shlex
import socket
import subprocess
from dataclasses import dataclass

PROTOCOL_VERSION = 1
MASK = "[MASK]"
REQUEST_TYPES = ("verify", "fluency", "saliency", "propose_token", "score_entities")


class ProtocolError(Exception):
    """Malformed or out-of-order frame from the peer."""


class RemoteFailure(Exception):
    """The scorer server reported an error frame."""


class RemoteTimeout(Exception):
    """No response within the deadline; never substituted with a score."""


class Transport:
    """One line-delimited connection with timeout-aware reads."""

    def send_line(self, line: str) -> None:
        raise NotImplementedError

    def recv_line(self, timeout: float | None) -> str:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class _FdLineReader:
    def __init__(self, fd: int):
        self.fd = fd
        self.buf = b""

    def read_line(self, timeout: float | None) -> str:
        while b"\n" not in self.buf:
            ready, _, _ = select.select([self.fd], [], [], timeout)
            if not ready:
                raise RemoteTimeout(f"no frame within {timeout}s")
            import os

            chunk = os.read(self.fd, 65536)
            if not chunk:
                raise ProtocolError("connection closed by peer")
            self.buf += chunk
        line, self.buf = self.buf.split(b"\n", 1)
        return line.decode("utf-8")


class TcpTransport(Transport):
    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.setblocking(False)
        self.reader = _FdLineReader(self.sock.fileno())

    def send_line(self, line: str) -> None:
        self.sock.setblocking(True)
        try:
            self.sock.sendall((line + "\n").encode("utf-8"))
        finally:
            self.sock.setblocking(False)

    def recv_line(self, timeout: float | None) -> str:
        return self.reader.read_line(timeout)

    def close(self) -> None:
        self.sock.close()


class StdioTransport(Transport):
    """Spawns the server command and talks over its stdin/stdout."""

    def __init__(self, command: str):
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        assert self.proc.stdin is not None and self.proc.stdout is not None
        self.reader = _FdLineReader(self.proc.stdout.fileno())

    def send_line(self, line: str) -> None:
        assert self.proc.stdin is not None
        self.proc.stdin.write((line + "\n").encode("utf-8"))
        self.proc.stdin.flush()

    def recv_line(self, timeout: float | None) -> str:
        return self.reader.read_line(timeout)

    def close(self) -> None:
        if self.proc.stdin:
            self.proc.stdin.close()
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()


def open_transport(endpoint: str, timeout: float = 30.0) -> Transport:
    """Endpoint forms: "tcp:HOST:PORT" or "stdio:COMMAND ARGS..."."""
    if endpoint.startswith("tcp:"):
        _, host, port = endpoint.split(":", 2)
        return TcpTransport(host, int(port), timeout=timeout)
    if endpoint.startswith("stdio:"):
        return StdioTransport(endpoint[len("stdio:") :])
    raise ValueError(f"unsupported endpoint {endpoint!r} (use tcp:HOST:PORT or stdio:CMD)")


def encode_frame(frame: dict) -> str:
    return json.dumps(frame, sort_keys=True, separators=(",", ":"))


def decode_frame(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"undecodable frame: {exc.msg}") from exc
    if not isinstance(obj, dict) or "type" not in obj:
        raise ProtocolError("frame is not an object with a type")
    return obj


@dataclass
class ScorerClient:
    """Blocking request/response client over one transport.

    Consumes the server's hello frame on construction and enforces id and
    type echoing on every exchange. Timeouts and server-side errors raise;
    they are never converted into fabricated scores.
    """

    transport: Transport
    timeout: float = 30.0

    def __post_init__(self) -> None:
        self._next_id = 1
        hello = decode_frame(self.transport.recv_line(self.timeout))
        if hello.get("type") != "hello":
            raise ProtocolError(f"expected hello frame, got {hello.get('type')!r}")
        payload = hello.get("payload") or {}
        self.protocol_version = payload.get("protocol_version")
        self.capabilities = tuple(payload.get("capabilities", ()))

    def request(self, rtype: str, payload: dict) -> dict:
        rid = self._next_id
        self._next_id += 1
        self.transport.send_line(encode_frame({"id": rid, "type": rtype, "payload": payload}))
        frame = decode_frame(self.transport.recv_line(self.timeout))
        if frame.get("id") != rid:
            raise ProtocolError(f"response id {frame.get('id')!r} does not match request {rid}")
        if frame.get("type") == "error":
            info = frame.get("payload") or {}
            raise RemoteFailure(f"{info.get('code', 'error')}: {info.get('message', '')}")
        if frame.get("type") != rtype:
            raise ProtocolError(f"response type {frame.get('type')!r} does not match {rtype!r}")
        out = frame.get("payload")
        if not isinstance(out, dict):
            raise ProtocolError("response payload missing")
        return out

    def close(self) -> None:
        self.transport.close()


# -- conformance / fuzz harness ----------------------------------------------


def _malformed_lines(rng, n: int) -> list[str]:
    pools = [
        lambda: "",
        lambda: "not json at all",
        lambda: "{" + "x" * int(rng.integers(1, 40)),
        lambda: json.dumps(int(rng.integers(-(2**31), 2**31))),
        lambda: json.dumps([1, 2, 3]),
        lambda: json.dumps({"no_type": True}),
        lambda: json.dumps({"type": "bogus_" + str(int(rng.integers(0, 999)))}),
        lambda: json.dumps({"id": None, "type": "verify"}),
        lambda: json.dumps({"id": int(rng.integers(0, 2**62)), "type": "verify", "payload": 7}),
        lambda: json.dumps({"id": 1, "type": "saliency", "payload": {"claim": 5}}),
        lambda: json.dumps({"id": 1, "type": "propose_token", "payload": {}}),
        lambda: json.dumps(
            {"id": 1, "type": "score_entities", "payload": {"masked_claim": "a", "candidates": "x"}}
        ),
        lambda: "\x00\x01\x02",
        lambda: json.dumps({"id": "str-id", "type": "fluency", "payload": {"claim": "a b"}}),
    ]
    return [pools[int(rng.integers(0, len(pools)))]() for _ in range(n)]


@dataclass
class ConformanceReport:
    checks: list[str]
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def check_server(
    transport: Transport,
    rng,
    n_malformed: int = 10_000,
    timeout: float = 30.0,
) -> ConformanceReport:
    """Protocol conformance: valid probes per request type plus a malformed
    frame fuzz. Every malformed line must yield a well-formed error frame
    (never silence, never a crash)."""
    checks: list[str] = []
    failures: list[str] = []

    def fail(msg: str) -> None:
        failures.append(msg)

    client = ScorerClient(transport, timeout=timeout)
    checks.append("handshake")
    if client.protocol_version != PROTOCOL_VERSION:
        fail(f"protocol version {client.protocol_version!r} != {PROTOCOL_VERSION}")
    for cap in REQUEST_TYPES:
        if cap not in client.capabilities:
            fail(f"capability {cap} missing from hello")

    claim = "Paris is the capital of Germany"
    evidence = ["Paris is the capital of France", "The Seine crosses Paris"]
    out = client.request("verify", {"claim": claim, "evidence": evidence})
    checks.append("verify probe")
    if not (0.0 < float(out.get("prob", -1)) < 1.0):
        fail(f"verify prob out of range: {out}")

    out = client.request("fluency", {"claim": claim})
    checks.append("fluency probe")
    if not (float(out.get("pseudo_loglik", 1)) <= 0.0):
        fail(f"fluency pseudo_loglik must be <= 0: {out}")

    out = client.request("saliency", {"claim": claim, "evidence": evidence})
    checks.append("saliency probe")
    sal = out.get("saliency")
    if not isinstance(sal, list) or len(sal) != len(claim.split()):
        fail(f"saliency length mismatch: {out}")
    elif any((not isinstance(v, (int, float))) or v < 0 or v != v for v in sal):
        fail(f"saliency entries must be finite and >= 0: {out}")

    masked = "Paris is the [MASK] of Germany"
    out = client.request("propose_token", {"masked_claim": masked, "evidence": evidence})
    checks.append("propose_token probe")
    toks, probs = out.get("tokens"), out.get("probs")
    if not (isinstance(toks, list) and isinstance(probs, list) and len(toks) == len(probs)):
        fail(f"propose_token malformed: {out}")
    elif abs(sum(probs) - 1.0) > 1e-6 or any(p < 0 for p in probs):
        fail(f"propose_token probs must sum to 1: sum={sum(probs)}")

    cands = ["Bryce Hollow", "Cedar Falls"]
    out = client.request("score_entities", {"masked_claim": masked, "evidence": evidence, "candidates": cands})
    checks.append("score_entities probe")
    scores = out.get("scores")
    if not (isinstance(scores, list) and len(scores) == len(cands)):
        fail(f"score_entities malformed: {out}")
    elif any((not isinstance(v, (int, float))) or v != v or v in (float("inf"), float("-inf")) for v in scores):
        fail(f"score_entities must be finite: {out}")

    checks.append("no-mask guard")
    try:
        client.request("propose_token", {"masked_claim": "no mask here", "evidence": []})
        fail("propose_token without mask should produce an error frame")
    except RemoteFailure:
        pass

    checks.append(f"malformed frame fuzz x{n_malformed}")
    for i, line in enumerate(_malformed_lines(rng, n_malformed)):
        transport.send_line(line)
        try:
            frame = decode_frame(transport.recv_line(timeout))
        except (ProtocolError, RemoteTimeout) as exc:
            fail(f"fuzz line {i}: no well-formed reply ({exc})")
            break
        if frame.get("type") != "error":
            fail(f"fuzz line {i}: expected error frame, got {frame.get('type')!r}")
            break
        info = frame.get("payload")
        if not isinstance(info, dict) or "code" not in info:
            fail(f"fuzz line {i}: error frame missing code: {frame}")
            break

    # the connection must still work after the fuzz barrage
    checks.append("post-fuzz probe")
    try:
        out = client.request("verify", {"claim": claim, "evidence": evidence})
        if not (0.0 < float(out.get("prob", -1)) < 1.0):
            fail(f"post-fuzz verify out of range: {out}")
    except Exception as exc:  # noqa: BLE001 - any failure here is a finding
        fail(f"server unusable after fuzz: {exc}")

    return ConformanceReport(checks=checks, failures=failures)
