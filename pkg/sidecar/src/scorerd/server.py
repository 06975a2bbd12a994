"""Request dispatch and serving loops (stdio or TCP).

One worker thread per connection; all model calls are serialized through a
single lock so backends never see concurrent requests. Inference is
deterministic (no sampling, no dropout), so identical requests always get
identical responses within one server build.
"""

from __future__ import annotations

import socket
import sys
import threading
from dataclasses import dataclass, field

from .backends import ModelError, resolve_mlm, resolve_proposer, resolve_verifier
from .protocol import (
    MASK,
    RequestError,
    encode,
    error_frame,
    hello_frame,
    parse_request,
    want_str,
    want_str_list,
)


@dataclass
class SidecarConfig:
    verifier: str = "builtin:overlap"
    mlm: str = "builtin:hashlm"
    proposer: str = "builtin:copy"
    device: str = "cpu"
    max_len: int = 256
    top_k: int = 50

    def __post_init__(self) -> None:
        if self.max_len < 8:
            raise ValueError("max_len must be >= 8")


@dataclass
class ScorerService:
    """Holds the three resolved model slots and answers payloads."""

    config: SidecarConfig
    lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self) -> None:
        self.verifier = resolve_verifier(self.config.verifier, self.config.device)
        self.mlm = resolve_mlm(self.config.mlm, self.config.device)
        self.proposer = resolve_proposer(self.config.proposer, self.config.device)

    # -- helpers -------------------------------------------------------------

    def _truncate_evidence(self, claim_tokens: list[str], evidence: list[str]) -> tuple[list[str], bool]:
        """Trim evidence (never the claim) to the length budget."""
        budget = self.config.max_len - len(claim_tokens)
        tokens: list[str] = []
        truncated = False
        for passage in evidence:
            for tok in passage.split():
                if len(tokens) >= max(budget, 0):
                    truncated = True
                    break
                tokens.append(tok)
            if truncated:
                break
        return tokens, truncated

    @staticmethod
    def _split_mask(masked_claim: str) -> tuple[list[str], list[str]]:
        tokens = masked_claim.split()
        positions = [i for i, t in enumerate(tokens) if t == MASK]
        if len(positions) != 1:
            raise RequestError("no_mask", "masked_claim must contain exactly one [MASK]")
        pos = positions[0]
        return tokens[:pos], tokens[pos + 1 :]

    # -- request handlers ----------------------------------------------------

    def handle(self, rtype: str, payload: dict) -> dict:
        with self.lock:
            if rtype == "verify":
                return self._verify(payload)
            if rtype == "fluency":
                return self._fluency(payload)
            if rtype == "saliency":
                return self._saliency(payload)
            if rtype == "propose_token":
                return self._propose_token(payload)
            if rtype == "score_entities":
                return self._score_entities(payload)
            raise RequestError("unknown_type", rtype)  # pragma: no cover

    def _verify(self, payload: dict) -> dict:
        claim = want_str(payload, "claim").split()
        evidence, truncated = self._truncate_evidence(claim, want_str_list(payload, "evidence", []))
        prob = self.verifier.support_prob(claim, evidence)
        out = {"prob": prob}
        if truncated:
            out["truncated"] = True
        return out

    def _fluency(self, payload: dict) -> dict:
        claim = want_str(payload, "claim").split()
        if not claim:
            raise RequestError("bad_payload", "claim must contain tokens")
        return {"pseudo_loglik": self.mlm.pseudo_loglik(claim)}

    def _saliency(self, payload: dict) -> dict:
        claim = want_str(payload, "claim").split()
        if not claim:
            raise RequestError("bad_payload", "claim must contain tokens")
        evidence, truncated = self._truncate_evidence(claim, want_str_list(payload, "evidence", []))
        scores = self.verifier.saliency(claim, evidence)
        out = {"saliency": [max(0.0, float(s)) for s in scores]}
        if truncated:
            out["truncated"] = True
        return out

    def _propose_token(self, payload: dict) -> dict:
        left, right = self._split_mask(want_str(payload, "masked_claim"))
        evidence, _ = self._truncate_evidence(left + right, want_str_list(payload, "evidence", []))
        top_k = payload.get("top_k", self.config.top_k)
        if not isinstance(top_k, int) or top_k < 1:
            raise RequestError("bad_payload", "top_k must be a positive integer")
        tokens, probs = self.proposer.token_dist(left, right, evidence, top_k=top_k)
        return {"tokens": tokens, "probs": probs}

    def _score_entities(self, payload: dict) -> dict:
        left, right = self._split_mask(want_str(payload, "masked_claim"))
        evidence, _ = self._truncate_evidence(left + right, want_str_list(payload, "evidence", []))
        candidates = want_str_list(payload, "candidates")
        if not candidates:
            raise RequestError("bad_payload", "candidates must be non-empty")
        return {"scores": self.proposer.entity_scores(left, right, evidence, candidates)}


def serve_stream(service: ScorerService, rfile, wfile) -> None:
    """Answer frames on one connection until EOF. Never raises on bad input."""
    wfile.write(encode(hello_frame()) + "\n")
    wfile.flush()
    for raw in rfile:
        line = raw.rstrip("\n")
        rid = None
        try:
            rid, rtype, payload = parse_request(line)
            result = service.handle(rtype, payload)
            reply = {"id": rid, "type": rtype, "payload": result}
        except RequestError as exc:
            reply = error_frame(rid, exc.code, exc.message)
        except ModelError as exc:
            reply = error_frame(rid, "model_error", str(exc))
        except Exception as exc:  # noqa: BLE001 - the server must not die on input
            reply = error_frame(rid, "internal_error", f"{type(exc).__name__}: {exc}")
        wfile.write(encode(reply) + "\n")
        wfile.flush()


def serve_stdio(service: ScorerService) -> None:
    serve_stream(service, sys.stdin, sys.stdout)


def serve_tcp(service: ScorerService, host: str, port: int, ready=None) -> None:
    sock = socket.socket()
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    sock.listen(16)
    if ready is not None:
        ready(sock.getsockname()[1])
    while True:
        conn, _ = sock.accept()
        thread = threading.Thread(target=_tcp_worker, args=(service, conn), daemon=True)
        thread.start()


def _tcp_worker(service: ScorerService, conn: socket.socket) -> None:
    with conn:
        stream = conn.makefile("rw", encoding="utf-8", newline="\n")
        try:
            serve_stream(service, stream, stream)
        except (BrokenPipeError, ConnectionResetError, ValueError):
            pass
