"""Scorer implementations backed by a wire-protocol server.

Each adapter satisfies the corresponding in-process interface; calls are
serialized per connection with a lock so parallel chains can share one
client safely (or open one client each). Transport failures propagate as
exceptions - a timeout is never turned into a score.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .protocol import MASK, ProtocolError, ScorerClient
from .state import EvidenceSet, TokenSeq, detokenize


@dataclass
class _Shared:
    client: ScorerClient
    lock: threading.Lock = field(default_factory=threading.Lock)

    def request(self, rtype: str, payload: dict) -> dict:
        with self.lock:
            return self.client.request(rtype, payload)


def _evidence_texts(evidence: EvidenceSet) -> list[str]:
    return [detokenize(p) for p in evidence.passages]


@dataclass
class RemoteVerifier:
    shared: _Shared

    def support_prob(self, seq: TokenSeq, evidence: EvidenceSet) -> float:
        out = self.shared.request(
            "verify", {"claim": detokenize(seq), "evidence": _evidence_texts(evidence)}
        )
        prob = float(out["prob"])
        if not 0.0 < prob < 1.0:
            raise ProtocolError(f"verify prob out of (0,1): {prob}")
        return prob


@dataclass
class RemoteFluency:
    shared: _Shared

    def pseudo_loglik(self, seq: TokenSeq) -> float:
        out = self.shared.request("fluency", {"claim": detokenize(seq)})
        val = float(out["pseudo_loglik"])
        if not math.isfinite(val) or val > 0.0:
            raise ProtocolError(f"pseudo_loglik must be finite and <= 0: {val}")
        return val


@dataclass
class RemoteSaliency:
    shared: _Shared

    def token_saliency(self, seq: TokenSeq, evidence: EvidenceSet) -> list[float]:
        out = self.shared.request(
            "saliency", {"claim": detokenize(seq), "evidence": _evidence_texts(evidence)}
        )
        sal = [float(v) for v in out["saliency"]]
        if len(sal) != len(seq) or any(v < 0 or not math.isfinite(v) for v in sal):
            raise ProtocolError("saliency vector malformed")
        return sal


@dataclass
class RemoteProposer:
    """Content proposals from the server's fill-in model.

    The token distribution is whatever renormalized top-k the server
    returns; content outside it has probability zero, which the kernel
    treats as an irreversible move and rejects.
    """

    shared: _Shared

    def _masked(self, left: TokenSeq, right: TokenSeq) -> str:
        return detokenize(tuple(left) + (MASK,) + tuple(right))

    def token_dist(
        self, left: TokenSeq, right: TokenSeq, evidence: EvidenceSet
    ) -> tuple[tuple[str, ...], np.ndarray]:
        out = self.shared.request(
            "propose_token",
            {"masked_claim": self._masked(left, right), "evidence": _evidence_texts(evidence)},
        )
        tokens = tuple(out["tokens"])
        probs = np.asarray([float(p) for p in out["probs"]], dtype=float)
        if len(tokens) != len(probs) or abs(float(probs.sum()) - 1.0) > 1e-6:
            raise ProtocolError("propose_token distribution malformed")
        return tokens, probs

    def entity_scores(
        self,
        left: TokenSeq,
        right: TokenSeq,
        evidence: EvidenceSet,
        candidates: Sequence[TokenSeq],
    ) -> np.ndarray:
        out = self.shared.request(
            "score_entities",
            {
                "masked_claim": self._masked(left, right),
                "evidence": _evidence_texts(evidence),
                "candidates": [detokenize(c) for c in candidates],
            },
        )
        scores = np.asarray([float(s) for s in out["scores"]], dtype=float)
        if len(scores) != len(candidates) or not np.isfinite(scores).all():
            raise ProtocolError("score_entities malformed")
        return scores


def remote_suite(client: ScorerClient):
    """Bundle all four adapters over one serialized client."""
    from .scorers import ScorerSuite

    shared = _Shared(client=client)
    suite = ScorerSuite(
        fluency=RemoteFluency(shared),
        verifier=RemoteVerifier(shared),
        saliency=RemoteSaliency(shared),
    )
    return suite, RemoteProposer(shared)
