"""Built-in scorer backends: deterministic, dependency-light, offline.

These back the server when no pretrained checkpoints are available. The
verifier is a small differentiable soft-coverage model over hashed token
embeddings, so its saliency is a true input gradient (2-norm per token)
rather than a finite-difference proxy. The fluency and proposal backends
score tokens by embedding similarity to their context window.

Model identifiers: "builtin:overlap" (verifier), "builtin:hashlm" (masked
LM), "builtin:copy" (proposer), or "hf:<checkpoint>" for the pretrained
backends in the hf module.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import torch

EMBED_DIM = 64
GATE_SHARPNESS = 12.0
GATE_MIDPOINT = 0.5
VERIFIER_STEEPNESS = 10.0
VERIFIER_MIDPOINT = 0.5
PROB_FLOOR = 1e-6

STOPWORDS = frozenset(
    """
    a an the this that these those it its he she they them his her their i
    you we me us my your our
    is are was were be been being am do does did done have has had having
    will would can could shall should may might must
    and or but nor not no if then than so because while
    of in on at by to from with for near about into over under up down off
    out as
    there here when where which who whom whose what why how
    . , ! ? ; : ' " ( ) -
    """.split()
)

BASE_VOCAB = (
    "the a an is was are were in on at of to and or it this that has had "
    "with by from for city town film river not new old"
).split()


class ModelError(Exception):
    pass


def hash_embedding(token: str) -> np.ndarray:
    """Deterministic unit vector per surface form (case-insensitive)."""
    digest = hashlib.sha256(token.lower().encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "big")
    rng = np.random.Generator(np.random.PCG64(seed))
    vec = rng.standard_normal(EMBED_DIM)
    return vec / np.linalg.norm(vec)


@dataclass
class _EmbeddingCache:
    cache: dict[str, np.ndarray] = field(default_factory=dict)

    def get(self, token: str) -> np.ndarray:
        vec = self.cache.get(token)
        if vec is None:
            vec = hash_embedding(token)
            self.cache[token] = vec
        return vec

    def matrix(self, tokens: list[str]) -> np.ndarray:
        return np.stack([self.get(t) for t in tokens]) if tokens else np.zeros((0, EMBED_DIM))


_EMBED = _EmbeddingCache()


class OverlapVerifier:
    """Soft-coverage entailment score with real gradient saliency.

    Each content token of the claim is softly matched against the evidence
    (max cosine over evidence tokens, squashed by a sharp gate); the support
    probability is a sigmoid of mean gated coverage. Saliency is the 2-norm
    of d(-log support)/d(embedding) per claim token: tokens the evidence
    does not match sit on the steep part of the gate and dominate.
    """

    def _forward(self, claim_tokens: list[str], evidence_tokens: list[str]):
        emb = torch.tensor(_EMBED.matrix(claim_tokens), dtype=torch.float64, requires_grad=True)
        content = [i for i, t in enumerate(claim_tokens) if t.lower() not in STOPWORDS]
        if not content or not evidence_tokens:
            coverage = torch.tensor(1.0 if not content else 0.0, dtype=torch.float64)
            prob = torch.sigmoid(VERIFIER_STEEPNESS * (coverage - VERIFIER_MIDPOINT))
            return emb, prob
        ev = torch.tensor(_EMBED.matrix(evidence_tokens), dtype=torch.float64)
        sims = emb[content] @ ev.T
        match = sims.max(dim=1).values
        gates = torch.sigmoid(GATE_SHARPNESS * (match - GATE_MIDPOINT))
        coverage = gates.mean()
        prob = torch.sigmoid(VERIFIER_STEEPNESS * (coverage - VERIFIER_MIDPOINT))
        return emb, prob

    def support_prob(self, claim_tokens: list[str], evidence_tokens: list[str]) -> float:
        with torch.no_grad():
            _, prob = self._forward(claim_tokens, evidence_tokens)
        return min(max(float(prob), PROB_FLOOR), 1.0 - PROB_FLOOR)

    def saliency(self, claim_tokens: list[str], evidence_tokens: list[str]) -> list[float]:
        emb, prob = self._forward(claim_tokens, evidence_tokens)
        if not emb.requires_grad or prob.grad_fn is None:
            return [0.0] * len(claim_tokens)
        loss = -torch.log(prob.clamp(PROB_FLOOR, 1 - PROB_FLOOR))
        loss.backward()
        grads = emb.grad
        if grads is None:
            return [0.0] * len(claim_tokens)
        return [float(v) for v in grads.norm(dim=1)]


class HashContextLM:
    """Leave-one-out similarity language model over hashed embeddings.

    P(token | context) = softmax over a candidate pool of the cosine of the
    token to the mean context embedding. Pseudo-log-likelihood sums the log
    probability of each token given a window around it; always <= 0.
    """

    def __init__(self, window: int = 3, temperature: float = 0.5):
        self.window = window
        self.temperature = temperature

    def _pool(self, tokens: list[str]) -> list[str]:
        return sorted(set(tokens) | set(BASE_VOCAB))

    def _token_logprob(self, token: str, context: list[str], pool: list[str]) -> float:
        if not context:
            return math.log(1.0 / len(pool))
        ctx = _EMBED.matrix(context).mean(axis=0)
        ctx /= max(np.linalg.norm(ctx), 1e-12)
        scores = _EMBED.matrix(pool) @ ctx / self.temperature
        scores -= scores.max()
        logz = math.log(np.exp(scores).sum())
        try:
            idx = pool.index(token)
        except ValueError:
            return math.log(1.0 / len(pool))
        return float(scores[idx]) - logz

    def pseudo_loglik(self, tokens: list[str]) -> float:
        pool = self._pool(tokens)
        total = 0.0
        for i, tok in enumerate(tokens):
            ctx = tokens[max(0, i - self.window) : i] + tokens[i + 1 : i + 1 + self.window]
            total += self._token_logprob(tok, ctx, pool)
        return min(total, 0.0)


class CopyProposer:
    """Fill-in proposals that prefer copying from the evidence.

    Token scores are cosine similarity to the mask's context window over a
    pool of evidence, claim, and base-vocabulary tokens; entity candidates
    get the length-normalized log-probability of their tokens.
    """

    def __init__(self, window: int = 3, temperature: float = 0.5, top_k: int = 50):
        self.window = window
        self.temperature = temperature
        self.top_k = top_k

    def _context(self, left: list[str], right: list[str]) -> list[str]:
        return left[-self.window :] + right[: self.window]

    def _scores(self, pool: list[str], context: list[str]) -> np.ndarray:
        if not context:
            return np.zeros(len(pool))
        ctx = _EMBED.matrix(context).mean(axis=0)
        ctx /= max(np.linalg.norm(ctx), 1e-12)
        return _EMBED.matrix(pool) @ ctx / self.temperature

    def token_dist(
        self, left: list[str], right: list[str], evidence_tokens: list[str], top_k: int | None = None
    ) -> tuple[list[str], list[float]]:
        pool = sorted(set(evidence_tokens) | set(left) | set(right) | set(BASE_VOCAB))
        scores = self._scores(pool, self._context(left, right))
        scores -= scores.max()
        probs = np.exp(scores)
        probs /= probs.sum()
        k = min(top_k or self.top_k, len(pool))
        order = np.argsort(-probs, kind="stable")[:k]
        kept = probs[order]
        kept /= kept.sum()
        return [pool[i] for i in order], [float(p) for p in kept]

    def entity_scores(
        self, left: list[str], right: list[str], evidence_tokens: list[str], candidates: list[str]
    ) -> list[float]:
        pool_tokens = sorted(
            set(evidence_tokens)
            | set(left)
            | set(right)
            | set(BASE_VOCAB)
            | {t for c in candidates for t in c.split()}
        )
        scores = self._scores(pool_tokens, self._context(left, right))
        scores -= scores.max()
        logz = math.log(np.exp(scores).sum())
        index = {t: i for i, t in enumerate(pool_tokens)}
        out = []
        for cand in candidates:
            toks = cand.split() or [cand]
            loglik = sum(float(scores[index[t]]) - logz for t in toks)
            out.append(loglik / len(toks))
        return out


def resolve_verifier(identifier: str, device: str = "cpu"):
    if identifier == "builtin:overlap":
        return OverlapVerifier()
    if identifier.startswith("hf:"):
        from .hf import HfVerifier

        return HfVerifier(identifier[3:], device=device)
    raise ModelError(f"unknown verifier identifier {identifier!r}")


def resolve_mlm(identifier: str, device: str = "cpu"):
    if identifier == "builtin:hashlm":
        return HashContextLM()
    if identifier.startswith("hf:"):
        from .hf import HfMaskedLM

        return HfMaskedLM(identifier[3:], device=device)
    raise ModelError(f"unknown masked-LM identifier {identifier!r}")


def resolve_proposer(identifier: str, device: str = "cpu"):
    if identifier == "builtin:copy":
        return CopyProposer()
    if identifier.startswith("hf:"):
        from .hf import HfProposer

        return HfProposer(identifier[3:], device=device)
    raise ModelError(f"unknown proposer identifier {identifier!r}")
