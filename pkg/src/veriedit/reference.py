"""Factory wiring the deterministic reference scorers for one instance.

The n-gram vocabulary is the union of the fluency corpus, the evidence
passages, the claim, and all gazetteer tokens - every token that can ever
appear in a reachable state - so reverse moves always have nonzero content
probability.
"""

from __future__ import annotations

from typing import Iterable

from .proposal import NGramProposer, Proposer
from .scorers import (
    LexicalVerifier,
    NGramMLM,
    OcclusionSaliency,
    ScorerSuite,
    UniformSaliency,
)
from .state import EvidenceSet, TokenSeq


def build_reference_scorers(
    claim: TokenSeq,
    evidence: EvidenceSet,
    *,
    fluency_corpus: Iterable[TokenSeq] | None = None,
    ngram_order: int = 3,
    smoothing: float = 1.0,
    proposer_order: int = 2,
    proposer_smoothing: float = 1.0,
    verifier_steepness: float = 10.0,
    verifier_midpoint: float = 0.5,
    position_sampling: str = "saliency",
) -> tuple[ScorerSuite, Proposer]:
    corpus = tuple(fluency_corpus) if fluency_corpus is not None else evidence.passages
    vocab: set[str] = set(claim) | set(evidence.gazetteer_tokens)
    for passage in evidence.passages:
        vocab.update(passage)
    for sent in corpus:
        vocab.update(sent)
    extra = tuple(sorted(vocab))

    fluency = NGramMLM(corpus=corpus, order=ngram_order, k=smoothing, extra_vocab=extra)
    verifier = LexicalVerifier(steepness=verifier_steepness, midpoint=verifier_midpoint)
    if position_sampling == "saliency":
        saliency = OcclusionSaliency(verifier)
    elif position_sampling == "uniform":
        saliency = UniformSaliency()
    else:
        raise ValueError(f"unknown position_sampling {position_sampling!r}")
    proposer = NGramProposer(
        corpus=evidence.passages, order=proposer_order, k=proposer_smoothing, extra_vocab=extra
    )
    return ScorerSuite(fluency=fluency, verifier=verifier, saliency=saliency), proposer
