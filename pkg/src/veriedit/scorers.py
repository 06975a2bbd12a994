"""Reference fluency, truthfulness, and saliency scorers.

Three pluggable roles feed the energy model and the position sampler:

* ``FluencyModel.pseudo_loglik`` - sum over positions of the log-probability
  of each token given its surrounding context (always <= 0).
* ``Verifier.support_prob`` - probability that the claim is supported by the
  evidence, clamped inside (0, 1) so its negative log stays finite.
* ``SaliencyModel.token_saliency`` - non-negative per-token editability
  scores that drive the position distribution.

The reference implementations are deterministic and dependency-free: an
add-k smoothed n-gram model scored in both directions stands in for a masked
LM, a coverage sigmoid stands in for a trained verifier, and occlusion
differences stand in for verifier gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .state import EvidenceSet, TokenSeq

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


def clamp_prob(p: float) -> float:
    return min(max(float(p), PROB_FLOOR), 1.0 - PROB_FLOOR)


@runtime_checkable
class FluencyModel(Protocol):
    def pseudo_loglik(self, seq: TokenSeq) -> float: ...


@runtime_checkable
class Verifier(Protocol):
    def support_prob(self, seq: TokenSeq, evidence: EvidenceSet) -> float: ...


@runtime_checkable
class SaliencyModel(Protocol):
    def token_saliency(self, seq: TokenSeq, evidence: EvidenceSet) -> list[float]: ...


_BOS = "\x00"


class NGramTable:
    """Add-k smoothed n-gram counts over a fixed vocabulary.

    Context totals only count continuations into the vocabulary, so the
    smoothed conditional distribution sums to exactly 1 over the vocab for
    every context.
    """

    def __init__(self, order: int, k: float, vocab: Sequence[str]):
        if order < 1:
            raise ValueError("order must be >= 1")
        if k <= 0:
            raise ValueError("smoothing constant must be > 0")
        self.order = order
        self.k = k
        self.vocab = tuple(sorted(set(vocab)))
        self.index = {w: i for i, w in enumerate(self.vocab)}
        self.counts: dict[tuple[str, ...], dict[str, int]] = {}
        self.totals: dict[tuple[str, ...], int] = {}

    def train(self, sentences: Iterable[TokenSeq]) -> "NGramTable":
        for sent in sentences:
            padded = (_BOS,) * (self.order - 1) + tuple(sent)
            for i, tok in enumerate(sent):
                if tok not in self.index:
                    raise ValueError(f"token {tok!r} outside vocabulary")
                ctx = padded[i : i + self.order - 1]
                slot = self.counts.setdefault(ctx, {})
                slot[tok] = slot.get(tok, 0) + 1
                self.totals[ctx] = self.totals.get(ctx, 0) + 1
        return self

    def context(self, left: TokenSeq, pos: int) -> tuple[str, ...]:
        padded = (_BOS,) * (self.order - 1) + tuple(left)
        return padded[pos : pos + self.order - 1]

    def logprob(self, token: str, ctx: tuple[str, ...]) -> float:
        count = self.counts.get(ctx, {}).get(token, 0)
        total = self.totals.get(ctx, 0)
        return math.log((count + self.k) / (total + self.k * len(self.vocab)))

    def dist(self, ctx: tuple[str, ...]) -> np.ndarray:
        probs = np.full(len(self.vocab), self.k, dtype=float)
        for tok, count in self.counts.get(ctx, {}).items():
            probs[self.index[tok]] += count
        probs /= self.totals.get(ctx, 0) + self.k * len(self.vocab)
        return probs


def _left_context(table: NGramTable, seq: TokenSeq, i: int) -> tuple[str, ...]:
    padded = (_BOS,) * (table.order - 1) + tuple(seq)
    return padded[i : i + table.order - 1]


@dataclass
class NGramMLM:
    """Bidirectional add-k n-gram stand-in for a masked language model.

    The per-token log-probability is the average of a forward model (token
    given the preceding n-1 tokens) and a backward model (token given the
    following n-1 tokens, trained on reversed sentences).
    """

    corpus: tuple[TokenSeq, ...] = ()
    order: int = 3
    k: float = 1.0
    extra_vocab: tuple[str, ...] = ()
    fwd: NGramTable = field(init=False, repr=False)
    bwd: NGramTable = field(init=False, repr=False)

    def __post_init__(self) -> None:
        vocab: set[str] = set(self.extra_vocab)
        for sent in self.corpus:
            vocab.update(sent)
        if not vocab:
            raise ValueError("empty vocabulary: supply corpus or extra_vocab")
        self.fwd = NGramTable(self.order, self.k, sorted(vocab)).train(self.corpus)
        self.bwd = NGramTable(self.order, self.k, sorted(vocab)).train(
            tuple(tuple(reversed(s)) for s in self.corpus)
        )

    @property
    def vocab(self) -> tuple[str, ...]:
        return self.fwd.vocab

    def pseudo_loglik(self, seq: TokenSeq) -> float:
        rev = tuple(reversed(seq))
        n = len(seq)
        total = 0.0
        for i, tok in enumerate(seq):
            lf = self.fwd.logprob(tok, _left_context(self.fwd, seq, i))
            lb = self.bwd.logprob(tok, _left_context(self.bwd, rev, n - 1 - i))
            total += 0.5 * (lf + lb)
        return total


@dataclass
class LexicalVerifier:
    """Coverage sigmoid: how much of the claim's content the evidence mentions.

    coverage = (non-stopword claim tokens present in any passage) /
    (non-stopword claim tokens); a claim with no content tokens counts as
    fully covered. The output is sigmoid(steepness * (coverage - midpoint)),
    clamped away from 0 and 1. Adding a covered content token never lowers
    the score.
    """

    steepness: float = 10.0
    midpoint: float = 0.5
    stopwords: frozenset[str] = STOPWORDS

    def coverage(self, seq: TokenSeq, evidence: EvidenceSet) -> float:
        content = [t for t in seq if t.lower() not in self.stopwords]
        if not content:
            return 1.0
        hits = sum(1 for t in content if t in evidence.token_set)
        return hits / len(content)

    def support_prob(self, seq: TokenSeq, evidence: EvidenceSet) -> float:
        c = self.coverage(seq, evidence)
        z = self.steepness * (c - self.midpoint)
        return clamp_prob(1.0 / (1.0 + math.exp(-z)))


@dataclass
class OcclusionSaliency:
    """Importance of each token as the truth-energy shift when it is removed.

    s_i = |(-log p(seq without token i)) - (-log p(seq))| with the verifier's
    no-content convention applying when the occluded sequence loses all
    content tokens.
    """

    verifier: Verifier

    def token_saliency(self, seq: TokenSeq, evidence: EvidenceSet) -> list[float]:
        base = -math.log(self.verifier.support_prob(seq, evidence))
        out: list[float] = []
        for i in range(len(seq)):
            reduced = seq[:i] + seq[i + 1 :]
            if reduced:
                occluded = -math.log(self.verifier.support_prob(reduced, evidence))
            else:
                occluded = -math.log(clamp_prob(1.0))  # empty claim: fully covered
            out.append(abs(occluded - base))
        return out


@dataclass
class UniformSaliency:
    """Constant saliency: position sampling degenerates to uniform over tokens."""

    def token_saliency(self, seq: TokenSeq, evidence: EvidenceSet) -> list[float]:
        return [1.0] * len(seq)


@dataclass
class ScorerSuite:
    fluency: FluencyModel
    verifier: Verifier
    saliency: SaliencyModel
