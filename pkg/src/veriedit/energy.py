"""Aggregate energy over claims and the stationary-distribution ratio.

The target density over claims is the Boltzmann distribution of a weighted
sum of three terms: negative pseudo-log-likelihood (fluency), negative log
support probability (truthfulness), and a Hamming distance to the original
claim (minimal edit). The normalizer cancels everywhere, so only ratios of
exp(-total) are ever computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scorers import FluencyModel, Verifier
from .state import EditState, TokenSeq

_EXP_CLAMP = 700.0


@dataclass(frozen=True)
class EnergyWeights:
    w_lm: float = 1.0
    w_v: float = 1.0
    w_h: float = 1.0

    def __post_init__(self) -> None:
        if min(self.w_lm, self.w_v, self.w_h) < 0:
            raise ValueError("energy weights must be non-negative")
        if self.w_lm == self.w_v == self.w_h == 0:
            raise ValueError("at least one energy weight must be positive")


@dataclass(frozen=True)
class EnergyBreakdown:
    e_lm: float
    e_v: float
    e_h: float
    total: float

    @staticmethod
    def combine(e_lm: float, e_v: float, e_h: float, w: EnergyWeights) -> "EnergyBreakdown":
        return EnergyBreakdown(
            e_lm=e_lm,
            e_v=e_v,
            e_h=e_h,
            total=w.w_lm * e_lm + w.w_v * e_v + w.w_h * e_h,
        )


def hamming(x: TokenSeq, x0: TokenSeq) -> int:
    """Positional mismatches over the shared prefix plus the length difference.

    Symmetric; zero iff the sequences are identical.
    """
    overlap = min(len(x), len(x0))
    mismatches = sum(1 for i in range(overlap) if x[i] != x0[i])
    return mismatches + abs(len(x) - len(x0))


def total_energy(
    state: EditState,
    fluency: FluencyModel,
    verifier: Verifier,
    weights: EnergyWeights = EnergyWeights(),
) -> EnergyBreakdown:
    e_lm = -fluency.pseudo_loglik(state.tokens)
    e_v = -math.log(verifier.support_prob(state.tokens, state.evidence))
    e_h = float(hamming(state.tokens, state.original))
    return EnergyBreakdown.combine(e_lm, e_v, e_h, weights)


def pi_ratio(e_new: EnergyBreakdown, e_old: EnergyBreakdown) -> float:
    """exp(old_total - new_total): the target-density ratio pi(new)/pi(old)."""
    exponent = e_old.total - e_new.total
    exponent = min(max(exponent, -_EXP_CLAMP), _EXP_CLAMP)
    return math.exp(exponent)
