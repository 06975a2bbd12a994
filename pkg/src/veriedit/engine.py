"""The Metropolis-Hastings correction loop.

Each iteration proposes one edit, scores the proposed claim with the energy
model, and accepts with the Metropolis-Hastings ratio

    A = min(1, exp((E_old - E_new) + (log g_reverse - log g_forward)))

computed in log space. Accepted states (self-loops included) are collected
along with a full per-iteration trace; after the fixed iteration budget the
lowest-energy state seen - by default including the untouched input - is
returned as the correction.

All randomness comes from one numpy PCG64 generator per chain. Draw order
is fixed (action kind, position, content branch, content, acceptance
uniform), so equal seeds give byte-identical traces.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyBreakdown, EnergyWeights, total_energy
from .proposal import Proposal, ProposalKernel, Proposer, ProposalRejected
from .scorers import ScorerSuite
from .state import EditState, EvidenceSet, TokenSeq, make_state

_EXP_CLAMP = 700.0


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 20
    seed: int = 0
    alpha: float = 0.5
    weights: EnergyWeights = field(default_factory=EnergyWeights)
    include_initial_in_ranking: bool = True
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def chain_rng(seed: int, instance_id: str | None = None) -> np.random.Generator:
    """Seedable, splittable PCG64 stream; per-claim streams derive from
    (seed, sha256(instance id)) so parallel runs stay reproducible."""
    if instance_id is None:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    digest = int.from_bytes(hashlib.sha256(instance_id.encode("utf-8")).digest()[:8], "big")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, digest))))


def acceptance_ratio(
    e_old: EnergyBreakdown,
    e_new: EnergyBreakdown,
    forward_logprob: float,
    reverse_logprob: float,
) -> float:
    exponent = (e_old.total - e_new.total) + (reverse_logprob - forward_logprob)
    exponent = min(max(exponent, -_EXP_CLAMP), _EXP_CLAMP)
    return min(1.0, math.exp(exponent))


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    action: str | None
    position: int | None
    content: TokenSeq | None
    space: str | None
    e_old: EnergyBreakdown
    e_new: EnergyBreakdown | None
    acceptance: float
    u: float
    accepted: bool
    forward_logprob: float | None = None
    reverse_logprob: float | None = None
    reason: str | None = None
    fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "action": self.action,
            "position": self.position,
            "content": list(self.content) if self.content is not None else None,
            "space": self.space,
            "e_old": _energy_dict(self.e_old),
            "e_new": _energy_dict(self.e_new) if self.e_new is not None else None,
            "acceptance": self.acceptance,
            "u": self.u,
            "accepted": self.accepted,
            "forward_logprob": self.forward_logprob,
            "reverse_logprob": self.reverse_logprob,
            "reason": self.reason,
            "fallback": self.fallback,
        }


def _energy_dict(e: EnergyBreakdown) -> dict:
    return {"e_lm": e.e_lm, "e_v": e.e_v, "e_h": e.e_h, "total": e.total}


@dataclass(frozen=True)
class CorrectionResult:
    best: TokenSeq
    best_energy: EnergyBreakdown
    trace: tuple[TraceRecord, ...]
    accepted_states: tuple[tuple[int, TokenSeq, EnergyBreakdown], ...]


class EnergyCache:
    """Memoized energy evaluation keyed by token sequence (scorers are pure)."""

    def __init__(self, scorers: ScorerSuite, weights: EnergyWeights):
        self.scorers = scorers
        self.weights = weights
        self._cache: dict[TokenSeq, EnergyBreakdown] = {}

    def __call__(self, state: EditState) -> EnergyBreakdown:
        cached = self._cache.get(state.tokens)
        if cached is None:
            cached = total_energy(state, self.scorers.fluency, self.scorers.verifier, self.weights)
            self._cache[state.tokens] = cached
        return cached


def step(
    state: EditState,
    e_old: EnergyBreakdown,
    kernel: ProposalKernel,
    energy: EnergyCache,
    rng: np.random.Generator,
    iteration: int = 0,
) -> tuple[EditState, EnergyBreakdown, TraceRecord]:
    """One propose-accept cycle; failed proposals become recorded rejections."""
    try:
        prop: Proposal | None = kernel.propose(state, rng)
    except ProposalRejected as rej:
        u = float(rng.random())
        record = TraceRecord(
            iteration=iteration,
            action=rej.kind.value if rej.kind else None,
            position=rej.index,
            content=rej.content,
            space=None,
            e_old=e_old,
            e_new=None,
            acceptance=0.0,
            u=u,
            accepted=False,
            reason=rej.reason,
        )
        return state, e_old, record

    e_new = energy(prop.new_state)
    a = acceptance_ratio(e_old, e_new, prop.forward_logprob, prop.reverse_logprob)
    u = float(rng.random())
    accepted = u < a
    record = TraceRecord(
        iteration=iteration,
        action=prop.action.kind.value,
        position=prop.action.index,
        content=prop.action.content,
        space=prop.action.space.value,
        e_old=e_old,
        e_new=e_new,
        acceptance=a,
        u=u,
        accepted=accepted,
        forward_logprob=prop.forward_logprob,
        reverse_logprob=prop.reverse_logprob,
        fallback=prop.fallback,
    )
    if accepted:
        return prop.new_state, e_new, record
    return state, e_old, record


def run(
    claim: TokenSeq,
    evidence: EvidenceSet,
    scorers: ScorerSuite,
    proposer: Proposer,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
) -> CorrectionResult:
    """Run the correction chain from ``claim`` and rank accepted states.

    The result's ``best`` is the minimum-total-energy state among everything
    the chain accepted, plus the input claim itself unless
    ``include_initial_in_ranking`` is off; ties keep the earliest state, so
    an already-supported claim is returned unchanged.
    """
    if rng is None:
        rng = chain_rng(config.seed)
    state = make_state(claim, evidence)
    kernel = ProposalKernel(
        proposer=proposer,
        saliency=scorers.saliency,
        alpha=config.alpha,
        max_tokens=config.max_tokens,
    )
    energy = EnergyCache(scorers, config.weights)
    e_cur = energy(state)

    trace: list[TraceRecord] = []
    accepted: list[tuple[int, TokenSeq, EnergyBreakdown]] = []
    pool: list[tuple[int, TokenSeq, EnergyBreakdown]] = []
    if config.include_initial_in_ranking:
        pool.append((0, state.tokens, e_cur))

    for it in range(1, config.iterations + 1):
        state, e_cur, record = step(state, e_cur, kernel, energy, rng, iteration=it)
        trace.append(record)
        if record.accepted:
            accepted.append((it, state.tokens, e_cur))

    pool.extend(accepted)
    if not pool:  # only possible when the initial state is excluded
        pool.append((0, claim, energy(make_state(claim, evidence))))
    best_it, best_tokens, best_e = pool[0]
    for it, tokens, e in pool[1:]:
        if e.total < best_e.total:
            best_it, best_tokens, best_e = it, tokens, e
    return CorrectionResult(
        best=best_tokens,
        best_energy=best_e,
        trace=tuple(trace),
        accepted_states=tuple(accepted),
    )
