"""Synthetic claim/evidence instances with one planted entity error.

Each instance is built around a fixed skeleton: a determiner, two covered
anchor words, a preposition, a two-token place entity, and a covered tail
("The old fort at Wren Hollow has gates"). The refuted variant plants a
wrong entity in the claim while the evidence names the correct one; the
gold correction is the single entity swap. The tail content after the
entity is deliberate: deleting the entity then shifts the tail and pays a
large positional penalty, so outright deletion never beats the swap.

The suite scorers are the deterministic reference implementations with
parameters chosen for this corpus (documented in ``build_suite_scorers``):
the fluency model trains on a background corpus containing the claim frame
for correct, wrong, and decoy entities alike, so fluency is neutral about
the swap and the verifier term alone must pay for the edit - which is what
makes the no-verifier ablation collapse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ClaimInstance
from .engine import CorrectionResult, EnergyCache, SamplerConfig, chain_rng, run
from .proposal import NGramProposer, ProposalKernel, Proposer
from .scorers import (
    LexicalVerifier,
    NGramMLM,
    OcclusionSaliency,
    ScorerSuite,
    UniformSaliency,
)
from .state import EditState, EvidenceSet, TokenSeq, build_evidence, detokenize, make_state

SUITE_VERIFIER_STEEPNESS = 25.0
SUITE_VERIFIER_MIDPOINT = 0.8
SUITE_FLUENCY_SMOOTHING = 0.03
SUITE_BACKGROUND_REPEATS = 2
SUITE_PROPOSER_SMOOTHING = 0.3
SUITE_EVIDENCE_REPEATS = 4

_FIRST = (
    "Arden", "Bryce", "Calder", "Doran", "Elwood", "Fenwick", "Gorse", "Halden",
    "Inver", "Jarrow", "Kelsey", "Lorimer", "Marden", "Norwick", "Orman", "Penrose",
    "Quarry", "Rexford", "Selwyn", "Talmage", "Ulverton", "Varden", "Wrenfield", "Yarrow",
    "Zellwood", "Ashford", "Birkdale", "Corwin", "Dunmore", "Eastval",
)
_SECOND = (
    "Hollow", "Falls", "Ridge", "Vale", "Crossing", "Point", "Haven", "Moor",
    "Gate", "Bluff", "Creek", "Shore", "Glen", "Heath", "Mills", "Bend",
    "Fields", "Cliffs", "Marsh", "Downs", "Spring", "Knoll", "Banks", "Reach",
    "Hill", "Ford", "Green", "Lane", "Rise", "Wharf",
)
_ANCHORS = (
    ("old", "fort", "gates"),
    ("tall", "tower", "spires"),
    ("stone", "bridge", "arches"),
    ("quiet", "harbor", "piers"),
    ("white", "chapel", "bells"),
    ("round", "keep", "walls"),
    ("iron", "mill", "wheels"),
    ("brick", "depot", "rails"),
)
_PREPS = ("at", "near", "by", "in")
_MIDS = ("has", "had")


def _entity(index: int) -> TokenSeq:
    return (_FIRST[index % len(_FIRST)], _SECOND[index % len(_SECOND)])


@dataclass(frozen=True)
class SyntheticInstance:
    instance: ClaimInstance
    claim_tokens: TokenSeq
    gold_tokens: TokenSeq
    passages: tuple[TokenSeq, ...]
    background: tuple[TokenSeq, ...]
    decoy: TokenSeq

    def evidence(self) -> EvidenceSet:
        return build_evidence(self.passages, self.claim_tokens, extra_entities=(self.decoy,))


def _frame(anchor: tuple[str, str, str], prep: str, mid: str, entity: TokenSeq) -> TokenSeq:
    a1, a2, tail = anchor
    return ("The", a1, a2, prep) + tuple(entity) + (mid, tail)


def generate_instances(
    n: int, seed: int = 0, supported: bool = False
) -> list[SyntheticInstance]:
    """Deterministic bank of instances; ``supported`` swaps the planted
    error out, producing claims the engine must leave untouched."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 777))))
    out: list[SyntheticInstance] = []
    n_entities = min(len(_FIRST), len(_SECOND))
    for i in range(n):
        idx = rng.permutation(n_entities)[:3]
        correct, wrong, decoy = (_entity(int(j)) for j in idx)
        anchor = _ANCHORS[int(rng.integers(0, len(_ANCHORS)))]
        prep = _PREPS[int(rng.integers(0, len(_PREPS)))]
        mid = _MIDS[int(rng.integers(0, len(_MIDS)))]

        gold = _frame(anchor, prep, mid, correct)
        claim = gold if supported else _frame(anchor, prep, mid, wrong)
        passage = _frame(anchor, prep, mid, correct)
        passages = (passage,) * SUITE_EVIDENCE_REPEATS
        background = tuple(
            _frame(anchor, prep, mid, ent) for ent in (correct, wrong, decoy)
        )
        label = "SUPPORTED" if supported else "REFUTED"
        inst = ClaimInstance(
            id=f"syn-{label.lower()}-{i:03d}",
            claim=detokenize(claim),
            evidence=tuple(detokenize(p) for p in passages),
            gold=detokenize(gold),
            label=label,
        )
        out.append(
            SyntheticInstance(
                instance=inst,
                claim_tokens=claim,
                gold_tokens=gold,
                passages=passages,
                background=background,
                decoy=decoy,
            )
        )
    return out


def build_suite_scorers(
    si: SyntheticInstance, position_sampling: str = "saliency"
) -> tuple[ScorerSuite, Proposer]:
    """Reference scorers parameterized for the synthetic corpus.

    Fluency trains on the background frames only (swap-neutral by
    construction); the proposer trains on the evidence passages, which is
    where the correct entity's collocations live; the verifier runs steep
    (25) with a high midpoint (0.8) so one uncovered entity among a handful
    of content words costs several nats.
    """
    evidence = si.evidence()
    vocab: set[str] = set(si.claim_tokens) | set(evidence.gazetteer_tokens)
    for p in si.passages:
        vocab.update(p)
    for s in si.background:
        vocab.update(s)
    extra = tuple(sorted(vocab))
    fluency = NGramMLM(
        corpus=si.background * SUITE_BACKGROUND_REPEATS,
        order=3,
        k=SUITE_FLUENCY_SMOOTHING,
        extra_vocab=extra,
    )
    verifier = LexicalVerifier(
        steepness=SUITE_VERIFIER_STEEPNESS, midpoint=SUITE_VERIFIER_MIDPOINT
    )
    saliency = OcclusionSaliency(verifier) if position_sampling == "saliency" else UniformSaliency()
    proposer = NGramProposer(
        corpus=si.passages, order=2, k=SUITE_PROPOSER_SMOOTHING, extra_vocab=extra
    )
    return ScorerSuite(fluency=fluency, verifier=verifier, saliency=saliency), proposer


def correct_synthetic(
    si: SyntheticInstance,
    config: SamplerConfig,
    position_sampling: str = "saliency",
) -> CorrectionResult:
    scorers, proposer = build_suite_scorers(si, position_sampling=position_sampling)
    rng = chain_rng(config.seed, si.instance.id)
    return run(si.claim_tokens, si.evidence(), scorers, proposer, config, rng=rng)


def best_at_iteration(
    result: CorrectionResult, initial: TokenSeq, initial_energy_total: float, k: int
) -> TokenSeq:
    """Ranking restricted to the first k iterations (initial state included)."""
    best_tokens, best_total = initial, initial_energy_total
    for it, tokens, e in result.accepted_states:
        if it <= k and e.total < best_total:
            best_tokens, best_total = tokens, e.total
    return best_tokens


def correction_rates(
    instances: list[SyntheticInstance],
    config: SamplerConfig,
    position_sampling: str = "saliency",
    checkpoints: tuple[int, ...] = (15, 20),
) -> dict[int, float]:
    """Fraction of instances whose ranked-best state equals gold at each
    iteration checkpoint."""
    hits = {k: 0 for k in checkpoints}
    for si in instances:
        result = correct_synthetic(si, config, position_sampling=position_sampling)
        scorers, _ = build_suite_scorers(si, position_sampling=position_sampling)
        cache = EnergyCache(scorers, config.weights)
        e0 = cache(make_state(si.claim_tokens, si.evidence()))
        for k in checkpoints:
            if best_at_iteration(result, si.claim_tokens, e0.total, k) == si.gold_tokens:
                hits[k] += 1
    return {k: hits[k] / len(instances) for k in checkpoints}


def enumerate_neighborhood(
    claim: TokenSeq,
    evidence: EvidenceSet,
    scorers: ScorerSuite,
    proposer: Proposer,
    config: SamplerConfig,
    depth: int = 2,
) -> dict[TokenSeq, float]:
    """Exhaustive kernel-reachable states within ``depth`` edits of the
    claim, mapped to total energy. The independent check that a correction
    is the unique minimizer of the target the sampler optimizes."""
    from .state import apply_edit, segment

    kernel = ProposalKernel(proposer=proposer, saliency=scorers.saliency, alpha=config.alpha)
    energy = EnergyCache(scorers, config.weights)

    def as_state(tokens: TokenSeq) -> EditState:
        return EditState(
            tokens=tokens,
            segmentation=segment(tokens, evidence.sorted_gazetteer),
            original=claim,
            evidence=evidence,
        )

    frontier = {claim}
    seen: dict[TokenSeq, float] = {claim: energy(as_state(claim)).total}
    for _ in range(depth):
        next_frontier: set[TokenSeq] = set()
        for tokens in frontier:
            st = as_state(tokens)
            for action, _g in kernel.enumerate_actions(st):
                new_st = apply_edit(st, action)
                if new_st.tokens not in seen:
                    seen[new_st.tokens] = energy(new_st).total
                    next_frontier.add(new_st.tokens)
        frontier = next_frontier
    return seen


def unique_minimizer(
    claim: TokenSeq,
    gold: TokenSeq,
    evidence: EvidenceSet,
    scorers: ScorerSuite,
    proposer: Proposer,
    config: SamplerConfig,
    depth: int = 2,
) -> bool:
    landscape = enumerate_neighborhood(claim, evidence, scorers, proposer, config, depth=depth)
    gold_energy = landscape.get(gold)
    if gold_energy is None:
        return False
    return all(gold_energy < e for tokens, e in landscape.items() if tokens != gold)


def is_unique_minimizer(
    si: SyntheticInstance, config: SamplerConfig, depth: int = 2
) -> bool:
    scorers, proposer = build_suite_scorers(si)
    return unique_minimizer(
        si.claim_tokens, si.gold_tokens, si.evidence(), scorers, proposer, config, depth=depth
    )
