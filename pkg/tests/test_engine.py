import math
from collections import Counter

import pytest

from veriedit.energy import EnergyBreakdown, EnergyWeights
from veriedit.engine import (
    EnergyCache,
    SamplerConfig,
    acceptance_ratio,
    chain_rng,
    run,
    step,
)
from veriedit.proposal import NGramProposer, ProposalKernel
from veriedit.scorers import LexicalVerifier, NGramMLM, OcclusionSaliency, ScorerSuite, UniformSaliency
from veriedit.state import build_evidence, make_state


def toks(text):
    return tuple(text.split())


def breakdown(total):
    return EnergyBreakdown(e_lm=total, e_v=0.0, e_h=0.0, total=total)


class TestAcceptanceRatio:
    def test_identity(self):
        assert acceptance_ratio(breakdown(2.0), breakdown(2.0), -1.0, -1.0) == 1.0

    def test_energy_drop_dominates(self):
        got = acceptance_ratio(breakdown(2.0), breakdown(1.0), math.log(0.1), math.log(0.05))
        assert got == 1.0

    def test_uphill_symmetric_proposal(self):
        got = acceptance_ratio(breakdown(1.0), breakdown(2.0), -1.0, -1.0)
        assert got == pytest.approx(1 / math.e, abs=1e-12)

    def test_clamped(self):
        assert acceptance_ratio(breakdown(-1e9), breakdown(1e9), 0.0, 0.0) >= 0.0


def tiny_setup(text="a b c", passages=("a b c",), gaz=(), weights=EnergyWeights()):
    claim = toks(text)
    evidence = build_evidence([toks(p) for p in passages], claim,
                              extra_entities=[toks(g) for g in gaz])
    vocab = tuple(sorted({t for p in evidence.passages for t in p} | set(claim)
                         | set(evidence.gazetteer_tokens)))
    fluency = NGramMLM(corpus=evidence.passages, order=2, k=1.0, extra_vocab=vocab)
    verifier = LexicalVerifier()
    scorers = ScorerSuite(fluency, verifier, OcclusionSaliency(verifier))
    proposer = NGramProposer(corpus=evidence.passages, order=2, k=1.0, extra_vocab=vocab)
    return claim, evidence, scorers, proposer


class TestStep:
    def test_rejected_step_keeps_state(self):
        claim, evidence, scorers, proposer = tiny_setup()
        state = make_state(claim, evidence)
        kern = ProposalKernel(proposer=proposer, saliency=scorers.saliency)
        cache = EnergyCache(scorers, EnergyWeights())
        e0 = cache(state)
        rng = chain_rng(0)
        for it in range(50):
            new_state, e, rec = step(state, e0, kern, cache, rng, it)
            if not rec.accepted:
                assert new_state.tokens == state.tokens
                assert e == e0
                return
        pytest.fail("no rejection observed")

    def test_trace_invariant_u_lt_a(self):
        claim, evidence, scorers, proposer = tiny_setup(gaz=("b c",))
        state = make_state(claim, evidence)
        kern = ProposalKernel(proposer=proposer, saliency=scorers.saliency)
        cache = EnergyCache(scorers, EnergyWeights())
        e = cache(state)
        rng = chain_rng(42)
        for it in range(300):
            state, e, rec = step(state, e, kern, cache, rng, it)
            assert rec.accepted == (rec.u < rec.acceptance)

    def test_accepted_when_ratio_is_one(self):
        claim, evidence, scorers, proposer = tiny_setup()
        state = make_state(claim, evidence)
        kern = ProposalKernel(proposer=proposer, saliency=scorers.saliency)
        cache = EnergyCache(scorers, EnergyWeights())
        e = cache(state)
        rng = chain_rng(3)
        seen = False
        for it in range(200):
            state, e, rec = step(state, e, kern, cache, rng, it)
            if rec.acceptance == 1.0:
                assert rec.accepted
                seen = True
        assert seen

    def test_fixed_seed_identical_trace(self):
        def drive():
            claim, evidence, scorers, proposer = tiny_setup()
            state = make_state(claim, evidence)
            kern = ProposalKernel(proposer=proposer, saliency=scorers.saliency)
            cache = EnergyCache(scorers, EnergyWeights())
            e = cache(state)
            rng = chain_rng(99)
            out = []
            for it in range(40):
                state, e, rec = step(state, e, kern, cache, rng, it)
                out.append(rec)
            return out
        assert drive() == drive()


class TestRun:
    def test_initial_state_wins_when_nothing_accepted(self):
        claim, evidence, scorers, proposer = tiny_setup()
        config = SamplerConfig(iterations=1, seed=0)
        result = run(claim, evidence, scorers, proposer, config)
        if not result.accepted_states:
            assert result.best == claim

    def test_best_is_minimum_over_pool(self):
        claim, evidence, scorers, proposer = tiny_setup(gaz=("b c",))
        config = SamplerConfig(iterations=30, seed=5)
        result = run(claim, evidence, scorers, proposer, config)
        cache = EnergyCache(scorers, EnergyWeights())
        e0 = cache(make_state(claim, evidence))
        totals = [e.total for _, _, e in result.accepted_states] + [e0.total]
        assert result.best_energy.total == pytest.approx(min(totals), abs=1e-12)

    def test_two_runs_identical(self):
        claim, evidence, scorers, proposer = tiny_setup(gaz=("b c",))
        config = SamplerConfig(iterations=25, seed=1234)
        a = run(claim, evidence, scorers, proposer, config)
        b = run(claim, evidence, scorers, proposer, config)
        assert a.trace == b.trace
        assert a.best == b.best

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(iterations=0)
        with pytest.raises(ValueError):
            SamplerConfig(alpha=1.5)

    def test_planted_entity_error_recovered_across_seeds(self):
        """Single planted entity error with evidence naming the fix: the
        exact swap must be recovered within the 20-iteration budget for at
        least 90 of 100 seeds, and an exhaustive 2-edit enumeration must
        confirm the swap is the unique energy minimizer."""
        from veriedit.reference import build_reference_scorers
        from veriedit.state import build_evidence, tokenize
        from veriedit.synthetic import unique_minimizer

        claim = tokenize("One True Thing is a German film.")
        gold = tokenize("One True Thing is an American film.")
        passages = [tokenize("One True Thing is an American drama film.")] + [
            tokenize("In summary One True Thing is an American film.")
        ] * 4
        evidence = build_evidence(
            passages, claim,
            extra_entities=[tokenize("a German film"), tokenize("an American film")],
        )
        scorers, proposer = build_reference_scorers(
            claim,
            evidence,
            smoothing=0.03,
            proposer_smoothing=0.05,
            fluency_corpus=list(evidence.passages) + [claim],
            verifier_steepness=25.0,
            verifier_midpoint=0.95,
        )
        config = SamplerConfig(iterations=20, seed=0)
        assert unique_minimizer(claim, gold, evidence, scorers, proposer, config, depth=2)
        hits = sum(
            run(claim, evidence, scorers, proposer, SamplerConfig(iterations=20, seed=s),
                rng=chain_rng(s)).best == gold
            for s in range(100)
        )
        assert hits >= 90

    def test_hamming_only_energy_concentrates_on_original(self):
        """With the distance term alone, the target density peaks at the
        original claim; after 10^4 steps on a 3-token toy the most visited
        state must be the start."""
        claim, evidence, scorers, proposer = tiny_setup(
            "a b c", passages=("a b c", "b a c"))
        weights = EnergyWeights(0.0, 0.0, 1.0)
        state = make_state(claim, evidence)
        kern = ProposalKernel(proposer=proposer, saliency=UniformSaliency(), max_tokens=3)
        cache = EnergyCache(scorers, weights)
        e = cache(state)
        rng = chain_rng(7)
        visits = Counter()
        for it in range(10_000):
            state, e, _ = step(state, e, kern, cache, rng, it)
            visits[state.tokens] += 1
        assert visits.most_common(1)[0][0] == claim
