"""Acceptance gates for the whole package.

Each test exercises one release criterion at its pinned tolerance and
prints a PASS line on success (run with ``pytest tests/test_acceptance.py
-v -s`` to see them). Tolerances live here, not in helper code, so they
cannot drift.
"""

import json
import math
import subprocess
import sys
import time

import pytest

from veriedit.data import write_instances
from veriedit.energy import EnergyWeights
from veriedit.engine import SamplerConfig, chain_rng
from veriedit.metrics import sari
from veriedit.oracle import (
    MUTATIONS,
    build_exact_kernel,
    builtin_setup,
    detailed_balance_violation,
    empirical_distribution_check,
    stationarity_residual,
)
from veriedit.proposal import NGramProposer, ProposalKernel, ProposalRejected
from veriedit.scorers import LexicalVerifier, OcclusionSaliency
from veriedit.state import apply_edit, build_evidence, make_state
from veriedit.synthetic import (
    correct_synthetic,
    correction_rates,
    generate_instances,
    is_unique_minimizer,
)

SELFCHECK_RUNTIME_LIMIT_S = 60.0
SYNTHETIC_RUNTIME_LIMIT_S = 300.0
STATIONARITY_TOL = 1e-6
BALANCE_TOL = 1e-9
EMPIRICAL_TV_TOL = 0.05
MUTATION_FLOOR = 1e-3
REVERSE_CONSISTENCY_TOL = 1e-12
CORRECTION_GATE = 0.90
PRESERVATION_GATE = 0.95
METRIC_TOL = 1e-9

SUITE_SEED = 7


def ok(line: str) -> None:
    print(f"PASS - {line}")


class TestKernelCorrectness:
    def test_selfcheck_criteria(self):
        t0 = time.perf_counter()
        space, suite, proposer, config = builtin_setup("full")
        kern = build_exact_kernel(space, suite, proposer, config)
        residual = stationarity_residual(kern.matrix, kern.energies)
        balance = detailed_balance_violation(kern.matrix, kern.energies)
        assert residual <= STATIONARITY_TOL
        assert balance <= BALANCE_TOL

        for mutation in MUTATIONS:
            mutated = build_exact_kernel(space, suite, proposer, config, mutation=mutation)
            mresidual = stationarity_residual(mutated.matrix, mutated.energies)
            assert mresidual > MUTATION_FLOOR, mutation

        tv = empirical_distribution_check(space, suite, proposer, config, 100_000)
        assert tv <= EMPIRICAL_TV_TOL

        elapsed = time.perf_counter() - t0
        assert elapsed <= SELFCHECK_RUNTIME_LIMIT_S
        ok(
            "kernel correctness: residual %.1e <= 1e-6, balance %.1e <= 1e-9, "
            "TV %.3f <= 0.05, 3 mutations detected, %.1fs <= 60s"
            % (residual, balance, tv, elapsed)
        )


class TestReverseConsistency:
    def test_ten_thousand_step_fuzz(self):
        rng = chain_rng(4242)
        verifier = LexicalVerifier()
        vocab_pool = ["red", "blue", "gate", "mill", "Arden", "Vale", "Bryce", "Hollow", "the"]
        gaz = [("Arden", "Vale"), ("Bryce", "Hollow")]
        checked = 0
        worst = 0.0
        while checked < 10_000:
            n = int(rng.integers(2, 7))
            claim = tuple(str(rng.choice(vocab_pool)) for _ in range(n))
            passages = [tuple(str(rng.choice(vocab_pool)) for _ in range(int(rng.integers(2, 6))))]
            evidence = build_evidence(passages, claim, extra_entities=gaz)
            vocab = tuple(sorted(set(claim) | set(evidence.gazetteer_tokens) | set(vocab_pool)))
            proposer = NGramProposer(corpus=evidence.passages, order=2, k=0.5, extra_vocab=vocab)
            kernel = ProposalKernel(proposer=proposer, saliency=OcclusionSaliency(verifier))
            state = make_state(claim, evidence)
            for _ in range(50):
                try:
                    prop = kernel.propose(state, rng)
                except ProposalRejected:
                    continue
                assert math.isfinite(prop.reverse_logprob)
                recomputed = kernel.action_logprob(prop.new_state, prop.reverse_action)
                diff = abs(prop.reverse_logprob - recomputed)
                worst = max(worst, diff)
                assert diff <= REVERSE_CONSISTENCY_TOL
                assert apply_edit(prop.new_state, prop.reverse_action).tokens == state.tokens
                checked += 1
                if checked >= 10_000:
                    break
                if rng.random() < 0.5:
                    state = prop.new_state
        ok(
            "reverse consistency: %d proposals, max |stored - recomputed| = %.1e <= 1e-12"
            % (checked, worst)
        )


class TestSyntheticCorrection:
    def test_planted_entity_errors(self):
        t0 = time.perf_counter()
        instances = generate_instances(100, seed=0)
        config = SamplerConfig(iterations=20, seed=SUITE_SEED)

        full = correction_rates(instances, config, "saliency", checkpoints=(15, 20))
        assert full[20] >= CORRECTION_GATE

        ablated = correction_rates(
            instances,
            SamplerConfig(iterations=20, seed=SUITE_SEED, weights=EnergyWeights(1.0, 0.0, 1.0)),
            "saliency",
            checkpoints=(20,),
        )
        assert ablated[20] < full[20]

        uniform = correction_rates(instances, config, "uniform", checkpoints=(15,))
        assert uniform[15] < full[15]

        # independent check on a sample: the gold swap uniquely minimizes the
        # energy over everything reachable within two edits
        for si in instances[:5]:
            assert is_unique_minimizer(si, config, depth=2)

        elapsed = time.perf_counter() - t0
        assert elapsed <= SYNTHETIC_RUNTIME_LIMIT_S
        ok(
            "synthetic correction: full@20 %.2f >= 0.90; no-verifier@20 %.2f < full; "
            "uniform@15 %.2f < saliency@15 %.2f; %.0fs <= 300s"
            % (full[20], ablated[20], uniform[15], full[15], elapsed)
        )


class TestPreservation:
    def test_supported_claims_kept(self):
        instances = generate_instances(100, seed=0, supported=True)
        config = SamplerConfig(iterations=20, seed=SUITE_SEED)
        kept = sum(
            correct_synthetic(si, config).best == si.claim_tokens for si in instances
        )
        assert kept / len(instances) >= PRESERVATION_GATE
        ok("preservation: %d/100 supported claims returned unchanged (>= 95)" % kept)


class TestMetricOracles:
    def test_hand_examples_and_fuzz(self):
        t = lambda s: tuple(s.split())
        got = sari(t("a b c"), t("a d c"), [t("a d c")], max_n=1)
        assert abs(got.keep_f1 - 1.0) <= METRIC_TOL
        assert abs(got.delete_f1 - 1.0) <= METRIC_TOL
        assert abs(got.add_f1 - 1.0) <= METRIC_TOL
        assert abs(got.final - 1.0) <= METRIC_TOL

        got = sari(t("a b c"), t("a b c"), [t("a d c")], max_n=1)
        assert abs(got.keep_f1 - 0.8) <= METRIC_TOL
        assert abs(got.add_f1) <= METRIC_TOL
        assert abs(got.delete_f1) <= METRIC_TOL
        assert abs(got.final - 0.8 / 3) <= METRIC_TOL

        got = sari(t("a b c"), t("a b c"), [t("a b c")], max_n=4)
        assert abs(got.final - 1.0) <= METRIC_TOL

        from veriedit.metrics import rouge2

        assert abs(rouge2(t("a b c"), t("a b c")) - 1.0) <= METRIC_TOL
        assert rouge2(t("a b"), t("c d")) == 0.0
        assert abs(rouge2(t("a b d"), t("a b c")) - 0.5) <= METRIC_TOL

        rng = chain_rng(99)
        vocab = ["a", "b", "c", "d"]
        for _ in range(10_000):
            s, o, r = (
                tuple(str(rng.choice(vocab)) for _ in range(int(rng.integers(1, 6))))
                for _ in range(3)
            )
            score = sari(s, o, [r], max_n=4)
            for v in (score.keep_f1, score.delete_f1, score.add_f1, score.final):
                assert 0.0 <= v <= 1.0
            assert abs(score.final - (score.keep_f1 + score.delete_f1 + score.add_f1) / 3) <= METRIC_TOL
        ok("metric oracles: hand-computed SARI/ROUGE-2 exact at 1e-9; 10^4 fuzzed triples in bounds")


class TestDeterminism:
    def test_cli_byte_identical(self, tmp_path):
        data = tmp_path / "in.jsonl"
        write_instances(data, [si.instance for si in generate_instances(6, seed=4)])
        outs, traces = [], []
        for tag in ("a", "b"):
            out, trace = tmp_path / f"out-{tag}.jsonl", tmp_path / f"trace-{tag}.jsonl"
            proc = subprocess.run(
                [
                    sys.executable, "-m", "veriedit.cli", "correct",
                    str(data), str(out), "--seed", "13", "--trace", str(trace),
                ],
                capture_output=True,
                text=True,
            )
            assert proc.returncode == 0, proc.stderr
            outs.append(out.read_bytes())
            traces.append(trace.read_bytes())
        assert outs[0] == outs[1]
        assert traces[0] == traces[1]
        rows = [json.loads(l) for l in outs[0].decode().splitlines()]
        assert len(rows) == 6
        ok("determinism: correct --seed 13 twice -> byte-identical outputs and traces")
