import math

import pytest

from scorerd.protocol import RequestError
from scorerd.server import ScorerService, SidecarConfig


@pytest.fixture(scope="module")
def service():
    return ScorerService(SidecarConfig())


EVIDENCE = ["Paris is the capital of France", "The Seine crosses Paris"]


class TestVerify:
    def test_prob_in_open_interval(self, service):
        out = service.handle("verify", {"claim": "Paris is in France", "evidence": EVIDENCE})
        assert 0.0 < out["prob"] < 1.0

    def test_deterministic(self, service):
        payload = {"claim": "Paris is in Germany", "evidence": EVIDENCE}
        assert service.handle("verify", payload) == service.handle("verify", payload)

    def test_supported_scores_above_contradicted(self, service):
        good = service.handle("verify", {"claim": "Paris is the capital", "evidence": EVIDENCE})
        bad = service.handle("verify", {"claim": "Berlin is the capital", "evidence": EVIDENCE})
        assert good["prob"] > bad["prob"]

    def test_overlong_evidence_truncated_never_claim(self):
        service = ScorerService(SidecarConfig(max_len=16))
        claim = "the old fort stands near the gray sea"
        out = service.handle(
            "verify", {"claim": claim, "evidence": ["word " * 50, "more words here"]}
        )
        assert out.get("truncated") is True

    def test_missing_claim_rejected(self, service):
        with pytest.raises(RequestError):
            service.handle("verify", {"evidence": []})


class TestFluency:
    def test_nonpositive_and_finite(self, service):
        out = service.handle("fluency", {"claim": "the fort stands near the sea"})
        assert out["pseudo_loglik"] <= 0.0
        assert math.isfinite(out["pseudo_loglik"])

    def test_empty_claim_rejected(self, service):
        with pytest.raises(RequestError):
            service.handle("fluency", {"claim": "   "})


class TestSaliency:
    def test_length_matches_tokens(self, service):
        claim = "Paris is the capital of Germany"
        out = service.handle("saliency", {"claim": claim, "evidence": EVIDENCE})
        assert len(out["saliency"]) == len(claim.split())
        assert all(v >= 0 for v in out["saliency"])

    def test_contradicted_entity_carries_max_mass(self, service):
        claim = "Paris is the capital of Germany"
        out = service.handle("saliency", {"claim": claim, "evidence": EVIDENCE})
        scores = out["saliency"]
        assert scores.index(max(scores)) == claim.split().index("Germany")


class TestPropose:
    def test_distribution_sums_to_one(self, service):
        out = service.handle(
            "propose_token",
            {"masked_claim": "Paris is the [MASK] of France", "evidence": EVIDENCE, "top_k": 10},
        )
        assert len(out["tokens"]) == len(out["probs"]) == 10
        assert abs(sum(out["probs"]) - 1.0) <= 1e-6

    def test_zero_masks_rejected(self, service):
        with pytest.raises(RequestError) as err:
            service.handle("propose_token", {"masked_claim": "no mask", "evidence": []})
        assert err.value.code == "no_mask"

    def test_two_masks_rejected(self, service):
        with pytest.raises(RequestError):
            service.handle(
                "propose_token", {"masked_claim": "[MASK] and [MASK]", "evidence": []}
            )

    def test_single_candidate_normalizes_to_one(self, service):
        out = service.handle(
            "score_entities",
            {"masked_claim": "It is at [MASK]", "evidence": ["x"], "candidates": ["Bryce Hollow"]},
        )
        [score] = out["scores"]
        assert math.isfinite(score)
        # one candidate: softmax over the returned scores is exactly 1
        assert math.exp(score - score) == 1.0

    def test_entity_scores_finite_per_candidate(self, service):
        out = service.handle(
            "score_entities",
            {
                "masked_claim": "It is at [MASK]",
                "evidence": ["go to Bryce Hollow"],
                "candidates": ["Bryce Hollow", "Cedar Falls", "Dunmore Ridge"],
            },
        )
        assert len(out["scores"]) == 3
        assert all(math.isfinite(s) for s in out["scores"])

    def test_evidence_collocation_preferred(self, service):
        out = service.handle(
            "score_entities",
            {
                "masked_claim": "It is at [MASK]",
                "evidence": ["people go to Bryce Hollow daily"],
                "candidates": ["Bryce Hollow", "Cedar Falls"],
            },
        )
        assert out["scores"][0] > out["scores"][1]
