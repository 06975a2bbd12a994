"""Scikit-learn style front door for the correction engine."""

from __future__ import annotations

from typing import Sequence

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .data import ClaimInstance
from .energy import EnergyWeights
from .engine import CorrectionResult, SamplerConfig, chain_rng, run
from .reference import build_reference_scorers
from .state import build_evidence, detokenize, tokenize


def coerce_instance(obj) -> ClaimInstance:
    if isinstance(obj, ClaimInstance):
        return obj
    if isinstance(obj, dict):
        return ClaimInstance(
            id=str(obj.get("id", "")),
            claim=obj["claim"],
            evidence=tuple(obj.get("evidence", ())),
            gold=obj.get("gold"),
            label=obj.get("label"),
        )
    raise TypeError(f"expected ClaimInstance or dict, got {type(obj).__name__}")


def check_instances(X) -> list[ClaimInstance]:
    if isinstance(X, (str, bytes)):
        raise TypeError("X must be a sequence of instances, not a string")
    instances = [coerce_instance(x) for x in X]
    for inst in instances:
        if not inst.claim.strip():
            raise ValueError(f"instance {inst.id!r} has an empty claim")
    return instances


class ClaimCorrector(BaseEstimator, TransformerMixin):
    """Corrects claims toward their evidence with the sampling engine.

    fit() validates parameters and records the training vocabulary size;
    transform()/predict() map instances (dicts or ClaimInstance rows with
    ``claim`` and ``evidence``) to corrected claim strings. Scorers are
    rebuilt per instance from its own evidence, so transform is
    embarrassingly parallel and deterministic given ``seed``.
    """

    def __init__(
        self,
        iterations: int = 20,
        seed: int = 0,
        alpha: float = 0.5,
        w_lm: float = 1.0,
        w_v: float = 1.0,
        w_h: float = 1.0,
        include_initial: bool = True,
        position_sampling: str = "saliency",
        ngram_order: int = 3,
        smoothing: float = 1.0,
        proposer_order: int = 2,
        proposer_smoothing: float = 1.0,
        verifier_steepness: float = 10.0,
        verifier_midpoint: float = 0.5,
        extra_entities: Sequence[str] = (),
        max_tokens: int | None = None,
    ):
        self.iterations = iterations
        self.seed = seed
        self.alpha = alpha
        self.w_lm = w_lm
        self.w_v = w_v
        self.w_h = w_h
        self.include_initial = include_initial
        self.position_sampling = position_sampling
        self.ngram_order = ngram_order
        self.smoothing = smoothing
        self.proposer_order = proposer_order
        self.proposer_smoothing = proposer_smoothing
        self.verifier_steepness = verifier_steepness
        self.verifier_midpoint = verifier_midpoint
        self.extra_entities = extra_entities
        self.max_tokens = max_tokens

    def _config(self) -> SamplerConfig:
        return SamplerConfig(
            iterations=self.iterations,
            seed=self.seed,
            alpha=self.alpha,
            weights=EnergyWeights(w_lm=self.w_lm, w_v=self.w_v, w_h=self.w_h),
            include_initial_in_ranking=self.include_initial,
            max_tokens=self.max_tokens,
        )

    def fit(self, X, y=None):
        instances = check_instances(X)
        self._config()  # parameter validation
        vocab: set[str] = set()
        for inst in instances:
            vocab.update(tokenize(inst.claim))
            for passage in inst.evidence:
                vocab.update(tokenize(passage))
        self.vocabulary_size_ = len(vocab)
        self.n_instances_ = len(instances)
        return self

    def correct_instance(self, instance) -> CorrectionResult:
        inst = coerce_instance(instance)
        claim = tokenize(inst.claim)
        evidence = build_evidence(
            (tokenize(p) for p in inst.evidence),
            claim,
            extra_entities=(tokenize(e) for e in self.extra_entities),
        )
        scorers, proposer = build_reference_scorers(
            claim,
            evidence,
            ngram_order=self.ngram_order,
            smoothing=self.smoothing,
            proposer_order=self.proposer_order,
            proposer_smoothing=self.proposer_smoothing,
            verifier_steepness=self.verifier_steepness,
            verifier_midpoint=self.verifier_midpoint,
            position_sampling=self.position_sampling,
        )
        rng = chain_rng(self.seed, inst.id or inst.claim)
        return run(claim, evidence, scorers, proposer, self._config(), rng=rng)

    def transform(self, X) -> list[str]:
        if not hasattr(self, "vocabulary_size_"):
            raise NotFittedError("ClaimCorrector is not fitted; call fit first")
        return [detokenize(self.correct_instance(inst).best) for inst in check_instances(X)]

    def predict(self, X) -> list[str]:
        return self.transform(X)
