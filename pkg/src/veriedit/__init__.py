"""Evidence-guided claim correction by Metropolis-Hastings edit sampling."""

from .energy import EnergyBreakdown, EnergyWeights, hamming, pi_ratio, total_energy
from .engine import (
    CorrectionResult,
    SamplerConfig,
    TraceRecord,
    acceptance_ratio,
    chain_rng,
    run,
    step,
)
from .estimator import ClaimCorrector
from .metrics import CorpusReport, SariScore, evaluate_corpus, rouge2, sari
from .proposal import (
    NGramProposer,
    Proposal,
    ProposalKernel,
    Proposer,
    PositionDistribution,
    position_distribution,
    sample_action,
)
from .scorers import (
    LexicalVerifier,
    NGramMLM,
    OcclusionSaliency,
    ScorerSuite,
    UniformSaliency,
)
from .state import (
    ActionKind,
    EditAction,
    EditState,
    EvidenceSet,
    Segmentation,
    Span,
    SpaceKind,
    apply_edit,
    build_evidence,
    detokenize,
    harvest_entities,
    make_state,
    segment,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "ClaimCorrector",
    "CorpusReport",
    "CorrectionResult",
    "EditAction",
    "EditState",
    "EnergyBreakdown",
    "EnergyWeights",
    "EvidenceSet",
    "LexicalVerifier",
    "NGramMLM",
    "NGramProposer",
    "OcclusionSaliency",
    "PositionDistribution",
    "Proposal",
    "ProposalKernel",
    "Proposer",
    "SamplerConfig",
    "SariScore",
    "ScorerSuite",
    "Segmentation",
    "SpaceKind",
    "Span",
    "TraceRecord",
    "UniformSaliency",
    "acceptance_ratio",
    "apply_edit",
    "build_evidence",
    "chain_rng",
    "detokenize",
    "evaluate_corpus",
    "hamming",
    "harvest_entities",
    "make_state",
    "pi_ratio",
    "position_distribution",
    "rouge2",
    "run",
    "sample_action",
    "sari",
    "segment",
    "step",
    "tokenize",
    "total_energy",
]
