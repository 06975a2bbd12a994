"""The factorized transition kernel over token/entity edits.

A move from claim x to x' is sampled in three stages: a position (a unit
for delete/replace, a gap for insert), an action kind (uniform over insert,
delete, replace), and content (a vocabulary token in the token space, or a
candidate entity from the gazetteer in the entity space; insertions mix the
two spaces with weight ``alpha``). The product of the three stage
probabilities is the transition probability g(x'|x).

Acceptance needs the reverse probability g(x|x'), so every proposal carries
the reverse action (replace back, delete the inserted unit, or re-insert the
deleted content) with its log-probability evaluated on x' by the same code
path that scores forward moves. Edits whose reverse does not exist as a
single kernel action - e.g. when re-segmentation merges the edited span into
a larger entity - are rejected outright; since no probability can flow back
through a nonexistent reverse path, rejecting them keeps the chain exactly
balanced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .scorers import NGramTable, SaliencyModel
from .state import (
    ActionKind,
    EditAction,
    EditState,
    EmptyResultError,
    EvidenceSet,
    SpaceKind,
    TokenSeq,
    apply_edit,
)

LOG_THIRD = math.log(1.0 / 3.0)
_SMOOTH_REL = 1e-3


class NoCandidatesError(Exception):
    """Entity proposal requested but the candidate space is empty."""


@dataclass(frozen=True)
class ProposalRejected(Exception):
    """A sampled move that cannot become a valid proposal.

    The step is recorded as a rejection; the chain stays where it is.
    """

    reason: str
    kind: ActionKind | None = None
    index: int | None = None
    content: TokenSeq | None = None

    def __str__(self) -> str:
        return self.reason


@runtime_checkable
class Proposer(Protocol):
    """Content model: fills a masked slot from token or entity space."""

    def token_dist(
        self, left: TokenSeq, right: TokenSeq, evidence: EvidenceSet
    ) -> tuple[tuple[str, ...], np.ndarray]: ...

    def entity_scores(
        self,
        left: TokenSeq,
        right: TokenSeq,
        evidence: EvidenceSet,
        candidates: Sequence[TokenSeq],
    ) -> np.ndarray: ...


@dataclass
class NGramProposer:
    """Bidirectional n-gram fill-in model over a fixed vocabulary.

    ``token_dist`` mixes the forward and backward conditionals with equal
    weight, so it sums to exactly 1. ``entity_scores`` returns the mean
    per-token log-probability of each candidate spliced into the masked
    slot (length-normalized so short candidates carry no advantage).
    """

    corpus: tuple[TokenSeq, ...] = ()
    order: int = 2
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

    def _fwd_ctx(self, left: TokenSeq) -> tuple[str, ...]:
        return self.fwd.context(left, len(left))

    def _bwd_ctx(self, right: TokenSeq) -> tuple[str, ...]:
        rev = tuple(reversed(right))
        return self.bwd.context(rev, len(rev))

    def token_dist(
        self, left: TokenSeq, right: TokenSeq, evidence: EvidenceSet
    ) -> tuple[tuple[str, ...], np.ndarray]:
        probs = 0.5 * (self.fwd.dist(self._fwd_ctx(left)) + self.bwd.dist(self._bwd_ctx(right)))
        return self.vocab, probs

    def entity_scores(
        self,
        left: TokenSeq,
        right: TokenSeq,
        evidence: EvidenceSet,
        candidates: Sequence[TokenSeq],
    ) -> np.ndarray:
        scores = np.empty(len(candidates), dtype=float)
        for ci, cand in enumerate(candidates):
            fwd_seq = tuple(left) + tuple(cand)
            bwd_seq = tuple(reversed(right)) + tuple(reversed(cand))
            total = 0.0
            for t in range(len(cand)):
                lf = self.fwd.logprob(fwd_seq[len(left) + t], self.fwd.context(fwd_seq, len(left) + t))
                bt = len(right) + (len(cand) - 1 - t)
                lb = self.bwd.logprob(bwd_seq[bt], self.bwd.context(bwd_seq, bt))
                total += 0.5 * (lf + lb)
            scores[ci] = total / len(cand)
        return scores


@dataclass(frozen=True)
class PositionDistribution:
    """Edit-position probabilities: per unit for delete/replace, per gap for insert."""

    unit_probs: np.ndarray
    gap_probs: np.ndarray


def position_distribution(state: EditState, saliency: SaliencyModel) -> PositionDistribution:
    """Saliency-driven position sampling with an irreducibility floor.

    Token saliencies are floored by eps = 1e-3 * max(1, max saliency) and
    normalized; a unit's probability is the sum over its tokens, so
    multi-token entities aggregate the mass of all their tokens. Insertion
    gaps are uniform: saliency is defined for existing tokens, not gaps.
    """
    raw = saliency.token_saliency(state.tokens, state.evidence)
    if len(raw) != len(state.tokens):
        raise ValueError("saliency length must match token count")
    eps = _SMOOTH_REL * max(1.0, max(raw))
    token_probs = np.asarray(raw, dtype=float) + eps
    token_probs /= token_probs.sum()
    unit_probs = np.array(
        [token_probs[span.start : span.end].sum() for span in state.segmentation.units]
    )
    n_gaps = len(state.segmentation.units) + 1
    gap_probs = np.full(n_gaps, 1.0 / n_gaps)
    return PositionDistribution(unit_probs=unit_probs, gap_probs=gap_probs)


def sample_action(rng) -> ActionKind:
    """Uniform draw over the three edit kinds (one RNG call, floor of 3u)."""
    u = rng.random()
    return (ActionKind.INSERT, ActionKind.DELETE, ActionKind.REPLACE)[min(int(u * 3.0), 2)]


def categorical(rng, probs) -> int:
    """Inverse-CDF draw; independent of any library's choice() internals."""
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = np.exp(scores - scores.max())
    return shifted / shifted.sum()


@dataclass(frozen=True)
class Proposal:
    action: EditAction
    new_state: EditState
    forward_logprob: float
    reverse_logprob: float
    reverse_action: EditAction
    fallback: bool = False


@dataclass
class ProposalKernel:
    """Binds a proposer, a saliency model, and the mixture weight into g(.|.).

    One kernel instance serves one correction run (one claim + evidence);
    position distributions are memoized per token sequence. ``mutation`` is
    instrumentation for the exact-kernel self-checks: it corrupts one factor
    of the bookkeeping (never the sampling) so stationarity tests can prove
    they would catch the corresponding implementation bug. Valid values:
    "corrupt-reverse", "drop-alpha", "stale-p1".
    """

    proposer: Proposer
    saliency: SaliencyModel
    alpha: float = 0.5
    max_tokens: int | None = None
    mutation: str | None = None
    _pos_cache: dict[TokenSeq, PositionDistribution] = field(default_factory=dict, repr=False)

    def position_distribution(self, state: EditState) -> PositionDistribution:
        cached = self._pos_cache.get(state.tokens)
        if cached is None:
            cached = position_distribution(state, self.saliency)
            self._pos_cache[state.tokens] = cached
        return cached

    def candidates(self, state: EditState) -> tuple[TokenSeq, ...]:
        return state.evidence.sorted_gazetteer

    # -- mask contexts -----------------------------------------------------

    @staticmethod
    def _unit_context(state: EditState, unit_index: int) -> tuple[TokenSeq, TokenSeq]:
        span = state.segmentation.units[unit_index]
        return state.tokens[: span.start], state.tokens[span.end :]

    @staticmethod
    def _gap_position(state: EditState, gap_index: int) -> int:
        units = state.segmentation.units
        if gap_index < len(units):
            return units[gap_index].start
        return len(state.tokens)

    def _gap_context(self, state: EditState, gap_index: int) -> tuple[TokenSeq, TokenSeq]:
        pos = self._gap_position(state, gap_index)
        return state.tokens[:pos], state.tokens[pos:]

    # -- content probabilities ---------------------------------------------

    def _token_logprob(self, state: EditState, left: TokenSeq, right: TokenSeq, token: str) -> float:
        vocab, probs = self.proposer.token_dist(left, right, state.evidence)
        try:
            idx = vocab.index(token)
        except ValueError:
            return -math.inf
        p = float(probs[idx])
        return math.log(p) if p > 0 else -math.inf

    def _entity_logprob(
        self, state: EditState, left: TokenSeq, right: TokenSeq, content: TokenSeq
    ) -> float:
        cands = self.candidates(state)
        if not cands:
            return -math.inf
        probs = softmax(self.proposer.entity_scores(left, right, state.evidence, cands))
        try:
            idx = cands.index(tuple(content))
        except ValueError:
            return -math.inf
        return math.log(float(probs[idx]))

    def _insert_content_logprob(
        self, state: EditState, left: TokenSeq, right: TokenSeq, action: EditAction, drop_alpha: bool
    ) -> float:
        has_entities = bool(self.candidates(state))
        if action.space is SpaceKind.ENTITY:
            base = self._entity_logprob(state, left, right, action.content or ())
            weight = math.log(self.alpha) if has_entities else -math.inf
        else:
            token = (action.content or ("",))[0]
            base = self._token_logprob(state, left, right, token)
            # with an empty entity space the whole insertion mass is tokens
            weight = math.log(1.0 - self.alpha) if has_entities else 0.0
        if drop_alpha:
            weight = 0.0 if math.isfinite(weight) else weight
        return weight + base

    # -- action log-probability ---------------------------------------------

    def action_logprob(
        self,
        state: EditState,
        action: EditAction,
        *,
        drop_alpha: bool = False,
        pos_override: PositionDistribution | None = None,
    ) -> float:
        """log g for a fully specified action from ``state``.

        This is the single code path used for both forward moves and the
        reverse moves evaluated on the proposed state. ``pos_override``
        exists only for the stale-position mutation.
        """
        pos = pos_override or self.position_distribution(state)
        if action.kind is ActionKind.INSERT:
            vec = pos.gap_probs
        else:
            vec = pos.unit_probs
        idx = min(action.index, len(vec) - 1)
        lp = math.log(float(vec[idx])) + LOG_THIRD

        if action.kind is ActionKind.DELETE:
            return lp
        if action.kind is ActionKind.INSERT:
            left, right = self._gap_context(state, action.index)
            return lp + self._insert_content_logprob(state, left, right, action, drop_alpha)
        left, right = self._unit_context(state, action.index)
        if action.space is SpaceKind.ENTITY:
            return lp + self._entity_logprob(state, left, right, action.content or ())
        token = (action.content or ("",))[0]
        return lp + self._token_logprob(state, left, right, token)

    # -- reverse derivation --------------------------------------------------

    @staticmethod
    def _unit_at(state: EditState, start: int, end: int) -> int | None:
        for j, span in enumerate(state.segmentation.units):
            if span.start == start and span.end == end:
                return j
            if span.start > start:
                break
        return None

    def derive_reverse(
        self, state: EditState, action: EditAction, new_state: EditState
    ) -> EditAction | None:
        """The unique kernel action mapping new_state back to state, if any.

        Returns None when re-segmentation broke the unit correspondence
        (the edited span is no longer a whole unit, or a vacated gap fell
        inside an entity); such moves are rejected by the caller.
        """
        units = state.segmentation.units
        if action.kind is ActionKind.REPLACE:
            span = units[action.index]
            new_end = span.start + len(action.content or ())
            j = self._unit_at(new_state, span.start, new_end)
            if j is None:
                return None
            new_span = new_state.segmentation.units[j]
            old_content = state.unit_tokens(action.index)
            if new_span.is_entity:
                if len(old_content) < 2 or old_content not in state.evidence.gazetteer:
                    return None
                return EditAction(ActionKind.REPLACE, j, old_content, SpaceKind.ENTITY)
            if len(old_content) != 1:
                return None
            return EditAction(ActionKind.REPLACE, j, old_content, SpaceKind.TOKEN)

        if action.kind is ActionKind.INSERT:
            pos = self._gap_position(state, action.index)
            content = action.content or ()
            j = self._unit_at(new_state, pos, pos + len(content))
            if j is None:
                return None
            new_span = new_state.segmentation.units[j]
            if new_span.is_entity != (action.space is SpaceKind.ENTITY):
                return None
            return EditAction(ActionKind.DELETE, j, None, action.space)

        # DELETE: reverse is inserting the removed content at the vacated gap
        span = units[action.index]
        content = state.unit_tokens(action.index)
        new_units = new_state.segmentation.units
        gap = None
        for g in range(len(new_units) + 1):
            if self._gap_position(new_state, g) == span.start:
                gap = g
                break
        if gap is None:
            return None
        space = SpaceKind.ENTITY if span.is_entity else SpaceKind.TOKEN
        if space is SpaceKind.ENTITY and content not in state.evidence.gazetteer:
            return None
        reverse = EditAction(ActionKind.INSERT, gap, content, space)
        # inserting back must re-create exactly the deleted unit
        if self.derive_reverse(new_state, reverse, state) != EditAction(
            ActionKind.DELETE, action.index, None, space
        ):
            return None
        return reverse

    def logprob_pair(
        self, state: EditState, action: EditAction, new_state: EditState, reverse: EditAction
    ) -> tuple[float, float]:
        drop_alpha = self.mutation == "drop-alpha"
        fwd = self.action_logprob(state, action, drop_alpha=drop_alpha)
        if self.mutation == "stale-p1":
            rev = self.action_logprob(
                new_state, reverse, pos_override=self.position_distribution(state)
            )
        else:
            rev = self.action_logprob(new_state, reverse, drop_alpha=drop_alpha)
        if self.mutation == "corrupt-reverse" and action.kind is ActionKind.DELETE:
            rev += 0.1
        return fwd, rev

    # -- finishing a sampled action into a Proposal --------------------------

    def _finish(self, state: EditState, action: EditAction, fallback: bool = False) -> Proposal:
        new_state = apply_edit(state, action)
        if self.max_tokens is not None and len(new_state.tokens) > self.max_tokens:
            raise ProposalRejected("length_cap", action.kind, action.index, action.content)
        reverse = self.derive_reverse(state, action, new_state)
        if reverse is None:
            raise ProposalRejected("irreversible", action.kind, action.index, action.content)
        fwd, rev = self.logprob_pair(state, action, new_state, reverse)
        if not (math.isfinite(fwd) and math.isfinite(rev)):
            raise ProposalRejected("zero_reverse", action.kind, action.index, action.content)
        return Proposal(action, new_state, fwd, rev, reverse, fallback)

    def propose_replace(self, state: EditState, unit_index: int, rng) -> Proposal:
        span = state.segmentation.units[unit_index]
        left, right = self._unit_context(state, unit_index)
        fallback = False
        if span.is_entity:
            cands = self.candidates(state)
            if cands:
                probs = softmax(self.proposer.entity_scores(left, right, state.evidence, cands))
                content = cands[categorical(rng, probs)]
                space = SpaceKind.ENTITY
            else:
                # no entity space left: degrade to a whole-unit token replacement
                vocab, probs = self.proposer.token_dist(left, right, state.evidence)
                content = (vocab[categorical(rng, probs)],)
                space = SpaceKind.TOKEN
                fallback = True
        else:
            vocab, probs = self.proposer.token_dist(left, right, state.evidence)
            content = (vocab[categorical(rng, probs)],)
            space = SpaceKind.TOKEN
        return self._finish(state, EditAction(ActionKind.REPLACE, unit_index, content, space), fallback)

    def propose_insert(self, state: EditState, gap_index: int, rng) -> Proposal:
        left, right = self._gap_context(state, gap_index)
        cands = self.candidates(state)
        if cands and rng.random() < self.alpha:
            probs = softmax(self.proposer.entity_scores(left, right, state.evidence, cands))
            content: TokenSeq = cands[categorical(rng, probs)]
            space = SpaceKind.ENTITY
        else:
            vocab, probs = self.proposer.token_dist(left, right, state.evidence)
            content = (vocab[categorical(rng, probs)],)
            space = SpaceKind.TOKEN
        return self._finish(state, EditAction(ActionKind.INSERT, gap_index, content, space))

    def propose_delete(self, state: EditState, unit_index: int) -> Proposal:
        if state.n_units < 2:
            raise EmptyResultError("cannot delete the only unit")
        span = state.segmentation.units[unit_index]
        space = SpaceKind.ENTITY if span.is_entity else SpaceKind.TOKEN
        return self._finish(state, EditAction(ActionKind.DELETE, unit_index, None, space))

    def propose(self, state: EditState, rng) -> Proposal:
        """One full draw: action kind, position, content.

        Raises ProposalRejected for moves the kernel cannot complete
        (deleting the only unit, exceeding the length cap, irreversible
        re-segmentation, or content with no reverse probability).
        """
        kind = sample_action(rng)
        if kind is ActionKind.DELETE:
            if state.n_units < 2:
                raise ProposalRejected("empty_result", kind)
            pos = self.position_distribution(state)
            return self.propose_delete(state, categorical(rng, pos.unit_probs))
        if kind is ActionKind.REPLACE:
            pos = self.position_distribution(state)
            return self.propose_replace(state, categorical(rng, pos.unit_probs), rng)
        pos = self.position_distribution(state)
        return self.propose_insert(state, categorical(rng, pos.gap_probs), rng)

    # -- exhaustive enumeration (used by the exact-kernel harness) -----------

    def enumerate_actions(self, state: EditState) -> list[tuple[EditAction, float]]:
        """All samplable completed moves with their true sampling probability.

        The probabilities sum to 1 minus the mass of moves rejected before
        content sampling (i.e. the delete third when only one unit exists).
        """
        pos = self.position_distribution(state)
        cands = self.candidates(state)
        out: list[tuple[EditAction, float]] = []
        third = 1.0 / 3.0

        for j, span in enumerate(state.segmentation.units):
            base = float(pos.unit_probs[j]) * third
            left, right = self._unit_context(state, j)
            if span.is_entity and cands:
                probs = softmax(self.proposer.entity_scores(left, right, state.evidence, cands))
                for ci, cand in enumerate(cands):
                    out.append(
                        (EditAction(ActionKind.REPLACE, j, cand, SpaceKind.ENTITY), base * float(probs[ci]))
                    )
            else:
                vocab, probs = self.proposer.token_dist(left, right, state.evidence)
                for wi, w in enumerate(vocab):
                    out.append(
                        (EditAction(ActionKind.REPLACE, j, (w,), SpaceKind.TOKEN), base * float(probs[wi]))
                    )
            if state.n_units >= 2:
                space = SpaceKind.ENTITY if span.is_entity else SpaceKind.TOKEN
                out.append((EditAction(ActionKind.DELETE, j, None, space), base))

        for g in range(state.n_gaps):
            base = float(pos.gap_probs[g]) * third
            left, right = self._gap_context(state, g)
            vocab, tok_probs = self.proposer.token_dist(left, right, state.evidence)
            tok_w = (1.0 - self.alpha) if cands else 1.0
            for wi, w in enumerate(vocab):
                out.append(
                    (EditAction(ActionKind.INSERT, g, (w,), SpaceKind.TOKEN), base * tok_w * float(tok_probs[wi]))
                )
            if cands:
                ent_probs = softmax(self.proposer.entity_scores(left, right, state.evidence, cands))
                for ci, cand in enumerate(cands):
                    out.append(
                        (
                            EditAction(ActionKind.INSERT, g, cand, SpaceKind.ENTITY),
                            base * self.alpha * float(ent_probs[ci]),
                        )
                    )
        return out
