"""Tokenized claim state, entity segmentation, and edit application.

A claim is an immutable tuple of word tokens. Entities are recognized by a
deterministic longest-match gazetteer scan (leftmost wins on ties), which
partitions the token sequence into units: multi-token entity spans and
singleton token spans. Edits (insert / delete / replace) act on whole units
and always return a fresh state with the segmentation re-derived.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable

TokenSeq = tuple[str, ...]

ENTITY_LABEL = "ENT"

_TERMINAL_PUNCT = ".,!?;:"


class EditError(Exception):
    pass


class InvalidActionError(EditError):
    """Edit action references a unit or gap that does not exist."""


class EmptyResultError(EditError):
    """Edit would leave the claim with no tokens."""


def tokenize(text: str) -> TokenSeq:
    """Whitespace tokenization with terminal punctuation detached.

    "a film." -> ("a", "film", "."). Tokens are never empty and never
    contain internal whitespace.
    """
    out: list[str] = []
    for raw in text.split():
        tail: list[str] = []
        while len(raw) > 1 and raw[-1] in _TERMINAL_PUNCT:
            tail.append(raw[-1])
            raw = raw[:-1]
        out.append(raw)
        out.extend(reversed(tail))
    return tuple(out)


def detokenize(tokens: Iterable[str]) -> str:
    return " ".join(tokens)


def validate_tokens(tokens: TokenSeq) -> TokenSeq:
    if not tokens:
        raise ValueError("claim must contain at least one token")
    for tok in tokens:
        if not tok or any(ch.isspace() for ch in tok):
            raise ValueError(f"bad token: {tok!r}")
    return tuple(tokens)


@dataclass(frozen=True)
class Span:
    """Half-open token range [start, end); label is None for plain tokens."""

    start: int
    end: int
    label: str | None = None

    @property
    def is_entity(self) -> bool:
        return self.label is not None

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Segmentation:
    units: tuple[Span, ...]

    def __len__(self) -> int:
        return len(self.units)

    def unit_tokens(self, tokens: TokenSeq, index: int) -> TokenSeq:
        span = self.units[index]
        return tokens[span.start : span.end]


def segment(tokens: TokenSeq, gazetteer: Iterable[TokenSeq]) -> Segmentation:
    """Longest-match, leftmost-first entity segmentation.

    Every token not covered by a gazetteer match becomes a singleton unit.
    Deterministic: identical inputs always yield identical units.
    """
    by_first: dict[str, list[TokenSeq]] = {}
    for entry in gazetteer:
        if len(entry) >= 2:
            by_first.setdefault(entry[0], []).append(entry)
    for entries in by_first.values():
        entries.sort(key=lambda e: (-len(e), e))

    units: list[Span] = []
    i, n = 0, len(tokens)
    while i < n:
        matched = None
        for entry in by_first.get(tokens[i], ()):
            if tokens[i : i + len(entry)] == entry:
                matched = entry
                break
        if matched is not None:
            units.append(Span(i, i + len(matched), ENTITY_LABEL))
            i += len(matched)
        else:
            units.append(Span(i, i + 1, None))
            i += 1
    return Segmentation(tuple(units))


def harvest_entities(*token_seqs: TokenSeq) -> set[TokenSeq]:
    """Extract candidate entity strings as maximal runs of capitalized tokens.

    Only runs of length >= 2 qualify; single capitalized words stay in the
    plain-token space.
    """
    found: set[TokenSeq] = set()
    for seq in token_seqs:
        run: list[str] = []
        for tok in list(seq) + [""]:
            if tok and tok[0].isupper():
                run.append(tok)
            else:
                if len(run) >= 2:
                    found.add(tuple(run))
                run = []
    return found


@dataclass(frozen=True)
class EvidenceSet:
    """Evidence passages plus the entity space harvested from them.

    The gazetteer holds every multi-token entity surface form seen in the
    passages or the original claim, plus any user-supplied entries; it is
    the candidate space for entity proposals and stays fixed for a run.
    """

    passages: tuple[TokenSeq, ...]
    gazetteer: frozenset[TokenSeq]

    @cached_property
    def token_set(self) -> frozenset[str]:
        out: set[str] = set()
        for passage in self.passages:
            out.update(passage)
        return frozenset(out)

    @cached_property
    def sorted_gazetteer(self) -> tuple[TokenSeq, ...]:
        return tuple(sorted(self.gazetteer))

    @cached_property
    def gazetteer_tokens(self) -> frozenset[str]:
        out: set[str] = set()
        for entry in self.gazetteer:
            out.update(entry)
        return frozenset(out)


def build_evidence(
    passages: Iterable[TokenSeq],
    claim: TokenSeq = (),
    extra_entities: Iterable[TokenSeq] = (),
) -> EvidenceSet:
    passages = tuple(tuple(p) for p in passages)
    gaz = harvest_entities(*passages, tuple(claim))
    for entry in extra_entities:
        entry = tuple(entry)
        if len(entry) >= 2:
            gaz.add(entry)
    return EvidenceSet(passages=passages, gazetteer=frozenset(gaz))


@dataclass(frozen=True)
class EditState:
    """Current claim, its segmentation, the immutable original, and evidence."""

    tokens: TokenSeq
    segmentation: Segmentation
    original: TokenSeq
    evidence: EvidenceSet

    def unit_tokens(self, index: int) -> TokenSeq:
        return self.segmentation.unit_tokens(self.tokens, index)

    @property
    def n_units(self) -> int:
        return len(self.segmentation.units)

    @property
    def n_gaps(self) -> int:
        return len(self.segmentation.units) + 1


def make_state(claim: TokenSeq, evidence: EvidenceSet) -> EditState:
    claim = validate_tokens(claim)
    return EditState(
        tokens=claim,
        segmentation=segment(claim, evidence.sorted_gazetteer),
        original=claim,
        evidence=evidence,
    )


class ActionKind(str, Enum):
    INSERT = "insert"
    DELETE = "delete"
    REPLACE = "replace"


class SpaceKind(str, Enum):
    TOKEN = "token"
    ENTITY = "entity"


@dataclass(frozen=True)
class EditAction:
    """One unit-level edit.

    For INSERT, ``index`` is a gap index in 0..n_units (content goes in
    front of unit ``index``, or at the end for index == n_units). For
    DELETE / REPLACE it is a unit index. ``content`` is absent for DELETE.
    """

    kind: ActionKind
    index: int
    content: TokenSeq | None
    space: SpaceKind

    def __post_init__(self) -> None:
        if self.kind is ActionKind.DELETE:
            if self.content is not None:
                raise InvalidActionError("delete carries no content")
        elif not self.content:
            raise InvalidActionError(f"{self.kind.value} requires content")


def apply_edit(state: EditState, action: EditAction) -> EditState:
    """Apply one edit and re-derive the segmentation.

    The original claim and evidence are carried over untouched.
    """
    units = state.segmentation.units
    tokens = state.tokens
    if action.kind is ActionKind.INSERT:
        if not 0 <= action.index <= len(units):
            raise InvalidActionError(f"gap {action.index} out of range")
        pos = units[action.index].start if action.index < len(units) else len(tokens)
        new_tokens = tokens[:pos] + tuple(action.content or ()) + tokens[pos:]
    elif action.kind is ActionKind.DELETE:
        if not 0 <= action.index < len(units):
            raise InvalidActionError(f"unit {action.index} out of range")
        span = units[action.index]
        new_tokens = tokens[: span.start] + tokens[span.end :]
        if not new_tokens:
            raise EmptyResultError("delete would empty the claim")
    elif action.kind is ActionKind.REPLACE:
        if not 0 <= action.index < len(units):
            raise InvalidActionError(f"unit {action.index} out of range")
        span = units[action.index]
        new_tokens = tokens[: span.start] + tuple(action.content or ()) + tokens[span.end :]
    else:  # pragma: no cover - enum is closed
        raise InvalidActionError(str(action.kind))
    return EditState(
        tokens=new_tokens,
        segmentation=segment(new_tokens, state.evidence.sorted_gazetteer),
        original=state.original,
        evidence=state.evidence,
    )
