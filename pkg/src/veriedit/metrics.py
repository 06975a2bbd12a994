"""Edit-aware evaluation metrics: SARI, bigram-overlap ROUGE-2, Hamming.

SARI scores a correction against the source and one or more references by
splitting n-grams into three groups relative to the source: kept (in source
and output), added (in output only), deleted (removed from source). Each
group gets an F1 against the corresponding reference group, averaged over
n-gram orders 1..max_n and maximized over references; the final score is
the mean of the three component scores.

Conventions (pinned by tests): precision/recall of 0/0 counts as 1, an F1
with P = R = 0 counts as 0, and all multiset operations respect counts.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .energy import hamming
from .state import TokenSeq


class EmptyReferenceError(ValueError):
    pass


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _safe_div(num: int, den: int) -> float:
    if den == 0:
        return 1.0
    return num / den


def _f1(p: float, r: float) -> float:
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def _component_f1(sys_grams: Counter, ref_grams: Counter) -> float:
    matched = sum((sys_grams & ref_grams).values())
    p = _safe_div(matched, sum(sys_grams.values()))
    r = _safe_div(matched, sum(ref_grams.values()))
    return _f1(p, r)


@dataclass(frozen=True)
class SariScore:
    keep_f1: float
    delete_f1: float
    add_f1: float

    @property
    def final(self) -> float:
        return (self.keep_f1 + self.delete_f1 + self.add_f1) / 3.0


def sari(
    source: TokenSeq,
    output: TokenSeq,
    references: Iterable[TokenSeq],
    max_n: int = 4,
) -> SariScore:
    refs = [tuple(r) for r in references]
    if not refs:
        raise EmptyReferenceError("sari requires at least one reference")
    keep_best = delete_best = add_best = 0.0
    for ref in refs:
        keep_ns, del_ns, add_ns = [], [], []
        for n in range(1, max_n + 1):
            s, o, r = _ngrams(source, n), _ngrams(output, n), _ngrams(ref, n)
            keep_ns.append(_component_f1(s & o, s & r))
            del_ns.append(_component_f1(s - o, s - r))
            add_ns.append(_component_f1(o - s, r - s))
        keep_best = max(keep_best, sum(keep_ns) / max_n)
        delete_best = max(delete_best, sum(del_ns) / max_n)
        add_best = max(add_best, sum(add_ns) / max_n)
    return SariScore(keep_f1=keep_best, delete_f1=delete_best, add_f1=add_best)


def rouge2(output: TokenSeq, reference: TokenSeq) -> float:
    """Bigram-overlap F1; 1.0 when neither side has bigrams, 0.0 when only
    one side has none."""
    out_bi, ref_bi = _ngrams(output, 2), _ngrams(reference, 2)
    if not out_bi and not ref_bi:
        return 1.0
    if not out_bi or not ref_bi:
        return 0.0
    matched = sum((out_bi & ref_bi).values())
    return _f1(matched / sum(out_bi.values()), matched / sum(ref_bi.values()))


@dataclass(frozen=True)
class EvalItem:
    id: str
    source: TokenSeq
    output: TokenSeq
    references: tuple[TokenSeq, ...]
    label: str | None = None


@dataclass(frozen=True)
class InstanceScore:
    id: str
    sari: SariScore
    rouge2: float
    hamming: int
    label: str | None = None


@dataclass(frozen=True)
class CorpusReport:
    per_instance: tuple[InstanceScore, ...]
    mean_keep: float
    mean_delete: float
    mean_add: float
    mean_final: float
    mean_rouge2: float
    mean_hamming: float
    label_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "mean_keep": self.mean_keep,
            "mean_delete": self.mean_delete,
            "mean_add": self.mean_add,
            "mean_final": self.mean_final,
            "mean_rouge2": self.mean_rouge2,
            "mean_hamming": self.mean_hamming,
            "label_counts": dict(sorted(self.label_counts.items())),
            "instances": len(self.per_instance),
        }


def evaluate_corpus(items: Sequence[EvalItem], max_n: int = 4) -> CorpusReport:
    if not items:
        raise ValueError("empty corpus")
    scored: list[InstanceScore] = []
    for item in items:
        if not item.references:
            raise EmptyReferenceError(f"instance {item.id} has no reference")
        scored.append(
            InstanceScore(
                id=item.id,
                sari=sari(item.source, item.output, item.references, max_n=max_n),
                rouge2=max(rouge2(item.output, ref) for ref in item.references),
                hamming=hamming(item.output, item.source),
                label=item.label,
            )
        )
    n = len(scored)
    label_counts: dict[str, int] = {}
    for s in scored:
        if s.label:
            label_counts[s.label] = label_counts.get(s.label, 0) + 1
    return CorpusReport(
        per_instance=tuple(scored),
        mean_keep=sum(s.sari.keep_f1 for s in scored) / n,
        mean_delete=sum(s.sari.delete_f1 for s in scored) / n,
        mean_add=sum(s.sari.add_f1 for s in scored) / n,
        mean_final=sum(s.sari.final for s in scored) / n,
        mean_rouge2=sum(s.rouge2 for s in scored) / n,
        mean_hamming=sum(s.hamming for s in scored) / n,
        label_counts=label_counts,
    )
