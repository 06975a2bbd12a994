"""Dataset rows and line-delimited JSON I/O.

One instance per line: {"id", "claim", "evidence": [...], "gold"?, "label"?}.
Malformed lines are collected with their line numbers instead of aborting
the load, so a bad row never hides the rest of the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable


@dataclass(frozen=True)
class ClaimInstance:
    id: str
    claim: str
    evidence: tuple[str, ...]
    gold: str | None = None
    label: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"id": self.id, "claim": self.claim, "evidence": list(self.evidence)}
        if self.gold is not None:
            out["gold"] = self.gold
        if self.label is not None:
            out["label"] = self.label
        return out


@dataclass(frozen=True)
class LoadIssue:
    line: int
    reason: str


class ParseError(ValueError):
    pass


class MissingFieldError(ValueError):
    pass


def _parse_instance(obj: dict) -> ClaimInstance:
    if not isinstance(obj, dict):
        raise ParseError("record is not an object")
    for key in ("id", "claim"):
        if key not in obj:
            raise MissingFieldError(f"missing field {key!r}")
    claim = obj["claim"]
    if not isinstance(claim, str) or not claim.strip():
        raise ParseError("claim must be a non-empty string")
    evidence = obj.get("evidence", [])
    if not isinstance(evidence, list) or not all(isinstance(p, str) for p in evidence):
        raise ParseError("evidence must be a list of strings")
    gold = obj.get("gold")
    if gold is not None and not isinstance(gold, str):
        raise ParseError("gold must be a string")
    label = obj.get("label")
    if label is not None and label not in ("SUPPORTED", "REFUTED"):
        raise ParseError("label must be SUPPORTED or REFUTED")
    return ClaimInstance(
        id=str(obj["id"]),
        claim=claim,
        evidence=tuple(evidence),
        gold=gold,
        label=label,
    )


def load_instances(path: str | Path) -> tuple[list[ClaimInstance], list[LoadIssue]]:
    """Load instances in file order; bad lines become LoadIssues."""
    instances: list[ClaimInstance] = []
    issues: list[LoadIssue] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                issues.append(LoadIssue(line=line_no, reason=f"invalid JSON: {exc.msg}"))
                continue
            try:
                instances.append(_parse_instance(obj))
            except (ParseError, MissingFieldError) as exc:
                issues.append(LoadIssue(line=line_no, reason=str(exc)))
    return instances, issues


def write_instances(path: str | Path, instances: Iterable[ClaimInstance]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for inst in instances:
            handle.write(json.dumps(inst.to_dict(), sort_keys=True) + "\n")


def dump_record(obj: dict) -> str:
    """Canonical single-line JSON: sorted keys, compact separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
