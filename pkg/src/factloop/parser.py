"""Structure raw completions into a decision plus ordered reasoning points.

The expected output format is a decision line ("good credit" / "bad credit")
followed by free-form reasoning. The reasoning is segmented into sentence-level
points after stripping enumeration markers, matching the granularity at which
points are annotated and probed. Ambiguous or malformed decisions become the
value "invalid" rather than an error so they can flow into metrics.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .exceptions import ContractViolation

INVALID = "invalid"
Decision = Union[int, str]  # 0 | 1 | "invalid"

YES = "yes"
NO = "no"
UNPARSEABLE = "unparseable"

# leading enumeration markers: "1.", "2)", "(3)", "-", "*", "•"
_MARKER = re.compile(r"^\s*(?:\(?\d{1,3}[.)]|[-*•])\s*")
_PURE_MARKER = re.compile(r"^\s*(?:\(?\d{1,3}[.)]?|[-*•])\s*$")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?;])\s+")
_FIRST_WORD = re.compile(r"[^0-9A-Za-z]*([A-Za-z]+)")


@dataclass(frozen=True)
class ReasoningPoint:
    index: int  # 1-based, contiguous
    text: str


@dataclass
class Generation:
    """One model output for a case and round."""

    case_id: str
    round: int
    decision: Decision
    points: list[ReasoningPoint] = field(default_factory=list)
    raw: str = ""
    note: str | None = None

    @property
    def reasoning_text(self) -> str:
        return " ".join(p.text for p in self.points)


def _parse_decision(first_line: str) -> Decision:
    lowered = first_line.lower()
    good = "good credit" in lowered
    bad = "bad credit" in lowered
    if good and not bad:
        return 1
    if bad and not good:
        return 0
    return INVALID


def segment_points(text: str) -> list[ReasoningPoint]:
    """Split reasoning text into stripped sentence-level points.

    Enumeration markers are removed; sentence punctuation stays attached so
    joining the points recovers the text modulo whitespace and markers.
    """
    chunks: list[str] = []
    for line in text.splitlines():
        line = _MARKER.sub("", line.strip())
        if not line:
            continue
        for chunk in _SENTENCE_SPLIT.split(line):
            chunk = _MARKER.sub("", chunk.strip()).strip()
            if chunk and not _PURE_MARKER.match(chunk):
                chunks.append(chunk)
    return [ReasoningPoint(index=i + 1, text=c) for i, c in enumerate(chunks)]


def parse_generation(raw: str, case_id: str, round: int = 0) -> Generation:
    """Parse a completion into decision and reasoning points.

    The first non-empty line carries the decision; the rest is segmented into
    points. A first line naming both labels, or neither, yields decision
    "invalid" (never an exception: malformed outputs must reach the metrics).
    """
    if not raw:
        raise ContractViolation("raw completion must be non-empty")
    lines = raw.splitlines()
    first_idx = None
    for i, line in enumerate(lines):
        if line.strip():
            first_idx = i
            break
    if first_idx is None:
        return Generation(case_id=case_id, round=round, decision=INVALID, points=[], raw=raw)

    decision = _parse_decision(lines[first_idx])
    rest = "\n".join(lines[first_idx + 1 :])
    points = segment_points(rest)
    return Generation(case_id=case_id, round=round, decision=decision, points=points, raw=raw)


def parse_yes_no(raw: str) -> str:
    """Classify a probe answer by its first word: "yes", "no" or "unparseable".

    "yes" means the attributes imply the point (no hallucination flag); "no"
    flags the point. Anything else is "unparseable" and must not produce a
    flag downstream.
    """
    if not raw:
        raise ContractViolation("probe answer must be non-empty")
    match = _FIRST_WORD.match(raw)
    if not match:
        return UNPARSEABLE
    word = match.group(1).lower()
    if word == "yes":
        return YES
    if word == "no":
        return NO
    return UNPARSEABLE
