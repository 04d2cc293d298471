"""Leakage-free collection of per-point factual-error probabilities.

A fold plan assigns every case to one of k folds, stratified by label. Scores
for a case may only come from a scorer trained on the *other* folds; the guard
is enforced at collection time, re-checked on import, and auditable purely
from the score log.

Scoring protocol (any conforming service works):
  GET  /info  -> {"trained_on_folds": [...], "scorer_id": "..."}
  POST /score with {"context": <attributes text>, "claim": <point text>,
                    "fold": <case fold>} -> {"prob": <float in [0,1]>}
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence, Union

import requests

from .dataset import CaseRecord, render_attributes
from .exceptions import (
    ConfigurationError,
    ContractViolation,
    LeakageError,
    ProtocolError,
    TableParseError,
    TransportError,
)
from .parser import Generation

DEFAULT_FOLDS = 3
THRESHOLD = 0.5


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    assignment: dict[str, int]  # case_id -> fold in 0..k-1

    def fold_of(self, case_id: str) -> int:
        try:
            return self.assignment[case_id]
        except KeyError:
            raise ContractViolation(f"case {case_id} is not in the fold plan") from None

    def to_json(self) -> dict:
        return {"k": self.k, "seed": self.seed, "assignment": dict(self.assignment)}

    @classmethod
    def from_json(cls, obj: dict) -> "FoldPlan":
        return cls(k=int(obj["k"]), seed=int(obj["seed"]),
                   assignment={str(c): int(f) for c, f in obj["assignment"].items()})


@dataclass(frozen=True)
class VerifierScore:
    case_id: str
    round: int
    point_index: int
    prob: float
    scorer_id: str
    trained_on_folds: frozenset[int]

    def to_record(self, fold: int) -> dict:
        return {
            "case_id": self.case_id,
            "round": self.round,
            "point_index": self.point_index,
            "prob": self.prob,
            "scorer_id": self.scorer_id,
            "trained_on_folds": sorted(self.trained_on_folds),
            "fold": fold,
        }


def plan_folds(cases: Sequence[CaseRecord], k: int = DEFAULT_FOLDS, seed: int = 0) -> FoldPlan:
    """Stratified, seed-deterministic fold assignment.

    Case ids are sorted per label, shuffled under the seed, and dealt
    round-robin with a running offset so both per-label and total fold sizes
    differ by at most one. Deterministic in (seed, case id set).
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if k > len(cases):
        raise ConfigurationError(f"k={k} exceeds the number of cases ({len(cases)})")
    labels = {case.label for case in cases}
    if k > 1 and labels != {0, 1}:
        raise ConfigurationError("both labels must be present to stratify folds")

    rng = random.Random(seed)
    assignment: dict[str, int] = {}
    offset = 0
    for label in sorted(labels):
        ids = sorted(case.id for case in cases if case.label == label)
        rng.shuffle(ids)
        for i, case_id in enumerate(ids):
            assignment[case_id] = (offset + i) % k
        offset += len(ids)
    return FoldPlan(k=k, seed=seed, assignment=assignment)


class Scorer(Protocol):
    """Anything that can score (context, claim) pairs under the protocol."""

    def info(self) -> dict: ...

    def score(self, context: str, claim: str, fold: int) -> float: ...


class HttpScorer:
    """Protocol client for a scorer service at ``base_url``."""

    def __init__(self, base_url: str, timeout: float = 60.0,
                 session: Optional[requests.Session] = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def info(self) -> dict:
        try:
            response = self._session.get(self.base_url + "/info", timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"scorer {self.base_url} unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"scorer {self.base_url}/info returned HTTP {response.status_code}")
        return response.json()

    def score(self, context: str, claim: str, fold: int) -> float:
        payload = {"context": context, "claim": claim, "fold": fold}
        try:
            response = self._session.post(self.base_url + "/score", json=payload,
                                          timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"scorer {self.base_url} unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"scorer {self.base_url}/score returned HTTP {response.status_code}")
        body = response.json()
        if "prob" not in body:
            raise ProtocolError(f"scorer {self.base_url}/score reply lacks 'prob'")
        return body["prob"]


class CallableScorer:
    """In-process scorer for tests and precomputed-score adapters."""

    def __init__(self, fn: Callable[[str, str, int], float],
                 trained_on_folds: Sequence[int], scorer_id: str = "mock-scorer"):
        self._fn = fn
        self.trained_on_folds = sorted(trained_on_folds)
        self.scorer_id = scorer_id

    def info(self) -> dict:
        return {"trained_on_folds": self.trained_on_folds, "scorer_id": self.scorer_id}

    def score(self, context: str, claim: str, fold: int) -> float:
        return self._fn(context, claim, fold)


def _validate_prob(prob: object, origin: str) -> float:
    if not isinstance(prob, (int, float)) or isinstance(prob, bool):
        raise ProtocolError(f"{origin}: prob must be a number, got {prob!r}")
    prob = float(prob)
    if not math.isfinite(prob) or not 0.0 <= prob <= 1.0:
        raise ProtocolError(f"{origin}: prob {prob!r} outside [0, 1]")
    return prob


def _guard_leakage(plan: FoldPlan, case_id: str, trained_on_folds: frozenset[int]) -> int:
    fold = plan.fold_of(case_id)
    if fold in trained_on_folds:
        raise LeakageError(
            f"case {case_id} sits in fold {fold}, which the scorer was trained on"
        )
    return fold


def _route_scorers(plan: FoldPlan, scorers: Sequence[Scorer]) -> dict[int, tuple[Scorer, dict]]:
    infos = []
    for scorer in scorers:
        info = scorer.info()
        if "trained_on_folds" not in info:
            raise ProtocolError("scorer /info lacks 'trained_on_folds'")
        infos.append((scorer, info))
    routing: dict[int, tuple[Scorer, dict]] = {}
    for fold in range(plan.k):
        eligible = [(s, i) for s, i in infos if fold not in set(i["trained_on_folds"])]
        if not eligible:
            raise ConfigurationError(f"no leakage-free scorer available for fold {fold}")
        if len(eligible) > 1:
            raise ConfigurationError(
                f"ambiguous scorer routing for fold {fold}: "
                f"{[i.get('scorer_id', '?') for _, i in eligible]}"
            )
        routing[fold] = eligible[0]
    return routing


def collect_scores(
    plan: FoldPlan,
    pairs: Sequence[tuple[CaseRecord, Generation]],
    scorers: Union[Scorer, Sequence[Scorer]],
    audit_sink: Optional[Callable[[dict], None]] = None,
) -> list[VerifierScore]:
    """Score every reasoning point with the scorer holding its fold out.

    Exactly one score per point; each is validated against the protocol and
    the leakage guard before being emitted, and an audit row is produced per
    score when a sink is given.
    """
    if hasattr(scorers, "info"):
        scorers = [scorers]  # a single scorer was passed
    routing = _route_scorers(plan, scorers)
    out: list[VerifierScore] = []
    for case, generation in pairs:
        fold = plan.fold_of(case.id)
        scorer, info = routing[fold]
        trained = frozenset(int(f) for f in info["trained_on_folds"])
        scorer_id = str(info.get("scorer_id", "scorer"))
        context = render_attributes(case)
        for point in generation.points:
            prob = _validate_prob(
                scorer.score(context, point.text, fold), origin=scorer_id
            )
            score = VerifierScore(
                case_id=case.id,
                round=generation.round,
                point_index=point.index,
                prob=prob,
                scorer_id=scorer_id,
                trained_on_folds=trained,
            )
            _guard_leakage(plan, case.id, score.trained_on_folds)
            out.append(score)
            if audit_sink is not None:
                audit_sink(score.to_record(fold))
    return out


def threshold_predict(prob: float) -> int:
    """1 ("contains factual hallucinations") iff prob >= 0.5."""
    if not isinstance(prob, (int, float)) or isinstance(prob, bool) or not math.isfinite(prob):
        raise ContractViolation(f"prob must be a finite number, got {prob!r}")
    if not 0.0 <= prob <= 1.0:
        raise ContractViolation(f"prob {prob!r} outside [0, 1]")
    return 1 if prob >= THRESHOLD else 0


_REQUIRED_SCORE_FIELDS = ("case_id", "round", "point_index", "prob", "scorer_id", "trained_on_folds")


def import_scores(path: Union[str, Path], plan: Optional[FoldPlan] = None) -> list[VerifierScore]:
    """Load scores from a JSON-lines file, applying the same validation as
    collection (including the leakage guard when a plan is supplied)."""
    scores: list[VerifierScore] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TableParseError(f"{path}: line {line_no}: invalid JSON: {exc}",
                                      row=line_no) from exc
            missing = [f for f in _REQUIRED_SCORE_FIELDS if f not in obj]
            if missing:
                raise TableParseError(
                    f"{path}: line {line_no}: missing fields {missing}", row=line_no
                )
            prob = _validate_prob(obj["prob"], origin=f"{path}:{line_no}")
            score = VerifierScore(
                case_id=str(obj["case_id"]),
                round=int(obj["round"]),
                point_index=int(obj["point_index"]),
                prob=prob,
                scorer_id=str(obj["scorer_id"]),
                trained_on_folds=frozenset(int(f) for f in obj["trained_on_folds"]),
            )
            if plan is not None:
                _guard_leakage(plan, score.case_id, score.trained_on_folds)
            scores.append(score)
    return scores


def audit_leakage(plan: FoldPlan, records: Sequence[dict]) -> list[str]:
    """Check score audit rows against the plan; returns violation messages."""
    violations = []
    for record in records:
        case_id = record["case_id"]
        trained = set(record["trained_on_folds"])
        fold = plan.assignment.get(case_id)
        if fold is None:
            violations.append(f"case {case_id}: not in fold plan")
        elif fold in trained:
            violations.append(
                f"case {case_id}: fold {fold} appears in trained_on_folds {sorted(trained)}"
            )
    return violations
