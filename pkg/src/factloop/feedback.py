"""Feedback channels and the adaptive-refinement loop.

Four channels flag reasoning points: human oracle annotations, verifier
probabilities, self-reflection probes, and probes against a separately
fine-tuned model. The two probe channels share one code path and differ only
in the backend they talk to. Flagged points are fed back through the
refinement prompt; an empty bundle skips refinement entirely because the
refinement instruction asserts that errors exist.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .dataset import CaseRecord, render_attributes
from .exceptions import ConfigurationError, ContractViolation, IncompleteAnnotationError
from .lm_client import Backend
from .parser import NO, UNPARSEABLE, Generation, parse_generation, parse_yes_no
from .prompts import (
    ENTIRE_CONTENT,
    SINGLE_POINT,
    render_feedback_probe,
    render_generation,
    render_refinement,
)
from .verifier_gateway import VerifierScore, threshold_predict

ORACLE = "oracle"
VERIFIER = "verifier"
SELF_REFLECTION = "self_reflection"
FINETUNED_SLM = "finetuned_slm"
SOURCES = (ORACLE, VERIFIER, SELF_REFLECTION, FINETUNED_SLM)

NO_FEEDBACK_SKIP = "no_feedback_skip"

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnotationRecord:
    """One human judgment for one reasoning point."""

    case_id: str
    round: int
    point_index: int
    hallucinated: int
    annotator: str
    timestamp: str = ""

    def __post_init__(self):
        if self.hallucinated not in (0, 1):
            raise ContractViolation(f"hallucinated must be 0 or 1, got {self.hallucinated!r}")

    def to_record(self) -> dict:
        return {
            "case_id": self.case_id,
            "round": self.round,
            "point_index": self.point_index,
            "hallucinated": self.hallucinated,
            "annotator": self.annotator,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class FeedbackBundle:
    """Flagged reasoning points from one source at one granularity."""

    case_id: str
    round: int
    source: str
    granularity: str
    flagged_points: tuple[tuple[int, str], ...]  # (index, text) in point order
    warnings: int = 0

    @property
    def empty(self) -> bool:
        return not self.flagged_points

    def to_record(self) -> dict:
        return {
            "case_id": self.case_id,
            "round": self.round,
            "source": self.source,
            "granularity": self.granularity,
            "flagged_points": [{"index": i, "text": t} for i, t in self.flagged_points],
            "warnings": self.warnings,
        }


def _make_bundle(
    generation: Generation,
    source: str,
    granularity: str,
    flagged_indices: Sequence[int],
    warnings: int = 0,
) -> FeedbackBundle:
    by_index = {p.index: p.text for p in generation.points}
    bad = [i for i in flagged_indices if i not in by_index]
    if bad:
        raise ContractViolation(
            f"flagged indices {bad} do not exist on case {generation.case_id} "
            f"round {generation.round}"
        )
    ordered = sorted(set(flagged_indices))
    return FeedbackBundle(
        case_id=generation.case_id,
        round=generation.round,
        source=source,
        granularity=granularity,
        flagged_points=tuple((i, by_index[i]) for i in ordered),
        warnings=warnings,
    )


def resolve_annotations(
    generation: Generation, annotations: Sequence[AnnotationRecord]
) -> dict[int, int]:
    """Resolve per-point judgments: majority vote, ties flagged (=1).

    Every point of the generation must be covered; missing indices raise with
    the full list so the annotation queue can be completed.
    """
    votes: dict[int, list[int]] = {}
    for record in annotations:
        if record.case_id != generation.case_id or record.round != generation.round:
            continue
        votes.setdefault(record.point_index, []).append(record.hallucinated)
    missing = [p.index for p in generation.points if p.index not in votes]
    if missing:
        raise IncompleteAnnotationError(
            f"case {generation.case_id} round {generation.round}: "
            f"unannotated point indices {missing}",
            missing=missing,
        )
    resolved = {}
    for p in generation.points:
        group = votes[p.index]
        ones = sum(group)
        zeros = len(group) - ones
        resolved[p.index] = 1 if ones >= zeros else 0
    return resolved


def oracle_flags(
    generation: Generation, annotations: Sequence[AnnotationRecord]
) -> FeedbackBundle:
    """Gold-standard flags straight from resolved human annotations."""
    resolved = resolve_annotations(generation, annotations)
    flagged = [i for i, h in sorted(resolved.items()) if h == 1]
    return _make_bundle(generation, ORACLE, SINGLE_POINT, flagged)


def verifier_flags(
    generation: Generation, scores: Sequence[VerifierScore]
) -> FeedbackBundle:
    """Flags from thresholded verifier probabilities, one score per point."""
    by_index: dict[int, VerifierScore] = {}
    for score in scores:
        if score.case_id != generation.case_id or score.round != generation.round:
            continue
        if score.point_index in by_index:
            raise ContractViolation(
                f"duplicate score for case {generation.case_id} point {score.point_index}"
            )
        by_index[score.point_index] = score
    missing = [p.index for p in generation.points if p.index not in by_index]
    if missing:
        raise ContractViolation(
            f"case {generation.case_id} round {generation.round}: "
            f"missing verifier scores for point indices {missing}"
        )
    flagged = [p.index for p in generation.points if threshold_predict(by_index[p.index].prob) == 1]
    return _make_bundle(generation, VERIFIER, SINGLE_POINT, flagged)


def probe_flags(
    generation: Generation,
    case: CaseRecord,
    backend: Backend,
    source: str,
    tags: Optional[dict] = None,
) -> FeedbackBundle:
    """Shared probe/parse path for the self-reflection and fine-tuned channels.

    Each point is probed with the yes/no implication question; "no" flags the
    point. Unparseable answers never flag (we refuse to fabricate an error
    assertion from noise) and are counted as warnings on the bundle.
    """
    if source not in (SELF_REFLECTION, FINETUNED_SLM):
        raise ContractViolation(f"probe channel cannot produce source {source!r}")
    x = render_attributes(case)
    flagged: list[int] = []
    warnings = 0
    for point in generation.points:
        prompt = render_feedback_probe(x, point.text)
        answer = parse_yes_no(
            backend.complete(prompt, tags=_tag(tags, kind="probe", point_index=point.index))
        )
        if answer == NO:
            flagged.append(point.index)
        elif answer == UNPARSEABLE:
            warnings += 1
            logger.warning(
                "unparseable probe answer for case %s point %d; treating as no flag",
                generation.case_id, point.index,
            )
    return _make_bundle(generation, source, SINGLE_POINT, flagged, warnings=warnings)


def self_reflection_flags(
    generation: Generation, case: CaseRecord, backend: Backend, tags: Optional[dict] = None
) -> FeedbackBundle:
    return probe_flags(generation, case, backend, SELF_REFLECTION, tags=tags)


def finetuned_slm_flags(
    generation: Generation, case: CaseRecord, backend: Backend, tags: Optional[dict] = None
) -> FeedbackBundle:
    return probe_flags(generation, case, backend, FINETUNED_SLM, tags=tags)


def entire_content_flags(
    generation: Generation,
    case: CaseRecord,
    backend: Optional[Backend] = None,
    annotations: Optional[Sequence[AnnotationRecord]] = None,
    scores: Optional[Sequence[VerifierScore]] = None,
    source: str = SELF_REFLECTION,
    tags: Optional[dict] = None,
) -> FeedbackBundle:
    """One judgment over the whole reasoning; if erroneous, flag every point."""
    if not generation.points:
        return FeedbackBundle(
            case_id=generation.case_id,
            round=generation.round,
            source=source,
            granularity=ENTIRE_CONTENT,
            flagged_points=(),
        )
    warnings = 0
    if source in (SELF_REFLECTION, FINETUNED_SLM):
        if backend is None:
            raise ConfigurationError(f"{source} at entire-content granularity needs a backend")
        prompt = render_feedback_probe(render_attributes(case), generation.reasoning_text)
        answer = parse_yes_no(backend.complete(prompt, tags=_tag(tags, kind="probe")))
        erroneous = answer == NO
        warnings = 1 if answer == UNPARSEABLE else 0
        if warnings:
            logger.warning(
                "unparseable entire-content probe answer for case %s; treating as no flag",
                generation.case_id,
            )
    elif source == ORACLE:
        if annotations is None:
            raise ConfigurationError("oracle at entire-content granularity needs annotations")
        resolved = resolve_annotations(generation, annotations)
        erroneous = any(h == 1 for h in resolved.values())
    elif source == VERIFIER:
        if scores is None:
            raise ConfigurationError("verifier at entire-content granularity needs scores")
        point_bundle = verifier_flags(generation, scores)
        erroneous = not point_bundle.empty
    else:
        raise ContractViolation(f"unknown feedback source {source!r}")

    flagged = [p.index for p in generation.points] if erroneous else []
    return _make_bundle(generation, source, ENTIRE_CONTENT, flagged, warnings=warnings)


def initial_generation(case: CaseRecord, backend: Backend, tags: Optional[dict] = None) -> Generation:
    """Round-0 generation for a case."""
    prompt = render_generation(render_attributes(case))
    raw = backend.complete(prompt, tags=_tag(tags, kind="generation", round=0))
    return parse_generation(raw, case_id=case.id, round=0)


def run_refinement(
    case: CaseRecord,
    generation: Generation,
    bundle: FeedbackBundle,
    backend: Backend,
    tags: Optional[dict] = None,
) -> Generation:
    """One feedback-conditioned regeneration; empty feedback skips the call."""
    if bundle.case_id != generation.case_id or generation.case_id != case.id:
        raise ContractViolation(
            f"bundle/case mismatch: bundle={bundle.case_id} generation={generation.case_id} "
            f"case={case.id}"
        )
    if bundle.round != generation.round:
        raise ContractViolation(
            f"bundle round {bundle.round} does not match generation round {generation.round}"
        )
    next_round = generation.round + 1
    if bundle.empty:
        return Generation(
            case_id=generation.case_id,
            round=next_round,
            decision=generation.decision,
            points=list(generation.points),
            raw=generation.raw,
            note=NO_FEEDBACK_SKIP,
        )
    if bundle.granularity == ENTIRE_CONTENT:
        flagged_texts = [generation.reasoning_text]
    else:
        flagged_texts = [text for _, text in bundle.flagged_points]
    prompt = render_refinement(
        render_attributes(case), generation.raw, flagged_texts, granularity=bundle.granularity
    )
    raw = backend.complete(prompt, tags=_tag(tags, kind="refinement", round=next_round))
    return parse_generation(raw, case_id=case.id, round=next_round)


FlagProvider = Callable[[Generation], FeedbackBundle]


def make_flagger(
    case: CaseRecord,
    source: str,
    granularity: str,
    feedback_backend: Optional[Backend] = None,
    annotations: Optional[Sequence[AnnotationRecord]] = None,
    scores_provider: Optional[Callable[[Generation], Sequence[VerifierScore]]] = None,
    tags: Optional[dict] = None,
) -> FlagProvider:
    """Bind a feedback channel to its inputs, yielding generation -> bundle."""
    if source not in SOURCES:
        raise ConfigurationError(f"unknown feedback source {source!r}")
    if granularity not in (SINGLE_POINT, ENTIRE_CONTENT):
        raise ConfigurationError(f"unknown granularity {granularity!r}")

    def flagger(generation: Generation) -> FeedbackBundle:
        probe_tags = _tag(tags, round=generation.round)
        if granularity == ENTIRE_CONTENT:
            return entire_content_flags(
                generation,
                case,
                backend=feedback_backend,
                annotations=annotations,
                scores=scores_provider(generation) if scores_provider else None,
                source=source,
                tags=probe_tags,
            )
        if source == ORACLE:
            if annotations is None:
                raise ConfigurationError("oracle feedback needs annotations")
            return oracle_flags(generation, annotations)
        if source == VERIFIER:
            if scores_provider is None:
                raise ConfigurationError("verifier feedback needs a scores provider")
            return verifier_flags(generation, scores_provider(generation))
        if feedback_backend is None:
            raise ConfigurationError(f"{source} feedback needs a backend")
        return probe_flags(generation, case, feedback_backend, source, tags=probe_tags)

    return flagger


def run_multi_round(
    case: CaseRecord,
    rounds: int,
    granularity: str,
    source: str,
    backend: Backend,
    feedback_backend: Optional[Backend] = None,
    annotations: Optional[Sequence[AnnotationRecord]] = None,
    scores_provider: Optional[Callable[[Generation], Sequence[VerifierScore]]] = None,
    tags: Optional[dict] = None,
    on_bundle: Optional[Callable[[FeedbackBundle], None]] = None,
) -> list[Generation]:
    """Initial generation plus ``rounds`` refinement rounds for one case.

    Each round's feedback targets the latest generation only, and the
    refinement prompt carries only the original attributes and that latest
    response, so context length stays flat across rounds.
    """
    if rounds < 0:
        raise ContractViolation("rounds must be >= 0")
    if source in (SELF_REFLECTION,) and feedback_backend is None:
        feedback_backend = backend  # self-reflection probes the generating model
    flagger = make_flagger(
        case,
        source,
        granularity,
        feedback_backend=feedback_backend,
        annotations=annotations,
        scores_provider=scores_provider,
        tags=tags,
    )
    generations = [initial_generation(case, backend, tags=tags)]
    for _ in range(rounds):
        latest = generations[-1]
        bundle = flagger(latest)
        if on_bundle is not None:
            on_bundle(bundle)
        generations.append(run_refinement(case, latest, bundle, backend, tags=tags))
    return generations


def _tag(tags: Optional[dict], **extra) -> dict:
    merged = dict(tags or {})
    merged.update(extra)
    return merged
