"""Prompt templates and their byte-exact rendering.

Templates live as plain-text files with {X}, {Y}, {Y_i} and {F} markers so
wording can be swapped without a rebuild. Rendering is plain substring
replacement (never str.format), keeping braces inside case text intact. A
single trailing newline in a template file is trimmed so editors that enforce
POSIX final newlines do not change the rendered bytes.
"""
from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from .exceptions import ConfigurationError, ContractViolation

_TEMPLATE_DIR_ENV = "FACTLOOP_TEMPLATE_DIR"
_DEFAULT_DIR = Path(__file__).parent / "templates"

GENERATION = "generation"
FEEDBACK_PROBE = "feedback_probe"
REFINEMENT = "refinement"
ROUND_CONTEXT = "round_context"

_REQUIRED_PLACEHOLDERS = {
    GENERATION: ("{X}",),
    FEEDBACK_PROBE: ("{X}", "{Y_i}"),
    REFINEMENT: ("{X}", "{Y}", "{F}"),
    ROUND_CONTEXT: ("{X}", "{Y}"),
}

SINGLE_POINT = "single_point"
ENTIRE_CONTENT = "entire_content"


def template_dir() -> Path:
    override = os.environ.get(_TEMPLATE_DIR_ENV)
    return Path(override) if override else _DEFAULT_DIR


@lru_cache(maxsize=None)
def _load(kind: str, directory: str) -> str:
    path = Path(directory) / f"{kind}.txt"
    text = path.read_text(encoding="utf-8")
    if text.endswith("\n"):
        text = text[:-1]
    for marker in _REQUIRED_PLACEHOLDERS[kind]:
        if text.count(marker) != 1:
            raise ConfigurationError(
                f"{path}: template must contain {marker} exactly once"
            )
    return text


def load_template(kind: str) -> str:
    return _load(kind, str(template_dir()))


def render_generation(x: str) -> str:
    """Initial-generation prompt over the rendered attributes ``x``."""
    if not x:
        raise ContractViolation("attributes text must be non-empty")
    return load_template(GENERATION).replace("{X}", x)


def render_feedback_probe(x: str, point: str) -> str:
    """Yes/no probe asking whether the attributes imply one reasoning point."""
    if not x or not point:
        raise ContractViolation("both attributes and reasoning point must be non-empty")
    return load_template(FEEDBACK_PROBE).replace("{X}", x).replace("{Y_i}", point)


def format_flagged(flagged: Sequence[str], granularity: str = SINGLE_POINT) -> str:
    """Join flagged texts for the {F} slot.

    Single-point feedback renders one "- " bullet per point, newline-joined;
    entire-content feedback passes the reasoning text through untouched.
    """
    if granularity == ENTIRE_CONTENT:
        return "\n".join(flagged)
    return "\n".join(f"- {t}" for t in flagged)


def render_refinement(
    x: str,
    y_raw: str,
    flagged: Sequence[str],
    granularity: str = SINGLE_POINT,
) -> str:
    """Refinement prompt: attributes, previous response, then the error list.

    ``flagged`` must be non-empty; empty feedback never reaches rendering
    because the refinement step skips instead (the instruction asserts that
    errors exist, and sending it without any would plant a false premise).
    """
    if not flagged:
        raise ContractViolation("refinement requires at least one flagged point")
    return (
        load_template(REFINEMENT)
        .replace("{X}", x)
        .replace("{Y}", y_raw)
        .replace("{F}", format_flagged(flagged, granularity))
    )


def build_round_context(x: str, latest_response: str) -> str:
    """Context carried into rounds >= 2: the attributes and the latest response only."""
    return load_template(ROUND_CONTEXT).replace("{X}", x).replace("{Y}", latest_response)
