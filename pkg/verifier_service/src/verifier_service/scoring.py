"""Load artifacts and score (context, claim) pairs."""
from __future__ import annotations

import json
import re
from pathlib import Path

import torch

from .encoder import EncoderConfig, PairEncoder
from .training import INFO_FILE, MODE_FINETUNED, MODE_LEXICAL, WEIGHTS_FILE

_WORD = re.compile(r"\w+")


class FinetunedScorer:
    def __init__(self, artifact_dir: Path, info: dict):
        self._info = info
        config = EncoderConfig.from_dict(info["encoder"])
        self.model = PairEncoder(config)
        state = torch.load(artifact_dir / WEIGHTS_FILE, map_location="cpu", weights_only=True)
        self.model.load_state_dict(state)
        self.model.eval()

    def info(self) -> dict:
        return {
            "scorer_id": self._info["scorer_id"],
            "trained_on_folds": self._info["trained_on_folds"],
            "mode": MODE_FINETUNED,
        }

    def score(self, context: str, claim: str, fold: int | None = None) -> float:
        return self.model.probability(context, claim)


class LexicalScorer:
    """Entailment-style overlap heuristic: claims whose content words are not
    grounded in the context look fabricated."""

    def __init__(self, info: dict):
        self._info = info

    def info(self) -> dict:
        return {
            "scorer_id": self._info.get("scorer_id", "lexical-overlap"),
            "trained_on_folds": self._info.get("trained_on_folds", []),
            "mode": MODE_LEXICAL,
        }

    def score(self, context: str, claim: str, fold: int | None = None) -> float:
        claim_words = {w.lower() for w in _WORD.findall(claim)}
        if not claim_words:
            return 0.5
        context_words = {w.lower() for w in _WORD.findall(context)}
        ungrounded = len(claim_words - context_words) / len(claim_words)
        return ungrounded


def load_scorer(artifact_dir: str | Path):
    artifact_dir = Path(artifact_dir)
    with open(artifact_dir / INFO_FILE, "r", encoding="utf-8") as fh:
        info = json.load(fh)
    mode = info.get("mode", MODE_FINETUNED)
    if mode == MODE_FINETUNED:
        return FinetunedScorer(artifact_dir, info)
    if mode == MODE_LEXICAL:
        return LexicalScorer(info)
    raise ValueError(f"{artifact_dir}: unknown artifact mode {mode!r}")
