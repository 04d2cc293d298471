"""Per-fold fine-tuning of the pair encoder on annotated reasoning points.

An artifact directory holds weights.pt plus info.json; info.json's
trained_on_folds is what the scoring protocol reports, so the leakage guard
on the consumer side can be audited against it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn as nn

from .encoder import EncoderConfig, PairEncoder, encode_pair

INFO_FILE = "info.json"
WEIGHTS_FILE = "weights.pt"

MODE_FINETUNED = "finetuned"
MODE_LEXICAL = "lexical"


@dataclass
class TrainSpec:
    """What to train on and how; one held-out fold per artifact."""

    k: int
    trained_on_folds: list[int]
    checkpoint: str = "tiny-rand"  # "tiny-rand" or a path to prior weights
    epochs: int = 6
    learning_rate: float = 3e-3
    seed: int = 0
    batch_size: int = 32
    scorer_id: str = "tiny-encoder"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        folds = sorted(set(self.trained_on_folds))
        held_out = [f for f in range(self.k) if f not in folds]
        if len(held_out) != 1:
            raise ValueError(
                f"training folds {folds} must exclude exactly one of {self.k} folds, "
                f"held out: {held_out}"
            )
        self.trained_on_folds = folds

    @property
    def held_out_fold(self) -> int:
        return next(f for f in range(self.k) if f not in self.trained_on_folds)


def load_pairs(path: str | Path) -> list[dict]:
    """JSONL rows with context, claim, label and fold fields."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            for key in ("context", "claim", "label", "fold"):
                if key not in obj:
                    raise ValueError(f"{path}: line {line_no}: missing field {key!r}")
            if int(obj["label"]) not in (0, 1):
                raise ValueError(f"{path}: line {line_no}: label must be 0 or 1")
            pairs.append(
                {
                    "context": str(obj["context"]),
                    "claim": str(obj["claim"]),
                    "label": int(obj["label"]),
                    "fold": int(obj["fold"]),
                }
            )
    return pairs


def train_fold(spec: TrainSpec, pairs: list[dict], out_dir: str | Path) -> Path:
    """Train one artifact on the spec's training folds and write it out."""
    train_pairs = [p for p in pairs if p["fold"] in spec.trained_on_folds]
    if not train_pairs:
        raise ValueError(f"no training pairs in folds {spec.trained_on_folds}")

    torch.manual_seed(spec.seed)
    model = PairEncoder(spec.encoder)
    if spec.checkpoint != "tiny-rand":
        state = torch.load(spec.checkpoint, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model.train()

    ids = torch.tensor(
        [encode_pair(p["context"], p["claim"], spec.encoder) for p in train_pairs],
        dtype=torch.long,
    )
    labels = torch.tensor([p["label"] for p in train_pairs], dtype=torch.float32)
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.learning_rate)
    loss_fn = nn.BCEWithLogitsLoss()

    n = len(train_pairs)
    for _ in range(spec.epochs):
        order = torch.randperm(n)
        for start in range(0, n, spec.batch_size):
            batch = order[start : start + spec.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(ids[batch]), labels[batch])
            loss.backward()
            optimizer.step()

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_dir / WEIGHTS_FILE)
    info = {
        "mode": MODE_FINETUNED,
        "scorer_id": spec.scorer_id,
        "trained_on_folds": spec.trained_on_folds,
        "held_out_fold": spec.held_out_fold,
        "k": spec.k,
        "seed": spec.seed,
        "epochs": spec.epochs,
        "learning_rate": spec.learning_rate,
        "checkpoint": spec.checkpoint,
        "n_train_pairs": len(train_pairs),
        "encoder": spec.encoder.to_dict(),
    }
    with open(out_dir / INFO_FILE, "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


def write_lexical_artifact(out_dir: str | Path, scorer_id: str = "lexical-overlap") -> Path:
    """Pre-trained (no fine-tune) mode: entailment-style lexical scoring."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    info = {
        "mode": MODE_LEXICAL,
        "scorer_id": scorer_id,
        "trained_on_folds": [],
    }
    with open(out_dir / INFO_FILE, "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir
