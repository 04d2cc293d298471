"""A small transformer encoder for (context, claim) pair classification.

Tokenization is a deterministic hashing trick (crc32 buckets), so no external
vocabulary or checkpoint download is needed; the encoder trains from scratch
on CPU in seconds at the desk-scale defaults.
"""
from __future__ import annotations

import re
import zlib
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn

PAD_ID = 0
SEP_ID = 1
_OFFSET = 2

_TOKEN = re.compile(r"\w+")


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = 2048
    dim: int = 32
    heads: int = 4
    layers: int = 1
    feedforward: int = 64
    max_len: int = 64
    dropout: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "EncoderConfig":
        return cls(**obj)


def hash_tokens(text: str, vocab_size: int) -> list[int]:
    return [
        _OFFSET + zlib.crc32(token.lower().encode("utf-8")) % vocab_size
        for token in _TOKEN.findall(text)
    ]


def encode_pair(context: str, claim: str, config: EncoderConfig) -> list[int]:
    """Token ids for "context [SEP] claim", truncated and padded to max_len.

    The claim is kept whole when truncating; context gets whatever room is
    left, since the claim carries the statement under judgment.
    """
    claim_ids = hash_tokens(claim, config.vocab_size)[: config.max_len - 2]
    room = config.max_len - 1 - len(claim_ids)
    context_ids = hash_tokens(context, config.vocab_size)[:room]
    ids = context_ids + [SEP_ID] + claim_ids
    ids += [PAD_ID] * (config.max_len - len(ids))
    return ids


class PairEncoder(nn.Module):
    """Embedding + transformer encoder + mean pool + binary head."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size + _OFFSET, config.dim,
                                      padding_idx=PAD_ID)
        self.positions = nn.Embedding(config.max_len, config.dim)
        layer = nn.TransformerEncoderLayer(
            d_model=config.dim,
            nhead=config.heads,
            dim_feedforward=config.feedforward,
            dropout=config.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=config.layers)
        self.head = nn.Linear(config.dim, 1)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        mask = ids == PAD_ID
        positions = torch.arange(ids.shape[1], device=ids.device).unsqueeze(0)
        hidden = self.embedding(ids) + self.positions(positions)
        hidden = self.encoder(hidden, src_key_padding_mask=mask)
        keep = (~mask).unsqueeze(-1).float()
        pooled = (hidden * keep).sum(dim=1) / keep.sum(dim=1).clamp(min=1.0)
        return self.head(pooled).squeeze(-1)

    @torch.no_grad()
    def probability(self, context: str, claim: str) -> float:
        self.eval()
        ids = torch.tensor([encode_pair(context, claim, self.config)], dtype=torch.long)
        return float(torch.sigmoid(self.forward(ids))[0])
