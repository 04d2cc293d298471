"""Scoring service: per-fold fine-tuned encoders for factual-error probabilities."""

__version__ = "0.1.0"
