"""Credit-classification LLM pipeline with factual-error feedback loops."""

__version__ = "0.1.0"
