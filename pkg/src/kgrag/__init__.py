"""Causal knowledge graphs from ranked abstracts, graph-derived MCQ probes and
RAG evaluation with significance reporting."""

__version__ = "0.1.0"
