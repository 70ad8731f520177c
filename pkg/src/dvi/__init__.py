"""Deferred visual ingestion: structural page indexing, BM25 localization,
query-time VLM answering and the evaluation harness around it."""

__version__ = "0.1.0"
