"""Evaluation harness for retrieval-augmented LLM systems over fixture-backed tool environments."""

__version__ = "0.1.0"
