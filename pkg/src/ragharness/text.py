"""Text normalization shared by the matcher, the environment and the metric."""

from __future__ import annotations

import re

_PUNCT = re.compile(r"[^\w\s]|_", re.UNICODE)


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, turn punctuation into spaces and split on whitespace.

    >>> normalize_tokens("AI, Machine-Learning")
    ['ai', 'machine', 'learning']
    """
    if not text:
        return []
    return _PUNCT.sub(" ", text.lower()).split()


def normalize_text(text: str) -> str:
    return " ".join(normalize_tokens(text))


def render_value(value) -> str:
    """Render an attribute value the way prompts and gold answers show it."""
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return ", ".join(render_value(v) for v in value)
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)
