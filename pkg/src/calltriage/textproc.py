"""Shared text tokenization.

Retrieval embeddings, keyword matching, and the text-similarity metrics all
tokenize through this single definition so their token streams agree.
"""

from __future__ import annotations

import re

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN.findall(text.lower())


def contains_token_seq(tokens: list[str], needle: list[str]) -> bool:
    """True if `needle` occurs as a contiguous subsequence of `tokens`."""
    if not needle:
        return False
    n = len(needle)
    for i in range(len(tokens) - n + 1):
        if tokens[i : i + n] == needle:
            return True
    return False
