"""Shared tokenizer used by both highlighting and classifier featurization.

One tokenizer, one truth: highlight spans and n-gram features must agree on
token boundaries, so this is the only place tokens are defined. A token is a
maximal run of alphanumeric characters (Unicode-aware, underscore excluded);
offsets are code-point offsets into the original string.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class Token:
    text: str  # lowercased
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    """Split text into lowercased alphanumeric-run tokens with offsets."""
    return [
        Token(m.group(0).lower(), m.start(), m.end())
        for m in _TOKEN_RE.finditer(text)
    ]
