"""Keyword-triggered highlight spans plus seeded decoy highlights.

Patterns are literal tokens or trailing-asterisk prefixes ("retir*"), matched
case-insensitively against whole tokens only, so "layoff" never fires inside
"playoff". Decoys are extra highlights over non-matching tokens, inserted at a
configured rate so annotators cannot lean on highlights alone; they are
visually identical to keyword highlights (they borrow a real group name for
coloring) and only the retained `source` field tells them apart in exports.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .tokenizer import tokenize


@dataclass(frozen=True)
class HighlightSpan:
    document_index: int
    start: int
    end: int
    source: str  # "keyword" | "decoy"
    group: str   # keyword group name; decoys carry a borrowed group


def compile_pattern(pattern: str):
    """Return a token predicate for a literal or trailing-* prefix pattern."""
    if not pattern or pattern == "*":
        raise ValueError(f"empty keyword pattern {pattern!r}")
    lowered = pattern.lower()
    if lowered.endswith("*"):
        prefix = lowered[:-1]
        if "*" in prefix:
            raise ValueError(
                f"pattern {pattern!r}: only a single trailing * wildcard is supported"
            )
        return lambda token: token.startswith(prefix)
    if "*" in lowered:
        raise ValueError(
            f"pattern {pattern!r}: only a single trailing * wildcard is supported"
        )
    return lambda token: token == lowered


def match_keywords(
    text: str,
    keyword_groups: Mapping[str, Sequence[str]],
    document_index: int = 0,
) -> list[HighlightSpan]:
    """Whole-token keyword matches; one span per (matching group, token)."""
    compiled = {
        group: [compile_pattern(p) for p in patterns]
        for group, patterns in keyword_groups.items()
    }
    spans: list[HighlightSpan] = []
    for token in tokenize(text):
        for group, predicates in compiled.items():
            if any(pred(token.text) for pred in predicates):
                spans.append(
                    HighlightSpan(
                        document_index=document_index,
                        start=token.start,
                        end=token.end,
                        source="keyword",
                        group=group,
                    )
                )
    return spans


def decoy_seed(user_id: str, instance_id: str) -> int:
    """Stable per-(user, instance) seed so re-renders never reshuffle decoys."""
    digest = hashlib.sha256(f"{user_id}\x1f{instance_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def add_decoys(
    text: str,
    keyword_spans: list[HighlightSpan],
    decoy_rate: float,
    seed: int,
    document_index: int = 0,
    group_names: Sequence[str] = (),
) -> list[HighlightSpan]:
    """Append round(rate * candidates) decoy spans over non-keyword tokens.

    Candidates are tokens not covered by any keyword span, so decoys can never
    overlap a keyword highlight. The draw is a seeded uniform sample; the same
    (text, config, seed) always yields the same decoys.
    """
    if not 0 <= decoy_rate < 1:
        raise ValueError(f"decoy_rate must be in [0, 1), got {decoy_rate}")
    covered = [(s.start, s.end) for s in keyword_spans if s.document_index == document_index]
    candidates = [
        token
        for token in tokenize(text)
        if not any(start < token.end and token.start < end for start, end in covered)
    ]
    count = round(decoy_rate * len(candidates))
    if count == 0:
        return list(keyword_spans)
    rng = random.Random(seed)
    chosen = rng.sample(candidates, count)
    groups = list(group_names) or [s.group for s in keyword_spans] or ["decoy"]
    decoys = [
        HighlightSpan(
            document_index=document_index,
            start=token.start,
            end=token.end,
            source="decoy",
            group=rng.choice(groups),
        )
        for token in sorted(chosen, key=lambda t: t.start)
    ]
    return list(keyword_spans) + decoys


def document_highlights(
    text: str,
    keyword_groups: Mapping[str, Sequence[str]],
    decoy_rate: float,
    seed: int,
    document_index: int = 0,
) -> list[HighlightSpan]:
    """Keyword matching and decoy insertion for one displayed document."""
    spans = match_keywords(text, keyword_groups, document_index=document_index)
    return add_decoys(
        text,
        spans,
        decoy_rate,
        seed,
        document_index=document_index,
        group_names=sorted(keyword_groups),
    )
