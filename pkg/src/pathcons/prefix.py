"""Prefix extraction and sampling: the "extract" and "sample" halves.

Reasoning text is segmented on period-plus-whitespace or bare newlines, with
each sentence keeping its delimiter so prefixes concatenate back verbatim.
Extraction takes the leading sentences of window paths that voted with the
majority, always leaving the final segment for the model to regenerate.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .confidence import ConfidenceReport
from .core import ANSWER_MARKER, ReasoningPath

_SENTENCE_DELIMITER = re.compile(r"(\.\s|\.\n|\n)")


@dataclass(frozen=True)
class PrefixPool:
    """Current prefix candidates plus the number of successful extractions."""

    prefixes: tuple[str, ...] = ()
    level: int = 0

    @classmethod
    def empty(cls) -> "PrefixPool":
        return cls()


def _split_segments(text: str) -> tuple[list[str], str]:
    """Delimiter-retaining split: (full sentences, trailing unterminated part)."""
    parts = _SENTENCE_DELIMITER.split(text)
    sentences = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
    return sentences, parts[-1]


def split_sentences(text: str) -> list[str]:
    """Sentences with their delimiters; a trailing segment with no delimiter
    is excluded.  Decimal numerals are not split (no whitespace follows the
    period)."""
    return _split_segments(text)[0]


def extract_prefixes(
    window_paths: Sequence[ReasoningPath],
    majority_answer: Optional[str],
    current_level: int,
) -> list[str]:
    """Leading-sentence prefixes from majority-matching paths of one window.

    For each eligible path the first (current_level + 1) sentences are joined,
    capped so the path's final segment (the one running into the answer
    marker) is never consumed: a prefix is always a strict prefix of its
    source reasoning.  Short paths contribute shorter prefixes; empty results
    are dropped.  Duplicates are kept, weighting frequent prefixes.
    """
    if majority_answer is None:
        return []
    prefixes = []
    for path in window_paths:
        marker = ANSWER_MARKER.search(path.full_reasoning)
        if marker is None or path.answer != majority_answer:
            continue
        pre_marker = path.full_reasoning[: marker.start()]
        sentences, trailing = _split_segments(pre_marker)
        # The segment count includes the unterminated trailing fragment; the
        # cap protects whichever segment comes last.
        segment_count = len(sentences) + (1 if trailing else 0)
        usable = min(current_level + 1, max(segment_count - 1, 0), len(sentences))
        prefix = "".join(sentences[:usable])
        if prefix:
            prefixes.append(prefix)
    return prefixes


def sample_prefix(pool: PrefixPool, rng: random.Random) -> str:
    """Uniform draw from the pool; an empty pool yields the empty prefix
    without consuming randomness."""
    if not pool.prefixes:
        return ""
    return pool.prefixes[rng.randint(0, len(pool.prefixes) - 1)]


def advance_pool(
    pool: PrefixPool,
    gate: ConfidenceReport,
    window_paths: Sequence[ReasoningPath],
    majority_answer: Optional[str],
) -> PrefixPool:
    """Window-boundary pool update.

    A failed gate leaves the pool untouched.  A passing gate replaces the
    prefix list with a fresh extraction from this window (never merges) and
    bumps the level; if the extraction comes back empty, subsequent branches
    simply run unprefixed.
    """
    if not gate.confident:
        return pool
    extracted = extract_prefixes(window_paths, majority_answer, pool.level)
    return PrefixPool(prefixes=tuple(extracted), level=pool.level + 1)
