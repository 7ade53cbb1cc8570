"""Shared domain types and answer extraction/normalization.

Everything here is immutable after construction and safe to share across
threads; the two text operations are pure functions.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Optional

# Sentinel final answer for a run in which no branch produced an answer.
NO_ANSWER = "<no-answer>"

# Marker separating the reasoning body from the stated answer.  Matching is
# case-insensitive so restatements like "The Answer is 3" still count.
ANSWER_MARKER = re.compile(r"answer is", re.IGNORECASE)


def make_stem(question_text: str) -> str:
    """The "Q: ... A:" stem a sampled prefix is appended to verbatim."""
    return f"Q: {question_text}\nA:"


class AnswerKind(str, enum.Enum):
    NUMERIC = "numeric"
    CHOICE_LETTER = "choice-letter"
    YES_NO = "yes-no"
    FREE_TEXT = "free-text"


class Strategy(str, enum.Enum):
    SC = "sc"
    PC = "pc"
    AC = "ac"
    ESC = "esc"


@dataclass(frozen=True)
class Question:
    """One task item: the bare "Q: ... A:" stem, without few-shot exemplars."""

    id: str
    prompt_body: str
    gold_answer: Optional[str] = None
    answer_kind: AnswerKind = AnswerKind.NUMERIC

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("question id must be nonempty")


@dataclass(frozen=True)
class ReasoningPath:
    """One sampled branch: the prefix it started from plus what was generated.

    ``generated_token_count`` counts only ``generated_text``; the prefix was
    never generated by this branch.
    """

    branch_index: int
    prefix_used: str
    generated_text: str
    full_reasoning: str
    answer: Optional[str]
    generated_token_count: int
    latency: Optional[float] = None

    def __post_init__(self) -> None:
        if self.branch_index < 0:
            raise ValueError("branch_index must be >= 0")
        if self.generated_token_count < 0:
            raise ValueError("generated_token_count must be >= 0")
        if self.full_reasoning != self.prefix_used + self.generated_text:
            raise ValueError("full_reasoning must equal prefix_used + generated_text")

    @classmethod
    def build(
        cls,
        branch_index: int,
        prefix_used: str,
        generated_text: str,
        answer: Optional[str],
        generated_token_count: int,
        latency: Optional[float] = None,
    ) -> "ReasoningPath":
        return cls(
            branch_index=branch_index,
            prefix_used=prefix_used,
            generated_text=generated_text,
            full_reasoning=prefix_used + generated_text,
            answer=answer,
            generated_token_count=generated_token_count,
            latency=latency,
        )


@dataclass(frozen=True)
class VoteTally:
    """Answer multiset statistics with a deterministic first-seen tie-break."""

    counts: dict[str, int]
    n: int
    majority_answer: str
    v_m: int

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.n:
            raise ValueError("tally counts must sum to n")
        if self.counts.get(self.majority_answer) != self.v_m:
            raise ValueError("majority_answer must have count v_m")
        if self.v_m != max(self.counts.values()):
            raise ValueError("v_m must be the maximum count")


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.6
    top_p: float = 0.9
    max_generated_tokens: int = 256
    stop_sequences: tuple[str, ...] = ("Q:",)

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_generated_tokens <= 0:
            raise ValueError("max_generated_tokens must be positive")


@dataclass(frozen=True)
class RunConfig:
    """Branch budget, gating threshold, and window schedule for one run."""

    max_branch: int = 20
    max_prefix_level: int = 3
    confidence_threshold: float = 0.8
    window_size: int = 5
    sampling: SamplingParams = field(default_factory=SamplingParams)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_branch <= 0:
            raise ValueError("max_branch must be positive")
        if self.max_prefix_level < 0:
            raise ValueError("max_prefix_level must be >= 0")
        if not 0 <= self.confidence_threshold <= 1:
            raise ValueError("confidence_threshold must be in [0, 1]")
        if not 0 < self.window_size <= self.max_branch:
            raise ValueError("window_size must be in [1, max_branch]")

    @classmethod
    def with_derived_window(cls, max_branch: int, max_prefix_level: int, **kwargs) -> "RunConfig":
        """Window size floor(N / (L+1)): one potential extraction per level."""
        window = max(1, max_branch // (max_prefix_level + 1))
        return cls(
            max_branch=max_branch,
            max_prefix_level=max_prefix_level,
            window_size=window,
            **kwargs,
        )


@dataclass(frozen=True)
class WindowEvent:
    """Gate outcome recorded at a window boundary (or per branch for AC)."""

    after_branch: int
    confidence: float
    extracted: bool
    prefix_level_after: int
    pool_size_after: int


@dataclass(frozen=True)
class RunTrace:
    """Full per-question record of a strategy run."""

    question_id: str
    strategy: Strategy
    branches: tuple[ReasoningPath, ...]
    window_events: tuple[WindowEvent, ...]
    final_answer: str
    total_generated_tokens: int
    stopped_early_at: Optional[int] = None

    def __post_init__(self) -> None:
        expected = sum(p.generated_token_count for p in self.branches)
        if self.total_generated_tokens != expected:
            raise ValueError("total_generated_tokens must equal the sum over branches")


_CURRENCY = "$€£"
_NUMERIC_TOKEN = re.compile(rf"[-+]?[{re.escape(_CURRENCY)}]*\d[\d,]*(?:\.\d+)?")
_PAREN_LETTER = re.compile(r"\(([A-Za-z])\)")
_BARE_LETTER = re.compile(r"([A-Za-z])(?:[\s.,:;)!?']|$)")
_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def _normalize_numeric(text: str) -> Optional[str]:
    match = _NUMERIC_TOKEN.search(text)
    if match is None:
        return None
    token = match.group(0)
    for symbol in _CURRENCY + ",":
        token = token.replace(symbol, "")
    return token.rstrip(".")


def _normalize_choice_letter(text: str) -> Optional[str]:
    match = _PAREN_LETTER.search(text)
    if match is None:
        match = _BARE_LETTER.match(text)
    if match is None:
        return None
    return match.group(1).upper()


def normalize_answer(raw: str, kind: AnswerKind) -> Optional[str]:
    """Canonicalize a raw answer token for the given kind.

    Returns None when the token cannot be parsed under the kind; callers treat
    that branch as answerless.  Idempotent: normalizing a normalized answer is
    the identity.
    """
    text = raw.strip()
    if not text:
        return None
    if kind is AnswerKind.NUMERIC:
        return _normalize_numeric(text)
    if kind is AnswerKind.CHOICE_LETTER:
        return _normalize_choice_letter(text)
    if kind is AnswerKind.YES_NO:
        match = _YES_NO.search(text)
        return match.group(1).lower() if match else None
    return text


def extract_answer(generation: str, kind: AnswerKind) -> Optional[str]:
    """Pull the stated answer out of a generation.

    Splits on the last occurrence of the "answer is" marker so that a branch
    restating its answer wins over earlier mentions; the trailing segment goes
    through normalize_answer.  A missing marker is a valid no-answer outcome.
    """
    matches = list(ANSWER_MARKER.finditer(generation))
    if not matches:
        return None
    tail = generation[matches[-1].end():]
    return normalize_answer(tail, kind) if tail.strip() else None
