"""Aggregation over collections of run traces.

Token counts are attributed per branch against gold answers, strategy pairs
are compared on accuracy / token / latency axes, and gate confidence values
are binned for histogram export.  Latency comparisons are reported but
hardware-dependent; token decrease is the portable efficiency number.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO

from .confidence import beta_confidence, tally_or_none
from .core import RunTrace

logger = logging.getLogger(__name__)


class QuestionSetMismatchError(ValueError):
    """Trace collections being compared cover different question sets."""


@dataclass(frozen=True)
class TokenStats:
    tokens_on_correct_paths: int
    tokens_on_incorrect_paths: int
    tokens_on_answerless_paths: int
    fraction_incorrect: float
    skipped_traces: int = 0


@dataclass(frozen=True)
class StrategyComparison:
    accuracy_delta: float
    token_decrease_percent: float
    latency_speedup_percent: Optional[float]


@dataclass(frozen=True)
class HistogramBin:
    low: float
    high: float
    count: int


@dataclass(frozen=True)
class LevelStats:
    branch_count: int
    token_decrease_percent: float
    latency_speedup_percent: Optional[float]


def token_proportions(traces: Sequence[RunTrace], gold_by_question: dict[str, str]) -> TokenStats:
    """Attribute each branch's generated tokens to correct / incorrect /
    answerless by comparing its answer to gold.  Traces without a gold answer
    are skipped and counted."""
    correct = incorrect = answerless = 0
    skipped = 0
    for trace in traces:
        gold = gold_by_question.get(trace.question_id)
        if gold is None:
            skipped += 1
            continue
        for path in trace.branches:
            if path.answer is None:
                answerless += path.generated_token_count
            elif path.answer == gold:
                correct += path.generated_token_count
            else:
                incorrect += path.generated_token_count
    if skipped:
        logger.warning("token_proportions skipped %d traces without gold answers", skipped)
    total = correct + incorrect + answerless
    return TokenStats(
        tokens_on_correct_paths=correct,
        tokens_on_incorrect_paths=incorrect,
        tokens_on_answerless_paths=answerless,
        fraction_incorrect=incorrect / total if total else 0.0,
        skipped_traces=skipped,
    )


def _accuracy(traces: Sequence[RunTrace], gold_by_question: dict[str, str]) -> float:
    if not traces:
        return 0.0
    hits = sum(1 for t in traces if gold_by_question.get(t.question_id) == t.final_answer)
    return hits / len(traces)


def _total_latency(traces: Sequence[RunTrace]) -> float:
    return sum(p.latency or 0.0 for t in traces for p in t.branches)


def _check_same_questions(baseline: Sequence[RunTrace], candidate: Sequence[RunTrace]) -> None:
    base_ids = sorted(t.question_id for t in baseline)
    cand_ids = sorted(t.question_id for t in candidate)
    if base_ids != cand_ids:
        raise QuestionSetMismatchError(
            f"baseline covers {len(base_ids)} questions, candidate {len(cand_ids)}; sets differ"
        )


def compare(
    baseline: Sequence[RunTrace],
    candidate: Sequence[RunTrace],
    gold_by_question: dict[str, str],
) -> StrategyComparison:
    """Candidate-vs-baseline deltas over the same question set.

    token_decrease_percent = (1 - candidate_tokens / baseline_tokens) * 100;
    latency speedup = (baseline_latency / candidate_latency - 1) * 100, or
    None when latencies were not recorded.
    """
    _check_same_questions(baseline, candidate)
    base_tokens = sum(t.total_generated_tokens for t in baseline)
    cand_tokens = sum(t.total_generated_tokens for t in candidate)
    decrease = (1 - cand_tokens / base_tokens) * 100 if base_tokens else 0.0
    base_latency = _total_latency(baseline)
    cand_latency = _total_latency(candidate)
    speedup = (base_latency / cand_latency - 1) * 100 if base_latency and cand_latency else None
    return StrategyComparison(
        accuracy_delta=_accuracy(candidate, gold_by_question) - _accuracy(baseline, gold_by_question),
        token_decrease_percent=decrease,
        latency_speedup_percent=speedup,
    )


def confidence_histogram(
    traces: Sequence[RunTrace], at_branch: int, bins: int
) -> list[HistogramBin]:
    """Distribution of the majority answer's gate confidence with each trace
    truncated at `at_branch` branches, over `bins` equal-width bins on
    [0, 1]."""
    if bins <= 0:
        raise ValueError("bins must be positive")
    if any(len(t.branches) < at_branch for t in traces):
        raise ValueError("at_branch exceeds the branch count of some trace")
    counts = [0] * bins
    for trace in traces:
        vote = tally_or_none([p.answer for p in trace.branches[:at_branch]])
        value = beta_confidence(vote.v_m, vote.n) if vote is not None else 0.0
        index = min(int(value * bins), bins - 1)
        counts[index] += 1
    return [
        HistogramBin(low=i / bins, high=(i + 1) / bins, count=counts[i]) for i in range(bins)
    ]


def branch_levels(trace: RunTrace) -> list[int]:
    """Pool level active when each branch was generated, replayed from the
    trace's window events."""
    levels = []
    level = 0
    events = iter(trace.window_events)
    upcoming = next(events, None)
    for index in range(len(trace.branches)):
        while upcoming is not None and upcoming.after_branch <= index:
            level = upcoming.prefix_level_after
            upcoming = next(events, None)
        levels.append(level)
    return levels


def per_level_breakdown(
    candidate: Sequence[RunTrace],
    baseline: Sequence[RunTrace],
) -> dict[int, LevelStats]:
    """Token/latency deltas per prefix level, each candidate branch paired
    with the baseline branch of the same index on the same question."""
    _check_same_questions(baseline, candidate)
    base_by_id = {t.question_id: t for t in baseline}
    cand_tokens: dict[int, int] = {}
    base_tokens: dict[int, int] = {}
    cand_latency: dict[int, float] = {}
    base_latency: dict[int, float] = {}
    branches: dict[int, int] = {}
    for trace in candidate:
        counterpart = base_by_id[trace.question_id]
        levels = branch_levels(trace)
        for index, path in enumerate(trace.branches):
            if index >= len(counterpart.branches):
                continue
            level = levels[index]
            other = counterpart.branches[index]
            branches[level] = branches.get(level, 0) + 1
            cand_tokens[level] = cand_tokens.get(level, 0) + path.generated_token_count
            base_tokens[level] = base_tokens.get(level, 0) + other.generated_token_count
            cand_latency[level] = cand_latency.get(level, 0.0) + (path.latency or 0.0)
            base_latency[level] = base_latency.get(level, 0.0) + (other.latency or 0.0)
    breakdown = {}
    for level in sorted(branches):
        decrease = (
            (1 - cand_tokens[level] / base_tokens[level]) * 100 if base_tokens[level] else 0.0
        )
        speedup = (
            (base_latency[level] / cand_latency[level] - 1) * 100
            if base_latency[level] and cand_latency[level]
            else None
        )
        breakdown[level] = LevelStats(
            branch_count=branches[level],
            token_decrease_percent=decrease,
            latency_speedup_percent=speedup,
        )
    return breakdown


def write_histogram(bins: Sequence[HistogramBin], out: TextIO, delimiter: str = ",") -> None:
    out.write(delimiter.join(("bin_low", "bin_high", "count")) + "\n")
    for entry in bins:
        out.write(delimiter.join((repr(entry.low), repr(entry.high), str(entry.count))) + "\n")
