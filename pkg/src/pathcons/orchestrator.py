"""The four decoding strategies.

run_path_consistency implements the extract-and-sample loop: branches are
generated window by window, a confidence gate runs at each window boundary
over every answer seen so far, and a passing gate replaces the prefix pool
with extractions from the last window's majority paths.  The other three
runners are the baselines it is compared against.

All runners are single-threaded and deterministic given (question, config,
seed, backend); parallelism across questions belongs to the caller.
"""

from __future__ import annotations

import logging
import random
from typing import Optional

from .backends import BackendError, Completion, CompletionBackend, CompletionRequest
from .confidence import confidence_gate, tally_or_none
from .core import (
    NO_ANSWER,
    Question,
    ReasoningPath,
    RunConfig,
    RunTrace,
    Strategy,
    WindowEvent,
    extract_answer,
)
from .prefix import PrefixPool, advance_pool, sample_prefix

logger = logging.getLogger(__name__)

# Adaptive stopping needs a few answers before the posterior is worth acting
# on: a unanimous pair already scores 0.875, so gating from the first branch
# would stop almost immediately at common thresholds.
AC_MIN_SAMPLES = 4


def aggregate(answers: list[Optional[str]]) -> str:
    """Majority vote with first-seen tie-break; answerless entries are
    ignored and an empty field yields the no-answer sentinel."""
    vote = tally_or_none(answers)
    return vote.majority_answer if vote is not None else NO_ANSWER


def _request(question: Question, config: RunConfig, exemplars: str, prefix: str) -> CompletionRequest:
    return CompletionRequest(
        prompt=exemplars + question.prompt_body + prefix,
        temperature=config.sampling.temperature,
        top_p=config.sampling.top_p,
        max_generated_tokens=config.sampling.max_generated_tokens,
        stop_sequences=config.sampling.stop_sequences,
    )


def _complete_branch(
    backend: CompletionBackend,
    request: CompletionRequest,
    rng: random.Random,
    question_id: str,
    branch_index: int,
) -> Completion:
    try:
        return backend.complete(request, rng=rng)
    except BackendError as exc:
        logger.warning("question %s branch %d failed: %s", question_id, branch_index, exc)
        return Completion(text="", generated_token_count=0, latency=0.0)


def _finish(
    question: Question,
    strategy: Strategy,
    paths: list[ReasoningPath],
    events: list[WindowEvent],
    stopped_early_at: Optional[int] = None,
) -> RunTrace:
    return RunTrace(
        question_id=question.id,
        strategy=strategy,
        branches=tuple(paths),
        window_events=tuple(events),
        final_answer=aggregate([p.answer for p in paths]),
        total_generated_tokens=sum(p.generated_token_count for p in paths),
        stopped_early_at=stopped_early_at,
    )


def run_path_consistency(
    question: Question,
    config: RunConfig,
    backend: CompletionBackend,
    rng: random.Random,
    exemplars: str = "",
) -> RunTrace:
    pool = PrefixPool.empty()
    paths: list[ReasoningPath] = []
    events: list[WindowEvent] = []
    for branch_index in range(config.max_branch):
        prefix = sample_prefix(pool, rng)
        completion = _complete_branch(
            backend, _request(question, config, exemplars, prefix), rng, question.id, branch_index
        )
        paths.append(
            ReasoningPath.build(
                branch_index=branch_index,
                prefix_used=prefix,
                generated_text=completion.text,
                answer=extract_answer(completion.text, question.answer_kind),
                generated_token_count=completion.generated_token_count,
                latency=completion.latency,
            )
        )
        if (branch_index + 1) % config.window_size == 0:
            vote = tally_or_none([p.answer for p in paths])
            gate = confidence_gate(vote, config.confidence_threshold)
            extracted = False
            if pool.level < config.max_prefix_level:
                advanced = advance_pool(
                    pool,
                    gate,
                    paths[-config.window_size:],
                    vote.majority_answer if vote is not None else None,
                )
                extracted = advanced.level > pool.level
                pool = advanced
            events.append(
                WindowEvent(
                    after_branch=branch_index + 1,
                    confidence=gate.value,
                    extracted=extracted,
                    prefix_level_after=pool.level,
                    pool_size_after=len(pool.prefixes),
                )
            )
    return _finish(question, Strategy.PC, paths, events)


def run_self_consistency(
    question: Question,
    config: RunConfig,
    backend: CompletionBackend,
    rng: random.Random,
    exemplars: str = "",
) -> RunTrace:
    paths = []
    for branch_index in range(config.max_branch):
        completion = _complete_branch(
            backend, _request(question, config, exemplars, ""), rng, question.id, branch_index
        )
        paths.append(
            ReasoningPath.build(
                branch_index=branch_index,
                prefix_used="",
                generated_text=completion.text,
                answer=extract_answer(completion.text, question.answer_kind),
                generated_token_count=completion.generated_token_count,
                latency=completion.latency,
            )
        )
    return _finish(question, Strategy.SC, paths, [])


def run_adaptive_consistency(
    question: Question,
    config: RunConfig,
    backend: CompletionBackend,
    rng: random.Random,
    exemplars: str = "",
    min_samples: int = AC_MIN_SAMPLES,
) -> RunTrace:
    """Stop sampling as soon as the gate passes (checked after every branch,
    once min_samples branches exist)."""
    paths: list[ReasoningPath] = []
    events: list[WindowEvent] = []
    stopped_early_at = None
    for branch_index in range(config.max_branch):
        completion = _complete_branch(
            backend, _request(question, config, exemplars, ""), rng, question.id, branch_index
        )
        paths.append(
            ReasoningPath.build(
                branch_index=branch_index,
                prefix_used="",
                generated_text=completion.text,
                answer=extract_answer(completion.text, question.answer_kind),
                generated_token_count=completion.generated_token_count,
                latency=completion.latency,
            )
        )
        gate = confidence_gate(tally_or_none([p.answer for p in paths]), config.confidence_threshold)
        events.append(
            WindowEvent(
                after_branch=branch_index + 1,
                confidence=gate.value,
                extracted=False,
                prefix_level_after=0,
                pool_size_after=0,
            )
        )
        if len(paths) >= min_samples and gate.confident and branch_index + 1 < config.max_branch:
            stopped_early_at = branch_index + 1
            break
    return _finish(question, Strategy.AC, paths, events, stopped_early_at)


def run_early_stopping(
    question: Question,
    config: RunConfig,
    backend: CompletionBackend,
    rng: random.Random,
    exemplars: str = "",
) -> RunTrace:
    """Exit after the first complete window whose answers are identical and
    non-null; otherwise consume the whole budget."""
    paths: list[ReasoningPath] = []
    events: list[WindowEvent] = []
    stopped_early_at = None
    for branch_index in range(config.max_branch):
        completion = _complete_branch(
            backend, _request(question, config, exemplars, ""), rng, question.id, branch_index
        )
        paths.append(
            ReasoningPath.build(
                branch_index=branch_index,
                prefix_used="",
                generated_text=completion.text,
                answer=extract_answer(completion.text, question.answer_kind),
                generated_token_count=completion.generated_token_count,
                latency=completion.latency,
            )
        )
        if (branch_index + 1) % config.window_size == 0:
            gate = confidence_gate(
                tally_or_none([p.answer for p in paths]), config.confidence_threshold
            )
            events.append(
                WindowEvent(
                    after_branch=branch_index + 1,
                    confidence=gate.value,
                    extracted=False,
                    prefix_level_after=0,
                    pool_size_after=0,
                )
            )
            window_answers = [p.answer for p in paths[-config.window_size:]]
            unanimous = window_answers[0] is not None and all(
                a == window_answers[0] for a in window_answers
            )
            if unanimous and branch_index + 1 < config.max_branch:
                stopped_early_at = branch_index + 1
                break
    return _finish(question, Strategy.ESC, paths, events, stopped_early_at)


_RUNNERS = {
    Strategy.SC: run_self_consistency,
    Strategy.PC: run_path_consistency,
    Strategy.AC: run_adaptive_consistency,
    Strategy.ESC: run_early_stopping,
}


def run_strategy(
    strategy: Strategy,
    question: Question,
    config: RunConfig,
    backend: CompletionBackend,
    rng: random.Random,
    exemplars: str = "",
) -> RunTrace:
    return _RUNNERS[strategy](question, config, backend, rng, exemplars=exemplars)
