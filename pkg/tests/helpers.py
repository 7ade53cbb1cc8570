"""Shared helpers for the test suite."""

from __future__ import annotations

import random
from typing import Optional

from pathcons.backends import Completion, CompletionBackend, CompletionRequest
from pathcons.core import AnswerKind, Question, make_stem
from pathcons.traceio import trace_to_dict


def question(qid="q1", text="What is one plus two?", gold="3", kind=AnswerKind.NUMERIC):
    return Question(id=qid, prompt_body=make_stem(text), gold_answer=gold, answer_kind=kind)


def answer_text(answer, steps=("First step. ", "Second step. ")):
    """A scripted generation with real sentence structure before the marker."""
    return "".join(steps) + f"The answer is {answer}."


class RecordingBackend(CompletionBackend):
    """Wraps another backend and captures every prompt it sees."""

    def __init__(self, inner: CompletionBackend):
        self.inner = inner
        self.prompts: list[str] = []

    def complete(self, request: CompletionRequest, rng: Optional[random.Random] = None) -> Completion:
        self.prompts.append(request.prompt)
        return self.inner.complete(request, rng=rng)


class FailingBackend(CompletionBackend):
    """Raises a chosen BackendError on selected call indices."""

    def __init__(self, inner: CompletionBackend, fail_on: set[int], error: Exception):
        self.inner = inner
        self.fail_on = fail_on
        self.error = error
        self.calls = 0

    def complete(self, request: CompletionRequest, rng: Optional[random.Random] = None) -> Completion:
        index = self.calls
        self.calls += 1
        if index in self.fail_on:
            raise self.error
        return self.inner.complete(request, rng=rng)


def strip_identity(trace) -> dict:
    """Trace dict with the fields that legitimately differ between SC and a
    gate-closed PC run removed (strategy label, gate event log)."""
    raw = trace_to_dict(trace)
    del raw["strategy"]
    del raw["window_events"]
    return raw
