"""Test corpus builders: a scripted worked-example ladder and synthetic task
suites with known answer statistics.

The robe word problem is the canonical prefix-ladder example: replaying its
four scripted stages through the extract-and-sample loop grows the prefix one
sentence per window, down to a final stage that only states the answer.  The
stage strings live in a versioned fixture file (same format as any scripted
backend record file) and are compared by byte equality in tests.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources

from .backends import (
    ScriptedBackend,
    SyntheticBackend,
    SyntheticModelParams,
    load_fixture_records,
    synthetic_case_text,
)
from .core import AnswerKind, Question, RunConfig, make_stem

ROBE_QUESTION_TEXT = (
    "A robe takes 2 bolts of blue fiber and half that much white fiber. "
    "How many bolts in total does it take?"
)

ROBE_LEVEL_PREFIXES = (
    "To make a robe, we need 2 bolts of blue fiber and half that much white fiber. ",
    "To make a robe, we need 2 bolts of blue fiber and half that much white fiber. "
    "2 * 1/2 = 1 bolt of white fiber. ",
    "To make a robe, we need 2 bolts of blue fiber and half that much white fiber. "
    "2 * 1/2 = 1 bolt of white fiber. 1 + 2 = 3 bolts in total. ",
)


@dataclass(frozen=True)
class WorkedExampleLadder:
    question: Question
    generations: tuple[str, ...]
    expected_prefixes: tuple[str, ...]

    @property
    def stage_reasonings(self) -> tuple[str, ...]:
        """Full reasoning text of each stage: sampled prefix + generation."""
        prefixes = ("",) + self.expected_prefixes
        return tuple(p + g for p, g in zip(prefixes, self.generations))


def _fixture_path(name: str):
    return resources.files("pathcons").joinpath("data", "fixtures", name)


PROMPT_NAMES = (
    "math_reasoning",
    "strategyqa",
    "ruin_names",
    "salient_translation",
    "boolean_expressions",
    "tracking_shuffled_objects",
    "logical_deduction",
)


def packaged_prompt(name: str) -> str:
    """Text of one of the shipped few-shot exemplar blocks (see
    PROMPT_NAMES); plain text, prepended to question stems verbatim."""
    if name not in PROMPT_NAMES:
        raise ValueError(f"unknown prompt {name!r}; available: {', '.join(PROMPT_NAMES)}")
    return (
        resources.files("pathcons")
        .joinpath("data", "prompts", f"{name}.txt")
        .read_text(encoding="utf-8")
    )


def robe_ladder_fixture() -> tuple[WorkedExampleLadder, ScriptedBackend]:
    """The robe question, a scripted backend replaying its four stages, and
    the prefix each extraction level is expected to produce."""
    with resources.as_file(_fixture_path("robe_ladder.jsonl")) as path:
        records = load_fixture_records(path)
    ladder = WorkedExampleLadder(
        question=Question(
            id="robe",
            prompt_body=make_stem(ROBE_QUESTION_TEXT),
            gold_answer="3",
            answer_kind=AnswerKind.NUMERIC,
        ),
        generations=tuple(r.text for r in records),
        expected_prefixes=ROBE_LEVEL_PREFIXES,
    )
    return ladder, ScriptedBackend(records)


def robe_ladder_config(**overrides) -> RunConfig:
    """One branch per window with an always-open gate, so each stage extracts
    the next prefix level."""
    settings = dict(
        max_branch=4, max_prefix_level=3, confidence_threshold=0.0, window_size=1, seed=0
    )
    settings.update(overrides)
    return RunConfig(**settings)


def _wrong_answer(gold: str) -> str:
    """The single incorrect answer a synthetic case can produce, derived from
    gold so it is recoverable from a dataset file alone."""
    return str(int(gold) + 1) if gold.isdigit() else gold + "_alt"


def synthetic_task_suite(
    num_questions: int,
    params: SyntheticModelParams,
    seed: int,
) -> tuple[list[Question], SyntheticBackend]:
    """Two-answer questions with known golds, wired to a synthetic backend.

    Regeneration with the same seed is byte-identical.
    """
    rng = random.Random(seed)
    questions = []
    for index in range(num_questions):
        case_id = f"q{index:04d}"
        gold = str(rng.randint(10, 98))
        questions.append(
            Question(
                id=case_id,
                prompt_body=make_stem(synthetic_case_text(case_id)),
                gold_answer=gold,
                answer_kind=AnswerKind.NUMERIC,
            )
        )
    return questions, synthetic_backend_for_questions(questions, params, seed=seed)


def synthetic_backend_for_questions(
    questions: list[Question],
    params: SyntheticModelParams,
    seed: int = 0,
) -> SyntheticBackend:
    answers = {}
    for question in questions:
        if question.gold_answer is None:
            raise ValueError(f"synthetic question {question.id} needs a gold answer")
        answers[question.id] = (question.gold_answer, _wrong_answer(question.gold_answer))
    return SyntheticBackend(params, answers, seed=seed)
