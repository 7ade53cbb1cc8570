import random

import pytest

from pathcons.core import (
    AnswerKind,
    Question,
    ReasoningPath,
    RunConfig,
    VoteTally,
    extract_answer,
    make_stem,
    normalize_answer,
)


@pytest.mark.parametrize(
    "raw,kind,expected",
    [
        ("$8", AnswerKind.NUMERIC, "8"),
        ("(A)", AnswerKind.CHOICE_LETTER, "A"),
        ("3", AnswerKind.NUMERIC, "3"),
        ("1,234", AnswerKind.NUMERIC, "1234"),
        ("$1,000.", AnswerKind.NUMERIC, "1000"),
        ("-5", AnswerKind.NUMERIC, "-5"),
        ("2.5", AnswerKind.NUMERIC, "2.5"),
        (" (b).", AnswerKind.CHOICE_LETTER, "B"),
        ("C", AnswerKind.CHOICE_LETTER, "C"),
        (" Yes.", AnswerKind.YES_NO, "yes"),
        ("No", AnswerKind.YES_NO, "no"),
        ("  blue whale ", AnswerKind.FREE_TEXT, "blue whale"),
    ],
)
def test_normalize_answer(raw, kind, expected):
    assert normalize_answer(raw, kind) == expected


@pytest.mark.parametrize(
    "raw,kind",
    [
        ("no digits here", AnswerKind.NUMERIC),
        ("none", AnswerKind.CHOICE_LETTER),  # word, not a standalone letter
        ("maybe", AnswerKind.YES_NO),
        ("   ", AnswerKind.FREE_TEXT),
    ],
)
def test_normalize_answer_unparseable(raw, kind):
    assert normalize_answer(raw, kind) is None


def test_normalize_is_idempotent():
    rng = random.Random(7)
    samples = {
        AnswerKind.NUMERIC: ["$8", "1,234.", "-5", "2.50", "$1,000", "42."],
        AnswerKind.CHOICE_LETTER: ["(A)", "b.", " (c) ", "D"],
        AnswerKind.YES_NO: ["Yes.", "no", " NO ", "the answer: yes"],
        AnswerKind.FREE_TEXT: ["  spaced out  ", "word", "two words"],
    }
    for kind, raws in samples.items():
        for raw in raws + [str(rng.randint(-999, 9999)) for _ in range(20)]:
            once = normalize_answer(raw, kind)
            if once is None:
                continue
            assert normalize_answer(once, kind) == once, (kind, raw)


def test_extract_answer_examples():
    assert extract_answer("1 + 2 = 3 bolts in total. The answer is 3.", AnswerKind.NUMERIC) == "3"
    assert extract_answer("no marker here", AnswerKind.NUMERIC) is None
    # last occurrence wins
    assert extract_answer("answer is 5. Wait, the answer is 6.", AnswerKind.NUMERIC) == "6"


def test_extract_answer_case_insensitive():
    assert extract_answer("So the Answer Is (B).", AnswerKind.CHOICE_LETTER) == "B"


def test_extract_answer_marker_with_empty_tail():
    assert extract_answer("the answer is", AnswerKind.NUMERIC) is None


def test_extract_roundtrip_matches_normalize():
    cases = {
        AnswerKind.NUMERIC: ["8", "-3", "2.5", "1234"],
        AnswerKind.CHOICE_LETTER: ["A", "D"],
        AnswerKind.YES_NO: ["yes", "no"],
    }
    for kind, tokens in cases.items():
        for token in tokens:
            assert extract_answer(f"The answer is {token}.", kind) == normalize_answer(token, kind)
    # free-text keeps its tail verbatim, so probe without the trailing period
    assert extract_answer("The answer is blue whale", AnswerKind.FREE_TEXT) == "blue whale"


def test_make_stem():
    assert make_stem("What is 1+1?") == "Q: What is 1+1?\nA:"


def test_question_requires_id():
    with pytest.raises(ValueError):
        Question(id="", prompt_body="Q: x\nA:")


def test_reasoning_path_concatenation_invariant():
    path = ReasoningPath.build(0, "pre ", "gen", "3", 5)
    assert path.full_reasoning == "pre gen"
    with pytest.raises(ValueError):
        ReasoningPath(
            branch_index=0,
            prefix_used="pre",
            generated_text="gen",
            full_reasoning="mismatch",
            answer=None,
            generated_token_count=0,
        )
    with pytest.raises(ValueError):
        ReasoningPath.build(0, "", "x", None, -1)


def test_vote_tally_invariants():
    VoteTally(counts={"3": 2, "5": 1}, n=3, majority_answer="3", v_m=2)
    with pytest.raises(ValueError):
        VoteTally(counts={"3": 2}, n=3, majority_answer="3", v_m=2)
    with pytest.raises(ValueError):
        VoteTally(counts={"3": 2, "5": 1}, n=3, majority_answer="5", v_m=1)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(max_branch=0)
    with pytest.raises(ValueError):
        RunConfig(window_size=21, max_branch=20)
    with pytest.raises(ValueError):
        RunConfig(confidence_threshold=1.5)


def test_run_config_derived_window():
    config = RunConfig.with_derived_window(max_branch=20, max_prefix_level=3)
    assert config.window_size == 5
    config = RunConfig.with_derived_window(max_branch=20, max_prefix_level=4)
    assert config.window_size == 4
