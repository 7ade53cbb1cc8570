import random
import string

import pytest

from pathcons.core import NO_ANSWER, ReasoningPath, RunTrace, Strategy, WindowEvent
from pathcons.traceio import (
    emit_trace_line,
    parse_trace_line,
    read_traces,
    trace_from_dict,
    trace_to_dict,
    write_traces,
)


def random_trace(rng: random.Random) -> RunTrace:
    branch_count = rng.randint(1, 12)
    branches = []
    for i in range(branch_count):
        prefix = "".join(rng.choices(string.ascii_lowercase + ". ", k=rng.randint(0, 30)))
        generated = "".join(rng.choices(string.printable, k=rng.randint(1, 60)))
        branches.append(
            ReasoningPath.build(
                branch_index=i,
                prefix_used=prefix,
                generated_text=generated,
                answer=rng.choice([None, str(rng.randint(0, 99))]),
                generated_token_count=rng.randint(0, 500),
                latency=rng.choice([None, rng.random() * 3]),
            )
        )
    events = tuple(
        WindowEvent(
            after_branch=j + 1,
            confidence=rng.random(),
            extracted=rng.random() < 0.5,
            prefix_level_after=rng.randint(0, 4),
            pool_size_after=rng.randint(0, 5),
        )
        for j in range(rng.randint(0, 4))
    )
    answered = [b.answer for b in branches if b.answer is not None]
    return RunTrace(
        question_id=f"q{rng.randint(0, 10_000)}",
        strategy=rng.choice(list(Strategy)),
        branches=tuple(branches),
        window_events=events,
        final_answer=answered[0] if answered else NO_ANSWER,
        total_generated_tokens=sum(b.generated_token_count for b in branches),
        stopped_early_at=rng.choice([None, branch_count]),
    )


def test_parse_emit_identity_on_randomized_traces():
    rng = random.Random(2024)
    for _ in range(100):
        trace = random_trace(rng)
        assert parse_trace_line(emit_trace_line(trace)) == trace


def test_dict_roundtrip():
    trace = random_trace(random.Random(5))
    assert trace_from_dict(trace_to_dict(trace)) == trace


def test_emission_is_byte_deterministic():
    trace = random_trace(random.Random(6))
    assert emit_trace_line(trace) == emit_trace_line(trace)


def test_file_roundtrip(tmp_path):
    rng = random.Random(7)
    traces = [random_trace(rng) for _ in range(10)]
    path = tmp_path / "traces.jsonl"
    write_traces(traces, path)
    assert read_traces(path) == traces
    # identical write -> identical bytes
    first = path.read_bytes()
    write_traces(traces, path)
    assert path.read_bytes() == first


def test_read_error_names_line(tmp_path):
    path = tmp_path / "broken.jsonl"
    good = emit_trace_line(random_trace(random.Random(8)))
    path.write_text(good + "\n{not json}\n")
    with pytest.raises(ValueError, match="broken.jsonl:2"):
        read_traces(path)
