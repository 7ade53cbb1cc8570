"""Line-delimited trace persistence.

One JSON object per trace, keys sorted and separators fixed, so identical
runs produce byte-identical files and parse(emit(trace)) is the identity.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .core import ReasoningPath, RunTrace, Strategy, WindowEvent


def trace_to_dict(trace: RunTrace) -> dict:
    return {
        "question_id": trace.question_id,
        "strategy": trace.strategy.value,
        "branches": [
            {
                "branch_index": p.branch_index,
                "prefix_used": p.prefix_used,
                "generated_text": p.generated_text,
                "answer": p.answer,
                "generated_token_count": p.generated_token_count,
                "latency": p.latency,
            }
            for p in trace.branches
        ],
        "window_events": [
            {
                "after_branch": e.after_branch,
                "confidence": e.confidence,
                "extracted": e.extracted,
                "prefix_level_after": e.prefix_level_after,
                "pool_size_after": e.pool_size_after,
            }
            for e in trace.window_events
        ],
        "final_answer": trace.final_answer,
        "total_generated_tokens": trace.total_generated_tokens,
        "stopped_early_at": trace.stopped_early_at,
    }


def trace_from_dict(raw: dict) -> RunTrace:
    return RunTrace(
        question_id=raw["question_id"],
        strategy=Strategy(raw["strategy"]),
        branches=tuple(
            ReasoningPath.build(
                branch_index=p["branch_index"],
                prefix_used=p["prefix_used"],
                generated_text=p["generated_text"],
                answer=p["answer"],
                generated_token_count=p["generated_token_count"],
                latency=p["latency"],
            )
            for p in raw["branches"]
        ),
        window_events=tuple(
            WindowEvent(
                after_branch=e["after_branch"],
                confidence=e["confidence"],
                extracted=e["extracted"],
                prefix_level_after=e["prefix_level_after"],
                pool_size_after=e["pool_size_after"],
            )
            for e in raw["window_events"]
        ),
        final_answer=raw["final_answer"],
        total_generated_tokens=raw["total_generated_tokens"],
        stopped_early_at=raw["stopped_early_at"],
    )


def emit_trace_line(trace: RunTrace) -> str:
    return json.dumps(trace_to_dict(trace), sort_keys=True, separators=(",", ":"))


def parse_trace_line(line: str) -> RunTrace:
    return trace_from_dict(json.loads(line))


def write_traces(traces: Iterable[RunTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for trace in traces:
            handle.write(emit_trace_line(trace) + "\n")


def read_traces(path: str | Path) -> list[RunTrace]:
    traces = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            traces.append(parse_trace_line(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{line_no}: bad trace record: {exc}") from exc
    return traces
