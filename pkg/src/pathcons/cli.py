"""Command-line interface: run, compare, analyze, report.

Exit codes: 0 success, 1 usage error, 2 input parse error, 3 backend failure.
Config comes from an INI file with [run], [sampling], and [backend] sections;
flags override the file, and PATHCONS_ENDPOINT / PATHCONS_AUTH_TOKEN override
the remote backend settings from the environment.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import analysis, metrics, traceio
from .backends import (
    BackendError,
    BackendUnavailableError,
    CompletionBackend,
    RemoteBackend,
    ScriptedBackend,
    SyntheticModelParams,
    load_fixture_records,
)
from .core import AnswerKind, Question, RunConfig, SamplingParams, Strategy, make_stem
from .fixtures import synthetic_backend_for_questions
from .orchestrator import run_strategy

ENV_ENDPOINT = "PATHCONS_ENDPOINT"
ENV_AUTH_TOKEN = "PATHCONS_AUTH_TOKEN"


class UsageError(Exception):
    pass


class InputParseError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse hook
        raise UsageError(message)


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    question: str
    gold_answer: Optional[str]
    answer_kind: AnswerKind

    def to_question(self) -> Question:
        return Question(
            id=self.id,
            prompt_body=make_stem(self.question),
            gold_answer=self.gold_answer,
            answer_kind=self.answer_kind,
        )


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    records = []
    seen = set()
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputParseError(f"cannot read dataset {path}: {exc}") from exc
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            record = DatasetRecord(
                id=str(raw["id"]),
                question=raw["question"],
                gold_answer=raw.get("answer"),
                answer_kind=AnswerKind(raw.get("type", "numeric")),
            )
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise InputParseError(f"{path}:{line_no}: bad dataset record: {exc}") from exc
        if record.id in seen:
            raise InputParseError(f"{path}:{line_no}: duplicate question id {record.id!r}")
        seen.add(record.id)
        records.append(record)
    if not records:
        raise InputParseError(f"{path}: dataset is empty")
    return records


def write_dataset(records: Sequence[DatasetRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {
                        "id": record.id,
                        "question": record.question,
                        "answer": record.gold_answer,
                        "type": record.answer_kind.value,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def derive_question_seed(seed: int, question_id: str) -> int:
    """Stable per-question seed so worker scheduling cannot change results."""
    digest = hashlib.sha256(f"{seed}:{question_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


_CONFIG_DEFAULTS = {
    "run": {
        "strategy": "",
        "branches": "20",
        "max_level": "3",
        "threshold": "0.8",
        "window": "",
        "seed": "0",
        "workers": "",
    },
    "sampling": {
        "temperature": "0.6",
        "top_p": "0.9",
        "max_tokens": "256",
        "stop": "Q:",
    },
    "backend": {
        "kind": "synthetic",
        "p0": "0.7",
        "delta_p": "0.15",
        "sentences_per_path": "5",
        "tokens_per_sentence": "10",
        "endpoint": "",
        "auth_token": "",
        "fixture": "",
    },
}


def _load_config(path: Optional[str]) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.read_dict(_CONFIG_DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as handle:
                parser.read_file(handle)
        except OSError as exc:
            raise InputParseError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise InputParseError(f"bad config {path}: {exc}") from exc
    return parser


def _build_run_config(cfg: configparser.ConfigParser, args: argparse.Namespace) -> RunConfig:
    def pick(flag_value, section: str, key: str, cast):
        if flag_value is not None:
            return flag_value
        raw = cfg.get(section, key)
        return cast(raw) if raw != "" else None

    try:
        branches = pick(args.branches, "run", "branches", int)
        max_level = pick(args.max_level, "run", "max_level", int)
        threshold = pick(args.threshold, "run", "threshold", float)
        window = pick(args.window, "run", "window", int)
        seed = pick(args.seed, "run", "seed", int)
        stop_raw = cfg.get("sampling", "stop")
        sampling = SamplingParams(
            temperature=cfg.getfloat("sampling", "temperature"),
            top_p=cfg.getfloat("sampling", "top_p"),
            max_generated_tokens=cfg.getint("sampling", "max_tokens"),
            stop_sequences=tuple(s for s in stop_raw.split("|") if s),
        )
        if window is None:
            window = max(1, branches // (max_level + 1))
        return RunConfig(
            max_branch=branches,
            max_prefix_level=max_level,
            confidence_threshold=threshold,
            window_size=window,
            sampling=sampling,
            seed=seed,
        )
    except ValueError as exc:
        raise InputParseError(f"bad run configuration: {exc}") from exc


def _build_backend(
    cfg: configparser.ConfigParser, args: argparse.Namespace, questions: list[Question]
) -> CompletionBackend:
    kind = args.backend or cfg.get("backend", "kind")
    if kind == "scripted":
        fixture = args.fixture or cfg.get("backend", "fixture")
        if not fixture:
            raise UsageError("scripted backend needs --fixture")
        try:
            return ScriptedBackend(load_fixture_records(fixture))
        except (OSError, ValueError) as exc:
            raise InputParseError(f"cannot load fixture {fixture}: {exc}") from exc
    if kind == "synthetic":
        try:
            params = SyntheticModelParams(
                p0=args.p0 if args.p0 is not None else cfg.getfloat("backend", "p0"),
                delta_p=args.delta_p if args.delta_p is not None else cfg.getfloat("backend", "delta_p"),
                sentences_per_path=cfg.getint("backend", "sentences_per_path"),
                tokens_per_sentence=cfg.getint("backend", "tokens_per_sentence"),
            )
            seed = args.seed if args.seed is not None else cfg.getint("run", "seed")
            return synthetic_backend_for_questions(questions, params, seed=seed)
        except ValueError as exc:
            raise InputParseError(f"bad synthetic backend settings: {exc}") from exc
    if kind == "remote":
        endpoint = args.endpoint or os.environ.get(ENV_ENDPOINT) or cfg.get("backend", "endpoint")
        if not endpoint:
            raise UsageError("remote backend needs --endpoint or " + ENV_ENDPOINT)
        auth = os.environ.get(ENV_AUTH_TOKEN) or cfg.get("backend", "auth_token") or None
        return RemoteBackend(endpoint=endpoint, auth_token=auth)
    raise UsageError(f"unknown backend kind {kind!r}")


def _run_questions(
    questions: list[Question],
    strategy: Strategy,
    config: RunConfig,
    backend: CompletionBackend,
    exemplars: str,
    workers: int,
):
    def run_one(question: Question):
        rng = random.Random(derive_question_seed(config.seed, question.id))
        trace = run_strategy(strategy, question, config, backend, rng, exemplars=exemplars)
        if isinstance(backend, RemoteBackend) and all(
            p.generated_text == "" and p.answer is None for p in trace.branches
        ):
            raise BackendUnavailableError(
                f"remote backend produced no completions for question {question.id}"
            )
        return trace

    if isinstance(backend, ScriptedBackend):
        workers = 1  # fixture order = submission order
    if workers <= 1:
        return [run_one(q) for q in questions]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_one, questions))


def _summary(traces, records, strategy: Strategy, config: RunConfig) -> dict:
    gold = {r.id: r.gold_answer for r in records if r.gold_answer is not None}
    accuracy = None
    if gold:
        scored = [t for t in traces if t.question_id in gold]
        accuracy = (
            sum(1 for t in scored if t.final_answer == gold[t.question_id]) / len(scored)
            if scored
            else None
        )
    return {
        "strategy": strategy.value,
        "questions": len(traces),
        "accuracy": accuracy,
        "total_generated_tokens": sum(t.total_generated_tokens for t in traces),
        "mean_branches": sum(len(t.branches) for t in traces) / len(traces),
        "branches": config.max_branch,
        "threshold": config.confidence_threshold,
        "seed": config.seed,
    }


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    strategy_name = args.strategy or cfg.get("run", "strategy")
    if not strategy_name:
        raise UsageError("--strategy is required (or set [run] strategy in the config)")
    try:
        strategy = Strategy(strategy_name)
    except ValueError:
        raise UsageError(f"unknown strategy {strategy_name!r}") from None
    records = load_dataset(args.dataset)
    questions = [r.to_question() for r in records]
    exemplars = ""
    if args.prompt:
        try:
            exemplars = Path(args.prompt).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputParseError(f"cannot read prompt file {args.prompt}: {exc}") from exc
    config = _build_run_config(cfg, args)
    backend = _build_backend(cfg, args, questions)
    if args.workers is not None:
        workers = args.workers
    else:
        configured = cfg.get("run", "workers")
        workers = int(configured) if configured else (os.cpu_count() or 1)

    traces = _run_questions(questions, strategy, config, backend, exemplars, workers)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / f"traces_{strategy.value}.jsonl"
    traceio.write_traces(traces, trace_path)
    summary = _summary(traces, records, strategy, config)
    summary_path = out_dir / f"summary_{strategy.value}.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {trace_path}")
    for key in ("strategy", "questions", "accuracy", "total_generated_tokens", "mean_branches"):
        print(f"{key}: {summary[key]}")
    return 0


def _read_traces_checked(path: str):
    try:
        return traceio.read_traces(path)
    except (OSError, ValueError) as exc:
        raise InputParseError(f"cannot read traces {path}: {exc}") from exc


def cmd_compare(args: argparse.Namespace) -> int:
    baseline = _read_traces_checked(args.baseline)
    candidate = _read_traces_checked(args.candidate)
    records = load_dataset(args.dataset)
    gold = {r.id: r.gold_answer for r in records if r.gold_answer is not None}
    try:
        comparison = metrics.compare(baseline, candidate, gold)
        levels = metrics.per_level_breakdown(candidate, baseline)
    except metrics.QuestionSetMismatchError as exc:
        raise InputParseError(str(exc)) from exc

    speedup = (
        f"{comparison.latency_speedup_percent:+.1f}%"
        if comparison.latency_speedup_percent is not None
        else "n/a"
    )
    print(f"questions: {len(baseline)}")
    print(f"accuracy delta: {comparison.accuracy_delta:+.4f}")
    print(f"token decrease: {comparison.token_decrease_percent:.1f}%")
    print(f"latency speedup: {speedup}")
    for level, stats in levels.items():
        level_speedup = (
            f"{stats.latency_speedup_percent:+.1f}%"
            if stats.latency_speedup_percent is not None
            else "n/a"
        )
        print(
            f"level {level}: decrease {stats.token_decrease_percent:.1f}%, "
            f"speedup {level_speedup}, branches {stats.branch_count}"
        )
    if args.out:
        report = {
            "questions": len(baseline),
            "accuracy_delta": comparison.accuracy_delta,
            "token_decrease_percent": comparison.token_decrease_percent,
            "latency_speedup_percent": comparison.latency_speedup_percent,
            "per_level": {
                str(level): {
                    "branch_count": stats.branch_count,
                    "token_decrease_percent": stats.token_decrease_percent,
                    "latency_speedup_percent": stats.latency_speedup_percent,
                }
                for level, stats in levels.items()
            },
        }
        Path(args.out).write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote {args.out}")
    return 0


def _parse_grid_floats(spec: str) -> list[float]:
    values = []
    for piece in spec.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if ":" in piece:
            start_s, stop_s, step_s = piece.split(":")
            start, stop, step = float(start_s), float(stop_s), float(step_s)
            if step <= 0:
                raise ValueError(f"step must be positive in {piece!r}")
            count = int(round((stop - start) / step))
            values.extend(round(start + i * step, 10) for i in range(count + 1))
        else:
            values.append(float(piece))
    if not values:
        raise ValueError(f"empty grid spec {spec!r}")
    return values


def _parse_grid_ints(spec: str) -> list[int]:
    values = [int(piece) for piece in spec.split(",") if piece.strip()]
    if not values:
        raise ValueError(f"empty grid spec {spec!r}")
    return values


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        p0_values = _parse_grid_floats(args.p0)
        delta_values = _parse_grid_floats(args.delta_p)
        n_values = _parse_grid_ints(args.branches)
        rows = analysis.sweep_grid(p0_values, delta_values, n_values)
    except ValueError as exc:
        raise InputParseError(str(exc)) from exc

    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            analysis.write_sweep_table(rows, handle, delimiter=args.delimiter)
        print(f"wrote {args.out} ({len(rows)} rows)")
    else:
        analysis.write_sweep_table(rows, sys.stdout, delimiter=args.delimiter)

    if args.monte_carlo:
        rng = random.Random(args.seed if args.seed is not None else 0)
        for row in rows:
            estimate = analysis.monte_carlo(row.params, args.monte_carlo, rng)
            gap = abs(estimate.estimate - row.result.p_correct_prime)
            print(
                f"mc p0={row.params.p0} delta_p={row.params.delta_p} N={row.params.n_branches}: "
                f"estimate={estimate.estimate:.5f} exact={row.result.p_correct_prime:.5f} "
                f"|gap|={gap:.5f} stderr={estimate.stderr:.5f}"
            )
    flagged = [row for row in rows if row.flagged]
    if flagged:
        print(f"{len(flagged)} grid points violate the safety tolerance:")
        for row in flagged:
            print(
                f"  p0={row.params.p0} delta_p={row.params.delta_p} "
                f"N={row.params.n_branches} margin={row.margin:.6f}"
            )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    traces = _read_traces_checked(args.traces)
    records = load_dataset(args.dataset)
    gold = {r.id: r.gold_answer for r in records if r.gold_answer is not None}
    stats = metrics.token_proportions(traces, gold)
    at_branch = min(args.at_branch, min(len(t.branches) for t in traces))
    histogram = metrics.confidence_histogram(traces, at_branch, args.bins)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "confidence_histogram.csv", "w", encoding="utf-8") as handle:
        metrics.write_histogram(histogram, handle)
    accuracy = (
        sum(1 for t in traces if gold.get(t.question_id) == t.final_answer) / len(traces)
        if traces
        else None
    )
    report = {
        "questions": len(traces),
        "accuracy": accuracy,
        "total_generated_tokens": sum(t.total_generated_tokens for t in traces),
        "tokens_on_correct_paths": stats.tokens_on_correct_paths,
        "tokens_on_incorrect_paths": stats.tokens_on_incorrect_paths,
        "tokens_on_answerless_paths": stats.tokens_on_answerless_paths,
        "fraction_incorrect": stats.fraction_incorrect,
        "skipped_traces": stats.skipped_traces,
        "histogram_at_branch": at_branch,
    }
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    columns = sorted(report)
    with open(out_dir / "summary.csv", "w", encoding="utf-8") as handle:
        handle.write(",".join(columns) + "\n")
        handle.write(",".join(str(report[c]) for c in columns) + "\n")
    print(f"wrote {out_dir / 'report.json'}")
    print(f"fraction_incorrect: {stats.fraction_incorrect:.4f}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="pathcons", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a decoding strategy over a dataset")
    run.add_argument("--config", default=None)
    run.add_argument("--dataset", required=True)
    run.add_argument("--prompt", default=None, help="few-shot exemplar block, prepended verbatim")
    run.add_argument("--strategy", choices=[s.value for s in Strategy], default=None)
    run.add_argument("--backend", choices=["scripted", "synthetic", "remote"], default=None)
    run.add_argument("--fixture", default=None, help="scripted backend record file")
    run.add_argument("--endpoint", default=None)
    run.add_argument("--threshold", type=float, default=None)
    run.add_argument("--branches", type=int, default=None)
    run.add_argument("--max-level", dest="max_level", type=int, default=None)
    run.add_argument("--window", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--p0", type=float, default=None)
    run.add_argument("--delta-p", dest="delta_p", type=float, default=None)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--out", required=True)
    run.set_defaults(handler=cmd_run)

    compare = sub.add_parser("compare", help="compare candidate traces against a baseline")
    compare.add_argument("--baseline", required=True)
    compare.add_argument("--candidate", required=True)
    compare.add_argument("--dataset", required=True)
    compare.add_argument("--out", default=None)
    compare.set_defaults(handler=cmd_compare)

    analyze = sub.add_parser("analyze", help="exact sweep of the prefix-selection model")
    analyze.add_argument("--p0", default="0.55:0.95:0.05")
    analyze.add_argument("--delta-p", dest="delta_p", default="0.02,0.05")
    analyze.add_argument("--branches", default="8,16,40")
    analyze.add_argument("--monte-carlo", dest="monte_carlo", type=int, default=0)
    analyze.add_argument("--seed", type=int, default=None)
    analyze.add_argument("--delimiter", default=",")
    analyze.add_argument("--out", default=None)
    analyze.set_defaults(handler=cmd_analyze)

    report = sub.add_parser("report", help="token attribution and confidence histogram")
    report.add_argument("--traces", required=True)
    report.add_argument("--dataset", required=True)
    report.add_argument("--at-branch", dest="at_branch", type=int, default=10)
    report.add_argument("--bins", type=int, default=10)
    report.add_argument("--out", required=True)
    report.set_defaults(handler=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except InputParseError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
