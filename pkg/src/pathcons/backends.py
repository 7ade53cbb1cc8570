"""Pluggable text-completion providers.

Three backends share one contract: scripted (fixture replay, bit-exact),
synthetic (a two-answer stochastic task model whose statistics are known in
closed form), and remote (a minimal HTTP completion endpoint).  Scripted and
synthetic backends never retry, keeping traces deterministic; the remote
backend retries transient failures with exponential backoff before giving up.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
import time
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float = 0.6
    top_p: float = 0.9
    max_generated_tokens: int = 256
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")


@dataclass(frozen=True)
class Completion:
    text: str
    generated_token_count: int
    latency: float = 0.0


class BackendError(Exception):
    """Base class for completion failures the orchestrator records as a
    failed branch."""


class BackendUnavailableError(BackendError):
    pass


class BackendTimeoutError(BackendError):
    pass


class MalformedResponseError(BackendError):
    pass


class FixtureError(BackendError):
    """Scripted fixture exhausted or fed a prompt it was not recorded for."""


class CompletionBackend(ABC):
    """Contract implemented by all backends.

    ``rng`` threads the caller's seeded generator through stochastic
    backends so a run is reproducible from its seed alone; deterministic
    backends ignore it.
    """

    @abstractmethod
    def complete(self, request: CompletionRequest, rng: Optional[random.Random] = None) -> Completion:
        raise NotImplementedError


def hash_prompt(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ScriptedRecord:
    """One expected call: the reply text, its token count, and optionally the
    hash of the prompt that should have triggered it."""

    text: str
    token_count: int
    prompt_hash: Optional[str] = None


class ScriptedBackend(CompletionBackend):
    """Replays fixture records in call order.

    Serializes internally, so fixture order equals branch submission order;
    concurrent callers must submit in index order and may only overlap waits.
    """

    def __init__(self, records: Sequence[ScriptedRecord]):
        self._records = list(records)
        self._cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_texts(cls, texts: Sequence[str]) -> "ScriptedBackend":
        return cls([ScriptedRecord(text=t, token_count=len(t.split())) for t in texts])

    @property
    def remaining(self) -> int:
        return len(self._records) - self._cursor

    def complete(self, request: CompletionRequest, rng: Optional[random.Random] = None) -> Completion:
        with self._lock:
            if self._cursor >= len(self._records):
                raise FixtureError(f"fixture exhausted after {self._cursor} calls")
            record = self._records[self._cursor]
            self._cursor += 1
        if record.prompt_hash is not None:
            actual = hash_prompt(request.prompt)
            if actual != record.prompt_hash:
                raise FixtureError(
                    f"call {self._cursor}: prompt hash {actual[:12]}... does not match "
                    f"recorded {record.prompt_hash[:12]}..."
                )
        return Completion(text=record.text, generated_token_count=record.token_count, latency=0.0)


def load_fixture_records(path: str | Path) -> list[ScriptedRecord]:
    records = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            records.append(
                ScriptedRecord(
                    text=raw["text"],
                    token_count=int(raw["token_count"]),
                    prompt_hash=raw.get("prompt_hash"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{line_no}: bad fixture record: {exc}") from exc
    return records


def dump_fixture_records(records: Sequence[ScriptedRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            payload = {"text": record.text, "token_count": record.token_count}
            if record.prompt_hash is not None:
                payload["prompt_hash"] = record.prompt_hash
            handle.write(json.dumps(payload, sort_keys=True) + "\n")


@dataclass(frozen=True)
class SyntheticModelParams:
    """Two-answer task model: a path is correct with probability p0 when
    unguided, p0 + delta_p after a prefix from a correct path, and
    p0 - delta_p after a prefix from an incorrect one."""

    p0: float
    delta_p: float = 0.0
    sentences_per_path: int = 5
    tokens_per_sentence: int = 10

    def __post_init__(self) -> None:
        # p0 = 1 is allowed as the degenerate always-correct model; delta_p
        # is then forced to 0 by the range check below.
        if not 0 < self.p0 <= 1:
            raise ValueError("p0 must be in (0, 1]")
        if self.delta_p < 0 or self.p0 + self.delta_p > 1 or self.p0 - self.delta_p < 0:
            raise ValueError("delta_p must keep p0 +/- delta_p inside [0, 1]")
        if self.sentences_per_path <= 0 or self.tokens_per_sentence <= 0:
            raise ValueError("sentence and token counts must be positive")


_CASE_TAG = re.compile(r"\[case ([^\]]+)\]")
_STEP_SENTENCE = re.compile(r"Step (\d+) points to ([^.\n]+)\.")
_STEM_SPLIT = "\nA:"
# Deterministic pseudo-latency so traces are byte-reproducible.
_SECONDS_PER_TOKEN = 0.001


def synthetic_case_text(case_id: str) -> str:
    """Question body understood by SyntheticBackend; the bracket tag names
    the case."""
    return f"[case {case_id}] What is the hidden value?"


def synthetic_step_sentence(step: int, answer: str) -> str:
    return f"Step {step} points to {answer}. "


class SyntheticBackend(CompletionBackend):
    """Generates templated reasoning paths with known answer statistics.

    Each case has exactly two possible answers.  Every reasoning step names
    the answer its path is heading toward, so a prefix carried into a later
    prompt tells the backend which kind of path it came from; the conditional
    correct rate shifts by +/- delta_p accordingly.  Token counts are
    (generated sentences) x tokens_per_sentence, which makes expected savings
    computable by hand.
    """

    def __init__(
        self,
        params: SyntheticModelParams,
        answers_by_case: dict[str, tuple[str, str]],
        seed: int = 0,
    ):
        self.params = params
        self._answers = dict(answers_by_case)
        self._fallback_rng = random.Random(seed)
        self._lock = threading.Lock()

    def synthetic_generate(self, prompt: str, rng: random.Random) -> Completion:
        tags = _CASE_TAG.findall(prompt)
        if not tags:
            raise FixtureError("prompt carries no [case ...] tag")
        case_id = tags[-1]
        if case_id not in self._answers:
            raise FixtureError(f"unknown synthetic case {case_id!r}")
        correct, incorrect = self._answers[case_id]

        stem_end = prompt.rfind(_STEM_SPLIT)
        prefix_part = prompt[stem_end + len(_STEM_SPLIT):] if stem_end >= 0 else ""
        steps_seen = _STEP_SENTENCE.findall(prefix_part)
        consumed = len(steps_seen)

        p = self.params.p0
        if steps_seen:
            guide = steps_seen[-1][1]
            p = p + self.params.delta_p if guide == correct else p - self.params.delta_p

        answer = correct if rng.random() < p else incorrect

        total_steps = self.params.sentences_per_path - 1
        pieces = [
            synthetic_step_sentence(step, answer)
            for step in range(consumed + 1, total_steps + 1)
        ]
        pieces.append(f"The answer is {answer}.")
        token_count = len(pieces) * self.params.tokens_per_sentence
        return Completion(
            text="".join(pieces),
            generated_token_count=token_count,
            latency=token_count * _SECONDS_PER_TOKEN,
        )

    def complete(self, request: CompletionRequest, rng: Optional[random.Random] = None) -> Completion:
        if rng is not None:
            return self.synthetic_generate(request.prompt, rng)
        with self._lock:
            return self.synthetic_generate(request.prompt, self._fallback_rng)


class RemoteBackend(CompletionBackend):
    """Minimal HTTP completion client.

    Request body: {prompt, temperature, top_p, max_tokens, stop}; response
    body: {text, completion_token_count}.  Transient failures are retried
    max_retries times with exponential backoff, then surface to the caller.
    """

    def __init__(
        self,
        endpoint: str,
        auth_token: Optional[str] = None,
        timeout: float = 30.0,
        max_retries: int = 2,
        backoff: float = 0.25,
    ):
        self.endpoint = endpoint
        self.auth_token = auth_token
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff

    def _call_once(self, request: CompletionRequest) -> Completion:
        body = json.dumps(
            {
                "prompt": request.prompt,
                "temperature": request.temperature,
                "top_p": request.top_p,
                "max_tokens": request.max_generated_tokens,
                "stop": list(request.stop_sequences),
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        http_request = urllib.request.Request(self.endpoint, data=body, headers=headers)
        started = time.perf_counter()
        try:
            with urllib.request.urlopen(http_request, timeout=self.timeout) as response:
                payload = response.read()
        except urllib.error.HTTPError as exc:
            if exc.code >= 500:
                raise BackendUnavailableError(f"server error {exc.code}") from exc
            raise MalformedResponseError(f"rejected request: {exc.code}") from exc
        except TimeoutError as exc:
            raise BackendTimeoutError(str(exc)) from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise BackendTimeoutError(str(exc.reason)) from exc
            raise BackendUnavailableError(str(exc.reason)) from exc
        latency = time.perf_counter() - started
        try:
            parsed = json.loads(payload)
            return Completion(
                text=parsed["text"],
                generated_token_count=int(parsed["completion_token_count"]),
                latency=latency,
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedResponseError(f"bad response body: {exc}") from exc

    def complete(self, request: CompletionRequest, rng: Optional[random.Random] = None) -> Completion:
        attempt = 0
        while True:
            try:
                return self._call_once(request)
            except (BackendUnavailableError, BackendTimeoutError, MalformedResponseError):
                if attempt >= self.max_retries:
                    raise
                time.sleep(self.backoff * (2**attempt))
                attempt += 1
