import json
import math
import random
import socket
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from pathcons.backends import (
    BackendUnavailableError,
    CompletionRequest,
    FixtureError,
    MalformedResponseError,
    RemoteBackend,
    ScriptedBackend,
    ScriptedRecord,
    SyntheticBackend,
    SyntheticModelParams,
    dump_fixture_records,
    hash_prompt,
    load_fixture_records,
    synthetic_case_text,
    synthetic_step_sentence,
)
from pathcons.core import make_stem

REQ = CompletionRequest(prompt="Q: x\nA:")


def _three_sigma(p, draws):
    return 3 * math.sqrt(p * (1 - p) / draws)


# ---------------------------------------------------------------- scripted


def test_scripted_replays_in_order():
    backend = ScriptedBackend.from_texts(["first reply", "second reply"])
    assert backend.complete(REQ).text == "first reply"
    assert backend.complete(REQ).text == "second reply"
    with pytest.raises(FixtureError):
        backend.complete(REQ)


def test_scripted_token_counts_from_texts():
    backend = ScriptedBackend.from_texts(["one two three"])
    assert backend.complete(REQ).generated_token_count == 3


def test_scripted_prompt_hash_checked():
    record = ScriptedRecord(text="r", token_count=1, prompt_hash=hash_prompt("expected prompt"))
    backend = ScriptedBackend([record])
    with pytest.raises(FixtureError):
        backend.complete(CompletionRequest(prompt="something else"))
    backend = ScriptedBackend([record])
    assert backend.complete(CompletionRequest(prompt="expected prompt")).text == "r"


def test_fixture_file_roundtrip(tmp_path):
    records = [
        ScriptedRecord(text="alpha", token_count=1, prompt_hash=hash_prompt("p")),
        ScriptedRecord(text="beta gamma", token_count=2),
    ]
    path = tmp_path / "records.jsonl"
    dump_fixture_records(records, path)
    assert load_fixture_records(path) == records


def test_fixture_file_bad_record_names_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"text": "ok", "token_count": 1}\n{"text": "no count"}\n')
    with pytest.raises(ValueError, match="bad.jsonl:2"):
        load_fixture_records(path)


# ---------------------------------------------------------------- synthetic


def _synthetic(p0, delta_p, **kwargs):
    params = SyntheticModelParams(p0=p0, delta_p=delta_p, **kwargs)
    return params, SyntheticBackend(params, {"q1": ("7", "8")}, seed=0)


def _stem():
    return make_stem(synthetic_case_text("q1"))


def _prompt_with_guide(answer, steps=2):
    prefix = "".join(synthetic_step_sentence(i, answer) for i in range(1, steps + 1))
    return _stem() + prefix


def _correct_rate(backend, prompt, draws=10_000, seed=5):
    rng = random.Random(seed)
    hits = 0
    for _ in range(draws):
        completion = backend.complete(CompletionRequest(prompt=prompt), rng=rng)
        hits += completion.text.endswith("The answer is 7.")
    return hits / draws


def test_synthetic_unguided_rate_matches_p0():
    _, backend = _synthetic(0.7, 0.15)
    rate = _correct_rate(backend, _stem())
    assert abs(rate - 0.7) <= _three_sigma(0.7, 10_000)


def test_synthetic_guided_rates_shift():
    _, backend = _synthetic(0.7, 0.15)
    up = _correct_rate(backend, _prompt_with_guide("7"))
    down = _correct_rate(backend, _prompt_with_guide("8"))
    assert abs(up - 0.85) <= _three_sigma(0.85, 10_000)
    assert abs(down - 0.55) <= _three_sigma(0.55, 10_000)
    assert down < 0.7 < up


def test_synthetic_zero_delta_ignores_prefix():
    _, backend = _synthetic(0.6, 0.0)
    guided = _correct_rate(backend, _prompt_with_guide("8"))
    assert abs(guided - 0.6) <= _three_sigma(0.6, 10_000)


def test_synthetic_token_arithmetic():
    params, backend = _synthetic(0.7, 0.0, sentences_per_path=6, tokens_per_sentence=12)
    rng = random.Random(0)
    unprefixed = backend.complete(CompletionRequest(prompt=_stem()), rng=rng)
    assert unprefixed.generated_token_count == 6 * 12
    for consumed in (1, 2, 3):
        completion = backend.complete(
            CompletionRequest(prompt=_prompt_with_guide("7", steps=consumed)), rng=rng
        )
        assert completion.generated_token_count == (6 - consumed) * 12


def test_synthetic_generation_ends_with_answer_clause():
    _, backend = _synthetic(0.7, 0.15)
    text = backend.complete(CompletionRequest(prompt=_stem()), rng=random.Random(1)).text
    assert text.endswith("The answer is 7.") or text.endswith("The answer is 8.")


def test_synthetic_degenerate_certainty():
    params = SyntheticModelParams(p0=1.0, delta_p=0.0)
    backend = SyntheticBackend(params, {"q1": ("7", "8")}, seed=0)
    rng = random.Random(2)
    for _ in range(50):
        text = backend.complete(CompletionRequest(prompt=_stem()), rng=rng).text
        assert text.endswith("The answer is 7.")


def test_synthetic_reproducible_with_seed():
    _, backend_a = _synthetic(0.7, 0.15)
    _, backend_b = _synthetic(0.7, 0.15)
    rng_a, rng_b = random.Random(42), random.Random(42)
    request = CompletionRequest(prompt=_prompt_with_guide("7"))
    texts_a = [backend_a.complete(request, rng=rng_a).text for _ in range(10)]
    texts_b = [backend_b.complete(request, rng=rng_b).text for _ in range(10)]
    assert texts_a == texts_b


def test_synthetic_unknown_case_rejected():
    _, backend = _synthetic(0.7, 0.15)
    with pytest.raises(FixtureError):
        backend.complete(CompletionRequest(prompt=make_stem(synthetic_case_text("zzz"))))


def test_synthetic_params_validation():
    with pytest.raises(ValueError):
        SyntheticModelParams(p0=0.0)
    with pytest.raises(ValueError):
        SyntheticModelParams(p0=0.9, delta_p=0.2)
    with pytest.raises(ValueError):
        SyntheticModelParams(p0=0.5, delta_p=-0.1)


# ---------------------------------------------------------------- remote


class _Handler(BaseHTTPRequestHandler):
    behaviors = []
    requests_seen = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        _Handler.requests_seen.append(json.loads(self.rfile.read(length)))
        behavior = _Handler.behaviors.pop(0) if _Handler.behaviors else "ok"
        if behavior == "ok":
            body = json.dumps({"text": "The answer is 9.", "completion_token_count": 5}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        elif behavior == "500":
            self.send_response(500)
            self.end_headers()
        elif behavior == "badjson":
            body = b"not json"
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _Handler.behaviors = []
    _Handler.requests_seen = []
    yield f"http://127.0.0.1:{server.server_address[1]}/v1/complete"
    server.shutdown()


def test_remote_roundtrip(stub_server):
    backend = RemoteBackend(endpoint=stub_server, auth_token="tok", backoff=0.001)
    completion = backend.complete(
        CompletionRequest(prompt="Q: nine?\nA:", temperature=0.6, top_p=0.9,
                          max_generated_tokens=64, stop_sequences=("Q:",))
    )
    assert completion.text == "The answer is 9."
    assert completion.generated_token_count == 5
    assert completion.latency > 0
    sent = _Handler.requests_seen[0]
    assert sent == {
        "prompt": "Q: nine?\nA:",
        "temperature": 0.6,
        "top_p": 0.9,
        "max_tokens": 64,
        "stop": ["Q:"],
    }


def test_remote_retries_then_succeeds(stub_server):
    _Handler.behaviors = ["500", "500"]
    backend = RemoteBackend(endpoint=stub_server, max_retries=2, backoff=0.001)
    assert backend.complete(REQ).text == "The answer is 9."
    assert len(_Handler.requests_seen) == 3


def test_remote_gives_up_after_bounded_retries(stub_server):
    _Handler.behaviors = ["500"] * 5
    backend = RemoteBackend(endpoint=stub_server, max_retries=2, backoff=0.001)
    with pytest.raises(BackendUnavailableError):
        backend.complete(REQ)
    assert len(_Handler.requests_seen) == 3


def test_remote_malformed_response(stub_server):
    _Handler.behaviors = ["badjson"] * 3
    backend = RemoteBackend(endpoint=stub_server, max_retries=2, backoff=0.001)
    with pytest.raises(MalformedResponseError):
        backend.complete(REQ)


def test_remote_connection_refused():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    backend = RemoteBackend(endpoint=f"http://127.0.0.1:{port}/", max_retries=0, backoff=0.001)
    with pytest.raises(BackendUnavailableError):
        backend.complete(REQ)
