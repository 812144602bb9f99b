import json
import threading
import time

import pytest

from cotmol.annotate import annotate_trace, llm_classifier
from cotmol.errors import BadConfig, ClientExhausted, ClientRejected, ReplayMiss
from cotmol.llm import (
    CallbackTransport,
    ChatExchange,
    ClientConfig,
    LLMClient,
    ReplayClient,
    ScriptedTransport,
    prompt_key,
    replay_client,
)
from cotmol.trace import Trace


def _client(transport, **cfg):
    sleeps = []
    c = LLMClient(ClientConfig(**cfg), transport=transport, sleep=sleeps.append, seed=0, api_key="k")
    return c, sleeps


def test_passthrough():
    c, _ = _client(ScriptedTransport(["hello"]))
    ex = c.complete("hi")
    assert isinstance(ex, ChatExchange) and ex.response == "hello"
    assert c("hi") == "hello"


def test_retry_then_ok():
    t = ScriptedTransport([503, 429, "ok"])
    c, sleeps = _client(t, max_retries=3)
    assert c.complete("x").response == "ok"
    assert len(t.calls) == 3 and len(sleeps) == 2
    assert sleeps[1] > 0 and sleeps[0] <= 0.5


def test_exhaustion():
    t = ScriptedTransport([500])
    c, _ = _client(t, max_retries=2)
    with pytest.raises(ClientExhausted) as exc:
        c.complete("x")
    assert exc.value.attempts == 3 and len(t.calls) == 3


def test_rejected_not_retried():
    t = ScriptedTransport([400, "ok"])
    c, _ = _client(t, max_retries=3)
    with pytest.raises(ClientRejected):
        c.complete("x")
    assert len(t.calls) == 1


def test_payload_shape_and_defaults():
    t = ScriptedTransport(["ok"])
    c, _ = _client(t)
    c.complete("user text", system="sys")
    payload = t.calls[0]
    assert payload["messages"] == [{"role": "system", "content": "sys"}, {"role": "user", "content": "user text"}]
    assert payload["temperature"] == 0.6 and payload["top_p"] == 0.95 and payload["max_tokens"] == 16384


def test_config_validation(monkeypatch):
    with pytest.raises(BadConfig):
        ClientConfig(temperature=2.5)
    with pytest.raises(BadConfig):
        ClientConfig.from_mapping({"nope": 1})
    monkeypatch.setenv("COTMOL_BASE_URL", "http://example.invalid/v1")
    assert ClientConfig.from_mapping({}).base_url == "http://example.invalid/v1"


def test_in_flight_budget():
    t = CallbackTransport(lambda s, u: u.upper(), delay=0.02)
    c, _ = _client(t, max_in_flight=2)
    threads = [threading.Thread(target=c.complete, args=(f"p{i}",)) for i in range(10)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len(t.calls) == 10 and 1 <= t.peak <= 2


def test_audit_and_replay(tmp_path):
    log = tmp_path / "audit.jsonl"
    t = CallbackTransport(lambda s, u: "### Behavior: Deep Reasoning" if "b" in u.split("CURRENT")[-1] else "### Behavior: Exploration")
    live = LLMClient(ClientConfig(), transport=t, audit_log=log, seed=0)
    trace = Trace.from_texts("t", "q", ["a", "b", "c"])
    first = annotate_trace(trace, llm_classifier(live))
    lines = log.read_text().splitlines()
    assert len(lines) == 2
    rec = json.loads(lines[0])
    assert rec["key"] == prompt_key(None, rec["user"])
    again = annotate_trace(trace, llm_classifier(replay_client(log)))
    assert again == first
    with pytest.raises(ReplayMiss):
        replay_client(log)("novel prompt")


def test_empty_log_always_misses(tmp_path):
    log = tmp_path / "empty.jsonl"
    log.write_text("")
    rc = ReplayClient.from_log(log)
    assert len(rc) == 0
    with pytest.raises(ReplayMiss):
        rc("anything")


def test_missing_log(tmp_path):
    with pytest.raises(BadConfig):
        replay_client(tmp_path / "none.jsonl")


def test_prompt_key_distinguishes_system():
    assert prompt_key(None, "x") != prompt_key("", "x")
    assert prompt_key("a", "bc") != prompt_key("ab", "c")
