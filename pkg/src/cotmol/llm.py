"""Chat-completion client with retries, an in-flight budget, audit logging and offline replay.

Every remote call made by the package goes through :class:`LLMClient`. The
transport is pluggable: :class:`HttpTransport` speaks the common
chat-completions JSON shape, :class:`ScriptedTransport` and
:class:`CallbackTransport` are deterministic stand-ins for tests and
offline runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .errors import BadConfig, ClientExhausted, ClientRejected, ReplayMiss

logger = logging.getLogger(__name__)

ENV_API_KEY = "COTMOL_API_KEY"
ENV_BASE_URL = "COTMOL_BASE_URL"
DEFAULT_BASE_URL = "http://localhost:8000/v1"


@dataclass(frozen=True)
class ClientConfig:
    base_url: str = DEFAULT_BASE_URL
    model: str = "default"
    temperature: float = 0.6
    top_p: float = 0.95
    max_tokens: int = 16384
    timeout: float = 120.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_base: float = 0.5
    backoff_max: float = 30.0
    system: str | None = None     # default system message for __call__

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise BadConfig("temperature must lie in [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise BadConfig("top_p must lie in (0, 1]")
        if self.max_tokens < 1 or self.max_in_flight < 1:
            raise BadConfig("max_tokens and max_in_flight must be positive")
        if self.max_retries < 0 or self.timeout <= 0:
            raise BadConfig("max_retries must be >= 0 and timeout > 0")

    @classmethod
    def from_mapping(cls, data: Mapping | None = None, use_env: bool = True) -> "ClientConfig":
        """Build from a config-file section; unknown keys are rejected."""
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise BadConfig(f"unknown client config keys: {sorted(unknown)}")
        if use_env and "base_url" not in data and os.environ.get(ENV_BASE_URL):
            data["base_url"] = os.environ[ENV_BASE_URL]
        return cls(**data)


@dataclass(frozen=True)
class ChatExchange:
    system: str | None
    user: str
    response: str
    usage: dict = field(default_factory=dict)
    latency: float = 0.0

    @property
    def key(self) -> str:
        return prompt_key(self.system, self.user)

    def to_json(self) -> dict:
        return {"key": self.key, **asdict(self)}


def prompt_key(system: str | None, user: str) -> str:
    """SHA-256 over the (system, user) pair, unambiguous for any strings."""
    blob = json.dumps([system, user], ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TransportResponse:
    status: int                 # HTTP status; 0 for a connection-level failure
    body: dict | str


class Transport(Protocol):
    def __call__(self, url: str, payload: dict, headers: dict, timeout: float) -> TransportResponse: ...


class HttpTransport:
    """POST to ``{base_url}/chat/completions`` using requests."""

    def __init__(self) -> None:
        import requests

        self._requests = requests
        self._session = requests.Session()

    def __call__(self, url, payload, headers, timeout):
        try:
            r = self._session.post(url, json=payload, headers=headers, timeout=timeout)
        except self._requests.RequestException as exc:
            return TransportResponse(0, str(exc))
        try:
            body = r.json()
        except ValueError:
            body = r.text
        return TransportResponse(r.status_code, body)


def _ok(content: str, usage: dict | None = None) -> TransportResponse:
    return TransportResponse(200, {
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": usage or {},
    })


class _Instrumented:
    """Counts concurrent calls so tests can observe the in-flight budget."""

    def __init__(self, delay: float = 0.0):
        self.delay = delay
        self.calls: list[dict] = []
        self.in_flight = 0
        self.peak = 0
        self._lock = threading.Lock()

    def _enter(self, payload: dict) -> None:
        with self._lock:
            self.calls.append(payload)
            self.in_flight += 1
            self.peak = max(self.peak, self.in_flight)

    def _exit(self) -> None:
        with self._lock:
            self.in_flight -= 1


class ScriptedTransport(_Instrumented):
    """Replays a fixed script; strings succeed, integers are HTTP error statuses.

    Once the script runs out the last entry repeats.
    """

    def __init__(self, script: Sequence[str | int], delay: float = 0.0):
        super().__init__(delay)
        if not script:
            raise BadConfig("script must not be empty")
        self.script = list(script)
        self._pos = 0

    def __call__(self, url, payload, headers, timeout):
        self._enter(payload)
        try:
            with self._lock:
                item = self.script[min(self._pos, len(self.script) - 1)]
                self._pos += 1
            if self.delay:
                time.sleep(self.delay)
            if isinstance(item, int):
                return TransportResponse(item, {"error": f"scripted status {item}"})
            return _ok(item)
        finally:
            self._exit()


class CallbackTransport(_Instrumented):
    """Answers with ``fn(system, user)``; handy for deterministic offline pipelines."""

    def __init__(self, fn: Callable[[str | None, str], str], delay: float = 0.0):
        super().__init__(delay)
        self.fn = fn

    def __call__(self, url, payload, headers, timeout):
        self._enter(payload)
        try:
            msgs = payload["messages"]
            system = next((m["content"] for m in msgs if m["role"] == "system"), None)
            user = msgs[-1]["content"]
            if self.delay:
                time.sleep(self.delay)
            return _ok(self.fn(system, user))
        finally:
            self._exit()


def _retryable(status: int) -> bool:
    return status == 0 or status == 429 or status >= 500


class LLMClient:
    """Thread-safe chat-completion client.

    ``sleep`` and ``seed`` are injectable so retry schedules are testable
    without waiting.
    """

    def __init__(
        self,
        config: ClientConfig | None = None,
        transport: Transport | None = None,
        audit_log: str | os.PathLike | None = None,
        api_key: str | None = None,
        sleep: Callable[[float], None] = time.sleep,
        seed: int | None = None,
    ):
        self.config = config or ClientConfig.from_mapping()
        self.transport = transport if transport is not None else HttpTransport()
        self.audit_log = os.fspath(audit_log) if audit_log is not None else None
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY)
        self._sleep = sleep
        self._rng = random.Random(seed)
        self._budget = threading.BoundedSemaphore(self.config.max_in_flight)
        self._log_lock = threading.Lock()

    def _payload(self, user: str, system: str | None) -> dict:
        messages = []
        if system is not None:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": user})
        c = self.config
        return {
            "model": c.model,
            "messages": messages,
            "temperature": c.temperature,
            "top_p": c.top_p,
            "max_tokens": c.max_tokens,
        }

    def _backoff(self, attempt: int) -> float:
        c = self.config
        return min(c.backoff_max, c.backoff_base * 2 ** attempt) * self._rng.uniform(0.5, 1.0)

    def complete(self, user: str, system: str | None = None) -> ChatExchange:
        c = self.config
        url = c.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = self._payload(user, system)
        last: Exception | None = None
        attempts = c.max_retries + 1
        for attempt in range(attempts):
            t0 = time.monotonic()
            with self._budget:
                resp = self.transport(url, payload, headers, c.timeout)
            latency = time.monotonic() - t0
            if resp.status == 200:
                try:
                    content = resp.body["choices"][0]["message"]["content"]
                except (KeyError, IndexError, TypeError):
                    raise ClientRejected(200, f"unexpected response shape: {str(resp.body)[:200]}") from None
                usage = resp.body.get("usage") or {}
                exchange = ChatExchange(system, user, content, dict(usage), latency)
                self._record(exchange)
                return exchange
            body = resp.body if isinstance(resp.body, str) else json.dumps(resp.body)
            if not _retryable(resp.status):
                raise ClientRejected(resp.status, body)
            last = ClientRejected(resp.status, body)
            if attempt + 1 < attempts:
                delay = self._backoff(attempt)
                logger.info("retrying after HTTP %s in %.2fs", resp.status, delay)
                self._sleep(delay)
        raise ClientExhausted(attempts, last)

    def __call__(self, prompt: str) -> str:
        return self.complete(prompt, self.config.system).response

    def _record(self, exchange: ChatExchange) -> None:
        if self.audit_log is None:
            return
        line = json.dumps(exchange.to_json(), ensure_ascii=False)
        with self._log_lock, open(self.audit_log, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


class ReplayClient:
    """Serves responses from an audit log by exact (system, user) match."""

    def __init__(self, records: Iterable[dict] = (), system: str | None = None):
        self.system = system
        self._table: dict[str, str] = {}
        for rec in records:
            key = rec.get("key") or prompt_key(rec.get("system"), rec["user"])
            self._table[key] = rec["response"]

    @classmethod
    def from_log(cls, path: str | os.PathLike, system: str | None = None) -> "ReplayClient":
        if not os.path.exists(path):
            raise BadConfig(f"replay log {os.fspath(path)!r} does not exist")
        records = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise BadConfig(f"replay log line {lineno}: {exc.msg}") from None
        return cls(records, system)

    def __len__(self) -> int:
        return len(self._table)

    def complete(self, user: str, system: str | None = None) -> ChatExchange:
        key = prompt_key(system, user)
        try:
            return ChatExchange(system, user, self._table[key])
        except KeyError:
            raise ReplayMiss(key) from None

    def __call__(self, prompt: str) -> str:
        return self.complete(prompt, self.system).response


def replay_client(path: str | os.PathLike) -> ReplayClient:
    return ReplayClient.from_log(path)
