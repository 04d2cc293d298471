"""Chat-completion backends: a JSON-over-HTTP client and a scripted mock.

The HTTP client speaks the de-facto chat protocol of local inference servers
(POST {model, messages, temperature, max_tokens}, read the first choice's
message content). Requests are retried with exponential backoff and bounded by
a per-backend semaphore. Every call is recorded as a CompletionExchange so a
run can be audited and replayed.

The mock backend is fully deterministic and offline: an ordered script of
(matcher, completion) entries, first match wins.
"""
from __future__ import annotations

import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import requests

from .exceptions import BackendError, ConfigurationError, MockError, TransportError

BASE_URL_ENV = "FACTLOOP_BASE_URL"
TOKEN_ENV = "FACTLOOP_API_TOKEN"

DEFAULT_COMPLETIONS_PATH = "/v1/chat/completions"


@dataclass
class BackendConfig:
    """Connection and decoding settings for one inference backend."""

    base_url: str = ""
    model_name: str = ""
    temperature: float = 0.0
    max_tokens: int = 512
    max_parallel: int = 4
    retry_limit: int = 3
    timeout: float = 60.0
    completions_path: str = DEFAULT_COMPLETIONS_PATH
    bearer_token: Optional[str] = None
    retry_base_delay: float = 0.5

    def __post_init__(self):
        if self.max_parallel < 1:
            raise ConfigurationError("max_parallel must be >= 1")
        if self.retry_limit < 0:
            raise ConfigurationError("retry_limit must be >= 0")
        if self.temperature < 0:
            raise ConfigurationError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ConfigurationError("max_tokens must be >= 1")

    def resolved_base_url(self) -> str:
        return os.environ.get(BASE_URL_ENV) or self.base_url

    def resolved_token(self) -> Optional[str]:
        return os.environ.get(TOKEN_ENV) or self.bearer_token


@dataclass
class CompletionExchange:
    """Audit record of one prompt/completion round trip."""

    prompt: str
    completion: str
    latency: float
    attempt_count: int
    backend: str
    tags: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        record = {
            "backend": self.backend,
            "prompt": self.prompt,
            "completion": self.completion,
            "latency_ms": round(self.latency * 1000.0, 3),
            "attempt_count": self.attempt_count,
        }
        record.update(self.tags)
        return record


ExchangeSink = Callable[[CompletionExchange], None]


class Backend:
    """Common bookkeeping: exchange log plus an optional sink."""

    name: str = "backend"

    def __init__(self):
        self._sink: Optional[ExchangeSink] = None
        self._log_lock = threading.Lock()
        self.exchanges: list[CompletionExchange] = []

    def set_exchange_sink(self, sink: Optional[ExchangeSink]) -> None:
        self._sink = sink

    def _record(self, exchange: CompletionExchange) -> None:
        with self._log_lock:
            self.exchanges.append(exchange)
            if self._sink is not None:
                self._sink(exchange)

    def complete(self, prompt: str, tags: Optional[dict] = None) -> str:
        raise NotImplementedError


class HttpBackend(Backend):
    """Bounded-concurrency chat-completion client with retries."""

    def __init__(self, config: BackendConfig, session: Optional[requests.Session] = None):
        super().__init__()
        if not config.resolved_base_url():
            raise ConfigurationError("backend base_url missing (config or FACTLOOP_BASE_URL)")
        self.config = config
        self.name = config.model_name or config.resolved_base_url()
        self._session = session or requests.Session()
        self._semaphore = threading.BoundedSemaphore(config.max_parallel)

    def _send(self, prompt: str) -> str:
        url = self.config.resolved_base_url().rstrip("/") + self.config.completions_path
        headers = {"Content-Type": "application/json"}
        token = self.config.resolved_token()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        response = self._session.post(
            url, json=payload, headers=headers, timeout=self.config.timeout
        )
        if response.status_code != 200:
            raise BackendError(
                f"{self.name}: HTTP {response.status_code}: {response.text[:200]}",
                status=response.status_code,
                body=response.text[:500],
            )
        body = response.json()
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"{self.name}: malformed completion payload: {exc}") from exc

    def complete(self, prompt: str, tags: Optional[dict] = None) -> str:
        start = time.monotonic()
        attempts = 0
        last_error: Exception | None = None
        with self._semaphore:
            while attempts <= self.config.retry_limit:
                attempts += 1
                try:
                    text = self._send(prompt)
                    self._record(
                        CompletionExchange(
                            prompt=prompt,
                            completion=text,
                            latency=time.monotonic() - start,
                            attempt_count=attempts,
                            backend=self.name,
                            tags=dict(tags or {}),
                        )
                    )
                    return text
                except (requests.RequestException, BackendError) as exc:
                    last_error = exc
                    if attempts <= self.config.retry_limit:
                        time.sleep(self.config.retry_base_delay * 2 ** (attempts - 1))
        if isinstance(last_error, BackendError):
            raise last_error
        raise TransportError(
            f"{self.name}: request failed after {attempts} attempt(s): {last_error}"
        ) from last_error


Matcher = Union[str, tuple[str, str]]


def _compile_matcher(matcher: Matcher) -> Callable[[str], bool]:
    if isinstance(matcher, str):
        return lambda prompt, needle=matcher: prompt == needle
    kind, pattern = matcher
    if kind == "exact":
        return lambda prompt: prompt == pattern
    if kind == "prefix":
        return lambda prompt: prompt.startswith(pattern)
    if kind == "contains":
        return lambda prompt: pattern in prompt
    if kind == "regex":
        compiled = re.compile(pattern, re.DOTALL)
        return lambda prompt: compiled.search(prompt) is not None
    raise ConfigurationError(f"unknown matcher kind {kind!r}")


class MockBackend(Backend):
    """Deterministic scripted backend; first matching entry wins."""

    def __init__(self, script: Sequence[tuple[Matcher, str]], name: str = "mock"):
        super().__init__()
        self.name = name
        self._entries = [(_compile_matcher(m), m, completion) for m, completion in script]

    def complete(self, prompt: str, tags: Optional[dict] = None) -> str:
        start = time.monotonic()
        for predicate, _matcher, completion in self._entries:
            if predicate(prompt):
                self._record(
                    CompletionExchange(
                        prompt=prompt,
                        completion=completion,
                        latency=time.monotonic() - start,
                        attempt_count=1,
                        backend=self.name,
                        tags=dict(tags or {}),
                    )
                )
                return completion
        raise MockError(f"{self.name}: no scripted completion for prompt {prompt[:60]!r}...")


def register_mock(script: Union[dict, Iterable[tuple[Matcher, str]]], name: str = "mock") -> MockBackend:
    """Build a mock backend from a dict (exact matches) or ordered entries."""
    if isinstance(script, dict):
        entries = [(("exact", prompt), completion) for prompt, completion in script.items()]
    else:
        entries = list(script)
    return MockBackend(entries, name=name)


def complete(backend: Union[Backend, BackendConfig], prompt: str, tags: Optional[dict] = None) -> str:
    """Run one completion against a backend (configs get a throwaway client)."""
    if isinstance(backend, BackendConfig):
        backend = HttpBackend(backend)
    return backend.complete(prompt, tags=tags)
