"""Chat-completion client with live, replay, and scripted backends.

The wire protocol is POST {base_url}/v1/chat/completions with a bearer token;
the response text is choices[0].message.content. Replay fixtures are files
named <fingerprint>.json holding the full wire response, which makes every
pipeline run reproducible offline.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol

from caseforge.clock import SystemTimer, Timer
from caseforge.errors import BackendNotConfiguredError, MissingFixtureError
from caseforge.prompting import Message, MessageList, validate_message_list

DEFAULT_BASE_URL = "https://api.openai.com"
ENV_API_KEY = "LLM_API_KEY"
ENV_BASE_URL = "LLM_BASE_URL"
ENV_MODEL = "LLM_MODEL"

STATUS_OK = "ok"
STATUS_HTTP_ERROR = "http_error"
STATUS_TIMEOUT = "timeout"

# Sidecar envelope key for replay fixtures that carry a recorded latency.
_FIXTURE_LATENCY_KEY = "caseforge_latency_ms"


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: MessageList
    temperature: float
    max_tokens: int

    def wire_body(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "messages": [m.to_dict() for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    def to_dict(self) -> dict[str, Any]:
        return self.wire_body()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ChatRequest":
        return cls(
            model=data["model"],
            messages=tuple(Message(m["role"], m["content"]) for m in data["messages"]),
            temperature=float(data["temperature"]),
            max_tokens=int(data["max_tokens"]),
        )


@dataclass(frozen=True)
class ChatExchange:
    """One request/response against the backend plus its latency sample."""

    request: ChatRequest
    raw_text: str
    latency_ms: int
    backend: str
    status: str
    http_code: int | None = None
    id: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "request": self.request.to_dict(),
            "raw_text": self.raw_text,
            "latency_ms": self.latency_ms,
            "backend": self.backend,
            "status": self.status,
            "http_code": self.http_code,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ChatExchange":
        return cls(
            request=ChatRequest.from_dict(data["request"]),
            raw_text=data["raw_text"],
            latency_ms=int(data["latency_ms"]),
            backend=data["backend"],
            status=data["status"],
            http_code=data.get("http_code"),
            id=data.get("id", ""),
        )


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_backoff_ms: int = 500
    retryable_statuses: frozenset[int] = frozenset({429, 500, 502, 503, 504})
    request_timeout_ms: int = 60_000

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


class BackendTimeout(Exception):
    """An attempt exceeded the request timeout."""


class ChatBackend(Protocol):
    kind: str

    def send(self, request: ChatRequest, timeout_ms: int, timer: Timer) -> tuple[int, str]:
        """One attempt; returns (http_status, body_text) or raises BackendTimeout."""


def request_fingerprint(request: ChatRequest) -> str:
    """SHA-256 hex digest of the request's canonical serialization.

    Canonical form: UTF-8 bytes of the JSON object
    {"max_tokens", "messages", "model", "temperature"} with keys sorted at
    every level, separators "," and ":", and no trailing newline. Stable
    across runs and platforms; used to key replay fixtures.
    """
    canonical = json.dumps(
        request.wire_body(), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def content_from_wire(body: str) -> str | None:
    """choices[0].message.content from a wire response body, or None."""
    try:
        payload = json.loads(body)
        content = payload["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError):
        return None
    return content if isinstance(content, str) else None


def make_wire_response(content: str) -> dict[str, Any]:
    """Minimal OpenAI-shaped wire response around the given message content."""
    return {
        "object": "chat.completion",
        "choices": [
            {
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop",
            }
        ],
    }


class LiveBackend:
    """Talks to a real OpenAI-compatible endpoint using `requests`."""

    kind = "live"

    def __init__(self, base_url: str, api_key: str, session: Any = None) -> None:
        import requests

        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self._session = session or requests.Session()
        self._requests = requests

    def send(self, request: ChatRequest, timeout_ms: int, timer: Timer) -> tuple[int, str]:
        try:
            response = self._session.post(
                f"{self.base_url}/v1/chat/completions",
                json=request.wire_body(),
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=timeout_ms / 1000.0,
            )
        except self._requests.Timeout as exc:
            raise BackendTimeout(str(exc)) from exc
        except self._requests.RequestException:
            # Transport failure without an HTTP status; retried like a 502.
            return 502, ""
        return response.status_code, response.text


class ReplayBackend:
    """Serves stored wire responses keyed by request fingerprint.

    Strict mode raises when a fixture is missing; non-strict mode falls
    through to a fallback backend and records the fixture it saw.
    """

    kind = "replay"

    def __init__(
        self,
        directory: str | Path,
        strict: bool = True,
        fallback: ChatBackend | None = None,
    ) -> None:
        self.directory = Path(directory)
        self.strict = strict
        self.fallback = fallback

    def fixture_path(self, request: ChatRequest) -> Path:
        return self.directory / f"{request_fingerprint(request)}.json"

    def send(self, request: ChatRequest, timeout_ms: int, timer: Timer) -> tuple[int, str]:
        path = self.fixture_path(request)
        if path.exists():
            raw = path.read_text(encoding="utf-8")
            body, latency_ms = _split_fixture(raw)
            if latency_ms:
                timer.sleep(latency_ms / 1000.0)
            return 200, body
        if self.strict or self.fallback is None:
            raise MissingFixtureError(request_fingerprint(request), str(self.directory))
        status, body = self.fallback.send(request, timeout_ms, timer)
        if status == 200:
            self.directory.mkdir(parents=True, exist_ok=True)
            path.write_text(body, encoding="utf-8")
        return status, body


def _split_fixture(raw: str) -> tuple[str, int]:
    """Fixture body plus its recorded latency (0 when the fixture is bare)."""
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError:
        return raw, 0
    if isinstance(payload, dict) and set(payload) == {_FIXTURE_LATENCY_KEY, "response"}:
        return json.dumps(payload["response"]), int(payload[_FIXTURE_LATENCY_KEY])
    return raw, 0


def write_fixture(
    directory: str | Path,
    request: ChatRequest,
    wire_response: Mapping[str, Any],
    latency_ms: int | None = None,
) -> Path:
    """Store a wire response (optionally with a recorded latency) as a fixture."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{request_fingerprint(request)}.json"
    if latency_ms is None:
        payload: Any = wire_response
    else:
        payload = {_FIXTURE_LATENCY_KEY: latency_ms, "response": wire_response}
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


@dataclass
class ScriptedResponse:
    status: int = 200
    body: str = ""
    delay_ms: int = 0
    hang: bool = False

    @classmethod
    def content(cls, text: str, status: int = 200, delay_ms: int = 0) -> "ScriptedResponse":
        return cls(status=status, body=json.dumps(make_wire_response(text)), delay_ms=delay_ms)


class ScriptedBackend:
    """Plays back a fixed response script; the deterministic fake for tests."""

    kind = "scripted"

    def __init__(self, script: list[ScriptedResponse]) -> None:
        self.script = list(script)
        self.attempts = 0

    def send(self, request: ChatRequest, timeout_ms: int, timer: Timer) -> tuple[int, str]:
        if not self.script:
            raise AssertionError("scripted backend exhausted")
        self.attempts += 1
        item = self.script.pop(0)
        if item.hang:
            timer.sleep(timeout_ms / 1000.0)
            raise BackendTimeout(f"no response within {timeout_ms} ms")
        if item.delay_ms:
            timer.sleep(item.delay_ms / 1000.0)
        return item.status, item.body


class LlmClient:
    """Retry-aware completion client; thread-safe with bounded in-flight requests."""

    def __init__(
        self,
        backend: ChatBackend,
        policy: RetryPolicy | None = None,
        timer: Timer | None = None,
        max_in_flight: int = 4,
    ) -> None:
        self.backend = backend
        self.policy = policy or RetryPolicy()
        self.timer = timer or SystemTimer()
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def complete(self, request: ChatRequest, policy: RetryPolicy | None = None) -> ChatExchange:
        """Send with retry on retryable statuses; never raises for HTTP outcomes.

        Failed attempts with a retryable status are retried with exponential
        backoff (base * 2^k) up to max_attempts. Latency covers the full
        attempt sequence including backoff sleeps. Timeouts are not retried:
        the attempt already consumed the full request timeout.
        """
        validate_message_list(request.messages)
        policy = policy or self.policy
        with self._slots:
            started = self.timer.monotonic()
            status_code: int | None = None
            body = ""
            timed_out = False
            for attempt in range(policy.max_attempts):
                try:
                    status_code, body = self.backend.send(
                        request, policy.request_timeout_ms, self.timer
                    )
                except BackendTimeout:
                    timed_out = True
                    break
                if status_code == 200:
                    break
                if (
                    status_code in policy.retryable_statuses
                    and attempt + 1 < policy.max_attempts
                ):
                    self.timer.sleep(policy.base_backoff_ms * (2**attempt) / 1000.0)
                    continue
                break
            latency_ms = int(round((self.timer.monotonic() - started) * 1000))

        if timed_out:
            return ChatExchange(
                request=request,
                raw_text="",
                latency_ms=latency_ms,
                backend=self.backend.kind,
                status=STATUS_TIMEOUT,
            )
        if status_code == 200:
            content = content_from_wire(body)
            if content is None:
                return ChatExchange(
                    request=request,
                    raw_text="",
                    latency_ms=latency_ms,
                    backend=self.backend.kind,
                    status=STATUS_HTTP_ERROR,
                    http_code=200,
                )
            return ChatExchange(
                request=request,
                raw_text=content,
                latency_ms=latency_ms,
                backend=self.backend.kind,
                status=STATUS_OK,
                http_code=200,
            )
        return ChatExchange(
            request=request,
            raw_text="",
            latency_ms=latency_ms,
            backend=self.backend.kind,
            status=STATUS_HTTP_ERROR,
            http_code=status_code,
        )


def backend_from_env(
    environ: Mapping[str, str], mock_dir: str | Path | None = None
) -> ChatBackend:
    """Pick the backend: --mock selects strict replay, else live via LLM_* vars."""
    if mock_dir is not None:
        return ReplayBackend(mock_dir, strict=True)
    api_key = environ.get(ENV_API_KEY, "")
    if not api_key:
        raise BackendNotConfiguredError(
            "backend not configured: set LLM_API_KEY or pass a replay fixtures directory"
        )
    base_url = environ.get(ENV_BASE_URL) or DEFAULT_BASE_URL
    return LiveBackend(base_url, api_key)


def model_from_env(environ: Mapping[str, str]) -> str:
    return environ.get(ENV_MODEL) or "gpt-3.5-turbo"
