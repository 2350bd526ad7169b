"""Pluggable text-generation clients.

The mock client is a pure function of the request and is what every test and
offline run uses; the HTTP client speaks the de-facto chat-completion wire
shape and retries only transient failures. API keys come from an environment
variable, never from config files.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

import requests

from .prompt import DEFAULT_CHARS_PER_TOKEN, estimate_tokens

__all__ = [
    "GenerationRequest",
    "GenerationResult",
    "GenerationError",
    "TransientGenerationError",
    "TerminalGenerationError",
    "RetryPolicy",
    "with_retry",
    "MockClient",
    "HttpClient",
    "generate",
]


class GenerationError(RuntimeError):
    """Base class for generation failures."""


class TransientGenerationError(GenerationError):
    """Timeout, connection loss, 429, or 5xx; safe to retry."""


class TerminalGenerationError(GenerationError):
    """Non-retryable failure (4xx other than 429); body is surfaced."""


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_output_tokens: int = 256
    temperature: float = 0.0
    model: str = "default"

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be nonempty")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    usage: dict
    latency: float
    client: str


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.backoff_base < 0:
            raise ValueError("backoff_base must be >= 0")


def with_retry(op: Callable, policy: RetryPolicy):
    """Run ``op`` with exponential backoff on transient failures only.

    Terminal errors re-raise immediately; the final transient error re-raises
    after ``max_attempts`` total attempts.
    """
    last: Optional[Exception] = None
    for attempt in range(policy.max_attempts):
        try:
            return op()
        except TransientGenerationError as exc:
            last = exc
            if attempt + 1 < policy.max_attempts and policy.backoff_base > 0:
                time.sleep(policy.backoff_base * (2**attempt))
    assert last is not None
    raise last


class MockClient:
    """Deterministic offline client.

    Returns "MOCK:" followed by the longest prompt prefix whose estimated
    token count fits ``max_output_tokens``. No clock, no randomness.
    """

    name = "mock"

    def __init__(self, chars_per_token: int = DEFAULT_CHARS_PER_TOKEN):
        self.chars_per_token = chars_per_token

    def generate(self, req: GenerationRequest) -> GenerationResult:
        allowed = req.max_output_tokens * self.chars_per_token
        body = req.prompt.encode("utf-8")[:allowed].decode("utf-8", errors="ignore")
        text = "MOCK:" + body
        return GenerationResult(
            text=text,
            usage={
                "prompt_tokens": estimate_tokens(req.prompt, self.chars_per_token),
                "output_tokens": estimate_tokens(text, self.chars_per_token),
            },
            latency=0.0,
            client=self.name,
        )


class HttpClient:
    """Chat-completion HTTP client.

    POSTs ``{model, messages, temperature, max_tokens}`` and reads
    ``choices[0].message.content``; retries 429/5xx/timeouts per the policy.
    In-flight concurrency is bounded by ``max_concurrency``.
    """

    name = "http"

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        retry: RetryPolicy = RetryPolicy(),
        api_key_env: Optional[str] = None,
        max_concurrency: int = 4,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retry = retry
        self.api_key_env = api_key_env
        self._slots = threading.Semaphore(max_concurrency)
        self._session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise TerminalGenerationError(
                    f"environment variable {self.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post_once(self, payload: dict) -> dict:
        try:
            resp = self._session.post(
                self.endpoint,
                json=payload,
                headers=self._headers(),
                timeout=self.timeout,
            )
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise TransientGenerationError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientGenerationError(
                f"HTTP {resp.status_code}: {resp.text[:500]}"
            )
        if resp.status_code >= 400:
            raise TerminalGenerationError(f"HTTP {resp.status_code}: {resp.text[:500]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise TerminalGenerationError(f"invalid JSON response: {exc}") from exc

    def generate(self, req: GenerationRequest) -> GenerationResult:
        payload = {
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        start = time.monotonic()
        with self._slots:
            data = with_retry(lambda: self._post_once(payload), self.retry)
        latency = time.monotonic() - start
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TerminalGenerationError(
                f"response missing choices[0].message.content: {data!r:.500}"
            ) from exc
        usage = data.get("usage") or {}
        return GenerationResult(
            text=text,
            usage={
                "prompt_tokens": int(usage.get("prompt_tokens", estimate_tokens(req.prompt))),
                "output_tokens": int(usage.get("completion_tokens", estimate_tokens(text))),
            },
            latency=latency,
            client=self.name,
        )


def generate(client, req: GenerationRequest) -> GenerationResult:
    """Run one generation call against any configured client."""
    return client.generate(req)
