"""Chat-completion providers behind one blocking ``send`` call with retry and bounded batching.

Credentials are read from the environment variable named in the config; they
never appear in config files. The ``mock`` provider replays scripted responses
keyed by prompt fingerprint and needs no network.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence, Union

import httpx

from .prompts import PromptArtifact, prompt_fingerprint

log = logging.getLogger(__name__)


class ProviderConfigError(ValueError):
    """Missing credential, malformed endpoint, or unknown provider."""


class ProviderTimeout(Exception):
    pass


class ProviderHTTPError(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(f"HTTP {code}: {message}" if message else f"HTTP {code}")
        self.code = code


@dataclass(frozen=True)
class ProviderConfig:
    provider_name: str
    model_id: str = ""
    endpoint_url: str = ""
    credential_env_var: str = ""
    max_retries: int = 3
    request_timeout: float = 60.0
    max_parallel: int = 1
    temperature: float | None = None
    backoff_base: float = 1.0
    max_tokens: int = 8192
    fixture_path: str = ""

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ProviderConfigError("max_retries must be >= 0")
        if self.max_parallel < 1:
            raise ProviderConfigError("max_parallel must be >= 1")
        if self.request_timeout <= 0:
            raise ProviderConfigError("request_timeout must be positive")


class OutcomeKind(str, Enum):
    OK = "Ok"
    TIMEOUT = "Timeout"
    HTTP_ERROR = "HttpError"
    RATE_LIMITED = "RateLimited"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    text: str | None = None
    code: int | None = None

    @property
    def ok(self) -> bool:
        return self.kind is OutcomeKind.OK


@dataclass(frozen=True)
class QueryRecord:
    prompt_fingerprint: str
    attempt_count: int
    latency: float = field(compare=False)
    outcome: Outcome


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


def _post_json(url: str, headers: dict, body: dict, timeout: float, params: dict | None = None) -> dict:
    try:
        resp = httpx.post(url, headers=headers, json=body, params=params, timeout=timeout)
    except httpx.TimeoutException as exc:
        raise ProviderTimeout(str(exc)) from exc
    except httpx.TransportError as exc:
        # connection resets and the like are worth retrying, same as a 503
        raise ProviderHTTPError(503, str(exc)) from exc
    if resp.status_code >= 400:
        raise ProviderHTTPError(resp.status_code, resp.text[:200])
    return resp.json()


class HTTPProvider:
    default_endpoint = ""

    def __init__(self, cfg: ProviderConfig):
        self.cfg = cfg
        self.endpoint = cfg.endpoint_url or self.default_endpoint
        url = httpx.URL(self.endpoint) if self.endpoint else None
        if url is None or url.scheme not in ("http", "https") or not url.host:
            raise ProviderConfigError(f"malformed endpoint: {self.endpoint!r}")
        if not cfg.credential_env_var:
            raise ProviderConfigError(f"provider {cfg.provider_name} needs credential_env_var")
        key = os.environ.get(cfg.credential_env_var)
        if not key:
            raise ProviderConfigError(f"missing credential: environment variable {cfg.credential_env_var} is not set")
        self.key = key

    def complete(self, text: str, attempt: int) -> str:
        raise NotImplementedError


class OpenAIChatProvider(HTTPProvider):
    default_endpoint = "https://api.openai.com/v1/chat/completions"

    def complete(self, text: str, attempt: int) -> str:
        body: dict = {"model": self.cfg.model_id, "messages": [{"role": "user", "content": text}]}
        if self.cfg.temperature is not None:
            body["temperature"] = self.cfg.temperature
        data = _post_json(self.endpoint, {"Authorization": f"Bearer {self.key}"}, body, self.cfg.request_timeout)
        return data["choices"][0]["message"]["content"]


class AnthropicProvider(HTTPProvider):
    default_endpoint = "https://api.anthropic.com/v1/messages"

    def complete(self, text: str, attempt: int) -> str:
        body: dict = {
            "model": self.cfg.model_id,
            "max_tokens": self.cfg.max_tokens,
            "messages": [{"role": "user", "content": text}],
        }
        if self.cfg.temperature is not None:
            body["temperature"] = self.cfg.temperature
        headers = {"x-api-key": self.key, "anthropic-version": "2023-06-01"}
        data = _post_json(self.endpoint, headers, body, self.cfg.request_timeout)
        return "".join(block.get("text", "") for block in data["content"] if block.get("type") == "text")


class GeminiProvider(HTTPProvider):
    default_endpoint = "https://generativelanguage.googleapis.com/v1beta"

    def complete(self, text: str, attempt: int) -> str:
        body: dict = {"contents": [{"role": "user", "parts": [{"text": text}]}]}
        if self.cfg.temperature is not None:
            body["generationConfig"] = {"temperature": self.cfg.temperature}
        url = f"{self.endpoint.rstrip('/')}/models/{self.cfg.model_id}:generateContent"
        data = _post_json(url, {"x-goog-api-key": self.key}, body, self.cfg.request_timeout)
        return "".join(part.get("text", "") for part in data["candidates"][0]["content"]["parts"])


Script = Union[str, Sequence[Union[str, Mapping]]]


class MockProvider:
    """Replays scripted responses keyed by prompt fingerprint.

    A script is either a response string or a list of per-attempt steps; a step
    is a response string, ``{"text": ...}``, ``{"error": 429}`` (any status
    code) or ``{"error": "timeout"}``. The last step repeats once the list is
    exhausted. Scripts index by attempt within one ``send`` call, so batches
    replay identically under any scheduling.
    """

    def __init__(
        self,
        scripts: Mapping[str, Script] | None = None,
        responder: Callable[[str], str] | None = None,
        delay: float = 0.0,
    ):
        self.scripts = dict(scripts or {})
        self.responder = responder
        self.delay = delay
        self._lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0
        self.calls = 0

    @classmethod
    def from_file(cls, path) -> MockProvider:
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def complete(self, text: str, attempt: int) -> str:
        with self._lock:
            self.in_flight += 1
            self.calls += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            if self.delay:
                time.sleep(self.delay)
            return self._step(text, attempt)
        finally:
            with self._lock:
                self.in_flight -= 1

    def _step(self, text: str, attempt: int) -> str:
        script = self.scripts.get(prompt_fingerprint(text))
        if script is None:
            if self.responder is not None:
                return self.responder(text)
            raise ProviderHTTPError(404, "no scripted response for prompt")
        if isinstance(script, str):
            return script
        step = script[min(attempt, len(script)) - 1]
        if isinstance(step, str):
            return step
        if "error" in step:
            if step["error"] == "timeout":
                raise ProviderTimeout("scripted timeout")
            raise ProviderHTTPError(int(step["error"]), "scripted error")
        return step["text"]


_PROVIDERS = {
    "openai": OpenAIChatProvider,
    "anthropic": AnthropicProvider,
    "gemini": GeminiProvider,
}


def make_provider(cfg: ProviderConfig):
    if cfg.provider_name == "mock":
        if not cfg.fixture_path:
            return MockProvider()
        return MockProvider.from_file(cfg.fixture_path)
    try:
        return _PROVIDERS[cfg.provider_name](cfg)
    except KeyError:
        raise ProviderConfigError(f"unknown provider {cfg.provider_name!r}") from None


# ---------------------------------------------------------------------------
# send / send_batch
# ---------------------------------------------------------------------------


def _prompt_text(prompt: PromptArtifact | str) -> str:
    return prompt.text if isinstance(prompt, PromptArtifact) else prompt


def send(
    prompt: PromptArtifact | str,
    cfg: ProviderConfig,
    provider=None,
    sleep: Callable[[float], None] = time.sleep,
) -> QueryRecord:
    """Send one prompt, retrying timeouts, 429 and 5xx with exponential backoff."""
    provider = provider if provider is not None else make_provider(cfg)
    text = _prompt_text(prompt)
    fingerprint = prompt_fingerprint(text)
    start = time.perf_counter()
    outcome = Outcome(OutcomeKind.HTTP_ERROR)
    attempt = 0
    for attempt in range(1, cfg.max_retries + 2):
        try:
            outcome = Outcome(OutcomeKind.OK, text=provider.complete(text, attempt))
            break
        except ProviderTimeout:
            outcome = Outcome(OutcomeKind.TIMEOUT)
        except ProviderHTTPError as exc:
            if exc.code == 429:
                outcome = Outcome(OutcomeKind.RATE_LIMITED, code=429)
            else:
                outcome = Outcome(OutcomeKind.HTTP_ERROR, code=exc.code)
                if exc.code < 500:
                    break
        if attempt <= cfg.max_retries:
            wait = cfg.backoff_base * 2 ** (attempt - 1)
            log.debug("attempt %d for %s failed (%s); retrying in %.2fs", attempt, fingerprint[:12], outcome.kind.value, wait)
            if wait > 0:
                sleep(wait)
    return QueryRecord(fingerprint, attempt, time.perf_counter() - start, outcome)


def send_batch(
    prompts: Sequence[PromptArtifact | str],
    cfg: ProviderConfig,
    provider=None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[QueryRecord]:
    """Send every prompt with at most ``cfg.max_parallel`` in flight; results keep input order."""
    if not prompts:
        raise ValueError("send_batch needs at least one prompt")
    provider = provider if provider is not None else make_provider(cfg)

    def one(prompt) -> QueryRecord:
        try:
            return send(prompt, cfg, provider, sleep)
        except Exception as exc:  # a single bad item must not abort the batch
            log.warning("query failed unexpectedly: %s", exc)
            return QueryRecord(prompt_fingerprint(_prompt_text(prompt)), 1, 0.0, Outcome(OutcomeKind.HTTP_ERROR))

    with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
        return list(pool.map(one, prompts))
