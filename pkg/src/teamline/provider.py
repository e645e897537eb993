"""Chat-completion providers: a deterministic scripted one and an HTTP-backed one."""

import os
import threading
import time
from dataclasses import dataclass, field

import requests


class ProviderError(Exception):
    pass


class ProviderUnavailable(ProviderError):
    pass


class ScriptExhausted(ProviderError):
    pass


class MalformedResponse(ProviderError):
    pass


@dataclass
class ChatMessage:
    speaker_label: str
    content: str


@dataclass
class ChatParams:
    temperature: float = 0.2
    max_tokens: int = 1024
    model_name: str = ""


@dataclass
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass
class ChatRequest:
    system_prompt: str
    messages: list
    params: ChatParams = field(default_factory=ChatParams)

    def rendered_text(self) -> str:
        """Flatten the whole request into one string, used for predicate matching."""
        parts = [self.system_prompt]
        for m in self.messages:
            parts.append(f"{m.speaker_label}: {m.content}" if m.speaker_label else m.content)
        return "\n".join(parts)


@dataclass
class ChatResponse:
    text: str
    usage: TokenUsage = field(default_factory=TokenUsage)


@dataclass
class ScriptEntry:
    """One canned completion, optionally gated on request content.

    when_contains: substring(s) that must all appear in the rendered request
    before this entry is eligible. Entries are consumed at most once, in order.
    """
    response: str
    when_contains: list = field(default_factory=list)
    used: bool = False

    def matches(self, request: ChatRequest) -> bool:
        if not self.when_contains:
            return True
        text = request.rendered_text()
        return all(needle in text for needle in self.when_contains)


class ScriptedProvider:
    """Deterministic provider: replays queued entries, first eligible match wins.

    With no eligible entry the provider either returns the configured fallback
    (without consuming anything) or raises ScriptExhausted. Every request is
    kept in `request_log` so tests can inspect exactly what agents asked.
    """

    def __init__(self, entries=None, fallback_response: str = None):
        self.entries = list(entries or [])
        self.fallback_response = fallback_response
        self.request_log = []
        self._lock = threading.Lock()

    def queue(self, response: str, when_contains=None):
        if isinstance(when_contains, str):
            when_contains = [when_contains]
        self.entries.append(ScriptEntry(response, list(when_contains or [])))
        return self

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.request_log.append(request)
            for entry in self.entries:
                if not entry.used and entry.matches(request):
                    entry.used = True
                    return ChatResponse(text=entry.response)
            if self.fallback_response is not None:
                return ChatResponse(text=self.fallback_response)
            raise ScriptExhausted(
                f"no scripted response left for request ({len(self.request_log)} seen)")

    @property
    def call_count(self) -> int:
        with self._lock:
            return len(self.request_log)


def scripted(responses, fallback_response=None) -> ScriptedProvider:
    """Build a ScriptedProvider from a plain list of response strings."""
    provider = ScriptedProvider(fallback_response=fallback_response)
    for response in responses:
        provider.queue(response)
    return provider


class HttpProvider:
    """Chat-completions client with bounded retries and exponential backoff.

    The API key is read from an environment variable at call time and is never
    written to configs or artifacts.
    """

    def __init__(self, endpoint_url: str, model_name: str = "",
                 key_env: str = "TEAMLINE_API_KEY", retries: int = 3,
                 backoff_s: float = 1.0, timeout_s: float = 60.0):
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.key_env = key_env
        self.retries = max(1, retries)
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s

    def check_ready(self):
        if self.key_env and not os.environ.get(self.key_env):
            raise ProviderUnavailable(
                f"API key environment variable {self.key_env} is not set")

    def _wire_messages(self, request: ChatRequest) -> list:
        wire = []
        if request.system_prompt:
            wire.append({"role": "system", "content": request.system_prompt})
        for m in request.messages:
            content = f"{m.speaker_label}: {m.content}" if m.speaker_label else m.content
            wire.append({"role": "user", "content": content})
        return wire

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.check_ready()
        body = {
            "model": request.params.model_name or self.model_name,
            "messages": self._wire_messages(request),
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        }
        headers = {}
        key = os.environ.get(self.key_env, "") if self.key_env else ""
        if key:
            headers["Authorization"] = f"Bearer {key}"

        last_error = None
        for attempt in range(self.retries):
            if attempt and self.backoff_s:
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                resp = requests.post(self.endpoint_url, json=body, headers=headers,
                                     timeout=self.timeout_s)
                resp.raise_for_status()
                return self._parse(resp.json())
            except MalformedResponse as err:
                last_error = err
            except (requests.RequestException, ValueError) as err:
                last_error = ProviderUnavailable(str(err))
        if isinstance(last_error, MalformedResponse):
            raise last_error
        raise ProviderUnavailable(
            f"{self.endpoint_url} unreachable after {self.retries} attempts: {last_error}")

    def _parse(self, payload: dict) -> ChatResponse:
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise MalformedResponse(f"unexpected completion payload: {payload!r}")
        usage = payload.get("usage") or {}
        return ChatResponse(
            text=text,
            usage=TokenUsage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            ),
        )
