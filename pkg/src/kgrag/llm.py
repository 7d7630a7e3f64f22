"""Chat-completion clients: an OpenAI-style HTTP client, retries and offline mocks.

Every client exposes ``send(prompt, model, temperature) -> str``. Mock clients
set ``deterministic = True``; the evaluation harness then records zero latency
so journals produced with mocks are byte-reproducible.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol

from .errors import ConfigError, ParseError, TransportError

log = logging.getLogger(__name__)


class ChatClient(Protocol):
    def send(self, prompt: str, model: str, temperature: float) -> str: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass
class ProviderProfile:
    name: str
    model: str
    provider: str = "openai"
    endpoint: str = "https://api.openai.com/v1"
    api_key_env: str | None = "OPENAI_API_KEY"
    max_retries: int = 3
    timeout: float = 60.0

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProviderProfile":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown profile field(s): {', '.join(sorted(unknown))}")
        if "name" not in d or "model" not in d:
            raise ConfigError("a provider profile needs 'name' and 'model'")
        return cls(**d)


def load_profiles(path) -> list[ProviderProfile]:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON ({e.msg})", line=e.lineno) from None
    if isinstance(data, dict):
        data = data.get("profiles", [])
    profiles = [ProviderProfile.from_dict(d) for d in data]
    names = [p.name for p in profiles]
    if len(set(names)) != len(names):
        raise ConfigError("provider profile names must be unique")
    return profiles


class HTTPChatClient:
    """POSTs to ``{endpoint}/chat/completions`` with a single user message."""

    deterministic = False

    def __init__(self, profile: ProviderProfile, trace: bool = False, transport=None):
        self.profile = profile
        self.trace = trace
        self._transport = transport

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        env = self.profile.api_key_env
        if env:
            key = os.environ.get(env)
            if not key:
                raise TransportError(f"environment variable {env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def send(self, prompt: str, model: str, temperature: float) -> str:
        import httpx

        body = {"model": model, "temperature": temperature,
                "messages": [{"role": "user", "content": prompt}]}
        url = self.profile.endpoint.rstrip("/") + "/chat/completions"
        if self.trace:
            log.debug("POST %s %s (Authorization redacted)", url, json.dumps(body))
        try:
            with httpx.Client(timeout=self.profile.timeout, transport=self._transport) as http:
                resp = http.post(url, json=body, headers=self._headers())
        except httpx.HTTPError as e:
            raise TransportError(f"{self.profile.name}: {e}") from e
        if self.trace:
            log.debug("response %s %s", resp.status_code, resp.text)
        if resp.status_code >= 400:
            raise TransportError(f"{self.profile.name}: HTTP {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise TransportError(f"{self.profile.name}: unexpected response body") from e


class RetryingClient:
    """Retry ``TransportError`` with exponential backoff, then re-raise."""

    def __init__(self, inner: ChatClient, max_retries: int = 3, backoff: float = 0.5,
                 sleep: Callable[[float], None] = time.sleep):
        self.inner = inner
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        self.deterministic = getattr(inner, "deterministic", False)

    def send(self, prompt: str, model: str, temperature: float) -> str:
        for attempt in range(self.max_retries + 1):
            try:
                return self.inner.send(prompt, model, temperature)
            except TransportError as e:
                if attempt == self.max_retries:
                    raise
                log.warning("transport error (attempt %d/%d): %s", attempt + 1, self.max_retries + 1, e)
                self.sleep(self.backoff * 2 ** attempt)
        raise AssertionError("unreachable")


_ALLOWED_RE = re.compile(r"from this set: ([A-Z](?:, [A-Z])*)")


def allowed_letters_in(prompt: str) -> list[str]:
    m = _ALLOWED_RE.search(prompt)
    return m.group(1).split(", ") if m else []


class FunctionClient:
    """Wrap a plain ``fn(prompt) -> str``; handy in tests."""

    deterministic = True

    def __init__(self, fn: Callable[[str], str]):
        self.fn = fn
        self.calls: list[str] = []

    def send(self, prompt: str, model: str, temperature: float) -> str:
        self.calls.append(prompt)
        return self.fn(prompt)


class RandomClient:
    """Answer with a letter drawn uniformly from the prompt's allowed set.

    The draw is a pure function of (seed, model, temperature, prompt) so results
    do not depend on call order.
    """

    deterministic = True

    def __init__(self, seed: int = 0):
        self.seed = seed

    def send(self, prompt: str, model: str, temperature: float) -> str:
        letters = allowed_letters_in(prompt) or ["A", "B", "C", "D"]
        digest = hashlib.sha256(f"{self.seed}|{model}|{temperature!r}|{prompt}".encode("utf-8")).digest()
        return random.Random(int.from_bytes(digest[:8], "big")).choice(letters)


class ScriptedClient:
    """Replay responses from a transcript keyed by the SHA-256 of the prompt.

    A ``"default"`` entry, when present, answers prompts missing from the
    transcript; otherwise a missing prompt is a transport error.
    """

    deterministic = True

    def __init__(self, transcript: Mapping[str, str]):
        self.transcript = dict(transcript)

    @classmethod
    def load(cls, path) -> "ScriptedClient":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    @classmethod
    def from_prompts(cls, pairs: Mapping[str, str]) -> "ScriptedClient":
        return cls({prompt_hash(p): r for p, r in pairs.items()})

    def send(self, prompt: str, model: str, temperature: float) -> str:
        h = prompt_hash(prompt)
        if h in self.transcript:
            return self.transcript[h]
        if "default" in self.transcript:
            return self.transcript["default"]
        raise TransportError(f"no scripted response for prompt {h[:12]}")


class OracleClient:
    """Answer with the keyed letter looked up from the question block of a prompt."""

    deterministic = True

    def __init__(self, answer_for: Callable[[str], str | None]):
        self.answer_for = answer_for

    def send(self, prompt: str, model: str, temperature: float) -> str:
        ans = self.answer_for(prompt)
        if ans is None:
            raise TransportError("oracle has no key for this prompt")
        return ans
