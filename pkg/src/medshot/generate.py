"""Generation gateway: remote completion service plus offline mock backends.

The wire contract is ``POST {base_url}/generate`` with
``{"prompt", "max_tokens", "temperature", "stop"}`` returning
``{"text"}``.  Completions are truncated at the first occurrence of any
stop string.  Three mock modes keep the full pipeline runnable offline:
``fixed`` (a configured constant), ``echo_last_example`` (the answer of
the prompt's final example) and ``echo_question``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import requests

from medshot.prompts import AssembledPrompt

#: Default stop sequence: the start of a follow-on question block.
DEFAULT_STOP = ("\nQuestion:",)

#: Default completion budgets for long-form and forum-style answer corpora.
DEFAULT_MAX_TOKENS_LONG = 300
DEFAULT_MAX_TOKENS_SHORT = 150

MOCK_MODES = ("fixed", "echo_last_example", "echo_question")

#: Base delay (seconds) for exponential retry backoff; doubled per attempt.
RETRY_BACKOFF_BASE = 0.5


class BackendError(Exception):
    """Generation backend failure: transport exhaustion or an error response."""


@dataclass(frozen=True)
class GenerationEndpoint:
    """Connection settings for a remote completion service."""

    base_url: str
    timeout: float = 60.0
    retries: int = 2


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_tokens: int
    temperature: float = 0.0
    stop: tuple[str, ...] = field(default=DEFAULT_STOP)

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.temperature < 0.0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


@dataclass(frozen=True)
class GenerationResult:
    """A completion plus call metadata (wall latency, backend id, attempts)."""

    text: str
    latency_s: float
    backend: str
    attempt: int


def apply_stop(text: str, stop: tuple[str, ...]) -> str:
    """Truncate ``text`` at the first occurrence of any stop string."""
    cut = len(text)
    for s in stop:
        if not s:
            continue
        pos = text.find(s)
        if pos != -1:
            cut = min(cut, pos)
    return text[:cut]


def generate(endpoint: GenerationEndpoint, request: GenerationRequest) -> GenerationResult:
    """Run one completion against the remote service.

    Transport failures are retried with exponential backoff up to
    ``endpoint.retries`` times; exhaustion raises :class:`BackendError`.
    Non-200 responses raise immediately with the status code and a body
    snippet.  The returned text never contains a stop string.
    """
    url = endpoint.base_url.rstrip("/") + "/generate"
    payload = {
        "prompt": request.prompt,
        "max_tokens": request.max_tokens,
        "temperature": request.temperature,
        "stop": list(request.stop),
    }
    attempts = endpoint.retries + 1
    started = time.perf_counter()
    for attempt in range(1, attempts + 1):
        try:
            resp = requests.post(url, json=payload, timeout=endpoint.timeout)
        except requests.RequestException as exc:
            if attempt == attempts:
                raise BackendError(
                    f"transport failure for {url} after {attempts} attempt(s): {exc}"
                ) from exc
            time.sleep(RETRY_BACKOFF_BASE * 2 ** (attempt - 1))
            continue
        if resp.status_code != 200:
            raise BackendError(
                f"generation backend returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        try:
            text = str(resp.json()["text"])
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendError(f"malformed generation response: {exc}") from exc
        return GenerationResult(
            text=apply_stop(text, request.stop),
            latency_s=time.perf_counter() - started,
            backend=endpoint.base_url,
            attempt=attempt,
        )
    raise AssertionError("unreachable")


def mock_generate(
    mode: str, prompt: AssembledPrompt, fixed_text: str = ""
) -> GenerationResult:
    """Deterministic offline completion.

    ``fixed`` returns ``fixed_text``; ``echo_last_example`` returns the
    answer of the prompt's final example (error with zero examples);
    ``echo_question`` returns the test question.
    """
    started = time.perf_counter()
    if mode == "fixed":
        text = fixed_text
    elif mode == "echo_last_example":
        if not prompt.examples:
            raise ValueError("echo_last_example requires a prompt with at least one example")
        text = prompt.examples[-1].answer
    elif mode == "echo_question":
        text = prompt.test_question
    else:
        raise ValueError(f"unknown mock mode {mode!r}; expected one of {MOCK_MODES}")
    return GenerationResult(
        text=text,
        latency_s=time.perf_counter() - started,
        backend=f"mock:{mode}",
        attempt=1,
    )
