"""Generation gateway: prompt/message construction, pluggable backends, and
optional query preprocessing.

Prompt texts are shipped verbatim as data files so they stay auditable and
diffable. No language model is bundled; backends implement a single
synchronous `complete` call (plus optional prefix-consistent streaming) and
tests drive everything through scripted mocks.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

from .context import NO_CONTEXT, ContextBundle
from .errors import (
    BackendUnavailableError,
    InvalidReasoningLevelError,
    MalformedBackendJsonError,
    MissingCredentialsError,
    MissingPromptFileError,
)

PROMPT_DIR = Path(__file__).parent / "prompts"
REASONING_LEVELS = ("none", "low", "medium", "high")
REFUSAL_ANSWER = "I cannot provide an answer for this question"
ACKNOWLEDGEMENT = "Understood. I will answer using only the provided context."

_CITATION_RE = re.compile(r"\[(\d+)\]")


def load_prompt(name: str) -> str:
    path = PROMPT_DIR / f"{name}.txt"
    if not path.exists():
        raise MissingPromptFileError(path)
    return path.read_text(encoding="utf-8")


@dataclass(frozen=True)
class GenerationParams:
    max_tokens: int = 56_000  # completion-only budget
    temperature: float = 0.2
    top_p: float = 0.9
    presence_penalty: float = 0.0
    frequency_penalty: float = 0.0
    reasoning_effort: str = "medium"  # low | medium | high
    completions_per_query: int = 1

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")
        if self.reasoning_effort not in ("low", "medium", "high"):
            raise ValueError(f"invalid reasoning_effort: {self.reasoning_effort!r}")

    def to_dict(self) -> dict:
        return {
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "presence_penalty": self.presence_penalty,
            "frequency_penalty": self.frequency_penalty,
            "reasoning_effort": self.reasoning_effort,
            "completions_per_query": self.completions_per_query,
        }


@dataclass(frozen=True)
class Message:
    role: str  # system | developer | user | assistant
    content: str

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class SubQuery:
    query: str
    reasoning_level: str


@dataclass(frozen=True)
class Completion:
    text: str
    reasoning_trace: str | None = None


@dataclass
class AnswerResult:
    answer: str
    citations: tuple[int, ...]
    reasoning_trace: str | None = None


class GenerationBackend:
    """Backend contract: one synchronous completion per call."""

    name: str

    def complete(self, messages: list[Message], params: GenerationParams) -> Completion:
        raise NotImplementedError

    def stream(self, messages: list[Message], params: GenerationParams) -> Iterator[str]:
        """Prefix-consistent streaming; default chunks the full completion."""
        text = self.complete(messages, params).text
        step = 32
        for i in range(0, len(text), step):
            yield text[i : i + step]


class ScriptedBackend(GenerationBackend):
    """Mock backend replaying a fixed response script, in order."""

    def __init__(self, responses: list[Completion | str], name: str = "scripted-mock"):
        self.name = name
        self._responses = [
            r if isinstance(r, Completion) else Completion(text=r) for r in responses
        ]
        self._cursor = 0
        self.calls: list[list[Message]] = []

    def complete(self, messages: list[Message], params: GenerationParams) -> Completion:
        if self._cursor >= len(self._responses):
            raise BackendUnavailableError("scripted backend exhausted")
        self.calls.append(list(messages))
        response = self._responses[self._cursor]
        self._cursor += 1
        return response


class CallableBackend(GenerationBackend):
    """Mock backend delegating to a function of the message sequence."""

    def __init__(self, fn: Callable[[list[Message], GenerationParams], Completion | str],
                 name: str = "callable-mock"):
        self.name = name
        self._fn = fn

    def complete(self, messages: list[Message], params: GenerationParams) -> Completion:
        out = self._fn(messages, params)
        return out if isinstance(out, Completion) else Completion(text=out)


def contract_faithful_mock(answer_fn: Callable[[str], str] | None = None) -> CallableBackend:
    """Mock honoring the developer-prompt contract: exact refusal on [NO CONTEXT],
    otherwise an answer derived from the context message."""

    def _respond(messages: list[Message], params: GenerationParams) -> Completion:
        context = next(
            (m.content for m in reversed(messages) if m.role == "user" and
             m.content.startswith("Context:")),
            "",
        )
        if NO_CONTEXT in context:
            return Completion(text=REFUSAL_ANSWER)
        body = context[len("Context:\n"):]
        if answer_fn is not None:
            return Completion(text=answer_fn(body))
        first_line = body.splitlines()[0] if body else ""
        marker = _CITATION_RE.search(first_line)
        tag = f" [{marker.group(1)}]" if marker else ""
        # restate the top-ranked evidence line so answers stay context-only
        sentence = first_line.split(" > ", 1)[-1] if " > " in first_line else first_line
        return Completion(text=f"{sentence}{tag}")

    return CallableBackend(_respond, name="contract-mock")


class BackendRegistry:
    def __init__(self):
        self._backends: dict[str, GenerationBackend] = {}

    def register(self, backend: GenerationBackend) -> None:
        self._backends[backend.name] = backend

    def get(self, name: str) -> GenerationBackend:
        try:
            return self._backends[name]
        except KeyError:
            raise BackendUnavailableError(f"no backend registered under {name!r}") from None


def require_credential(env_name: str) -> str:
    """Fetch a credential from the environment; fail fast, never log the value."""
    value = os.environ.get(env_name)
    if not value:
        raise MissingCredentialsError(
            f"credential {env_name} is not set; export it before starting the service"
        )
    return value


# --- message construction -----------------------------------------------------

def build_chat_messages(
    query: str,
    bundle: ContextBundle,
    history: list[Message] | None = None,
) -> list[Message]:
    """Canonical chat order: system, developer, [history], query, ack, context."""
    messages = [
        Message("system", load_prompt("answer_system")),
        Message("developer", load_prompt("answer_developer")),
    ]
    if history:
        messages.extend(history)
    messages.append(Message("user", query))
    messages.append(Message("assistant", ACKNOWLEDGEMENT))
    messages.append(Message("user", f"Context:\n{bundle.context_text}"))
    return messages


def extract_citations(text: str) -> tuple[int, ...]:
    seen: list[int] = []
    for match in _CITATION_RE.finditer(text):
        idx = int(match.group(1))
        if idx not in seen:
            seen.append(idx)
    return tuple(seen)


def generate_answer(
    messages: list[Message],
    params: GenerationParams,
    backend: GenerationBackend,
) -> AnswerResult:
    """One completion; the reasoning trace is stored apart from the answer and
    never contributes to citations or grounding."""
    completion = backend.complete(messages, params)
    return AnswerResult(
        answer=completion.text,
        citations=extract_citations(completion.text),
        reasoning_trace=completion.reasoning_trace,
    )


# --- query preprocessing --------------------------------------------------------

def parse_strict_json(text: str) -> dict:
    """The backend must emit exactly one JSON object, nothing around it."""
    try:
        parsed = json.loads(text.strip())
    except json.JSONDecodeError as exc:
        raise MalformedBackendJsonError(f"backend output is not a single JSON object: {exc}") from exc
    if not isinstance(parsed, dict):
        raise MalformedBackendJsonError("backend output must be a JSON object")
    return parsed


def generate_subqueries(
    user_query: str,
    n: int,
    backend: GenerationBackend,
    params: GenerationParams | None = None,
) -> list[SubQuery]:
    if n < 1:
        raise ValueError("n must be >= 1")
    system = load_prompt("query_generation_system").replace(
        "at most N queries", f"at most {n} queries"
    )
    user = load_prompt("query_generation_user").replace("<USER_QUERY>", user_query)
    completion = backend.complete(
        [Message("system", system), Message("user", user)],
        params or GenerationParams(),
    )
    parsed = parse_strict_json(completion.text)
    if "queries" not in parsed or not isinstance(parsed["queries"], list):
        raise MalformedBackendJsonError('missing "queries" list')
    subqueries: list[SubQuery] = []
    for entry in parsed["queries"][:n]:
        if not isinstance(entry, dict) or not isinstance(entry.get("query"), str):
            raise MalformedBackendJsonError("each query entry needs a string 'query'")
        level = entry.get("reasoning_level")
        if level not in REASONING_LEVELS:
            raise InvalidReasoningLevelError(level)
        subqueries.append(SubQuery(query=entry["query"], reasoning_level=level))
    return subqueries
