"""HTTP API over the engine: query answering, indicator runs, and the
audit/chunk lookups consumed by the evidence explorer."""

from __future__ import annotations

import time

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .engine import Engine
from .errors import (
    BackendUnavailableError,
    GenerationTimeoutError,
    IndexCorruptError,
    InvalidValueError,
    MissingCredentialsError,
    MissingFieldError,
    UnknownAuditIdError,
)
from .gateway import Message

SESSION_TTL_SECONDS = 1800


class QueryRequest(BaseModel):
    question: str = Field(min_length=1)
    top_k: int | None = Field(default=None, ge=1)
    keep_k: int | None = Field(default=None, ge=1)  # maps to ce_keep_k
    preprocess: bool = False
    stream: bool = False
    reasoning_effort: str | None = None
    session_id: str | None = None


class QueryResponse(BaseModel):
    answer: str
    sources: list[dict]
    audit_id: str
    citations: list[int]
    truncated: bool


class IndicatorRequest(BaseModel):
    op: dict
    indicators: list[str] = Field(min_length=1)
    runs: int | None = Field(default=None, ge=1)


class _SessionStore:
    """Per-session chat history; expires, never persisted beyond audit records."""

    def __init__(self, ttl: float = SESSION_TTL_SECONDS):
        self.ttl = ttl
        self._sessions: dict[str, tuple[float, list[Message]]] = {}

    def history(self, session_id: str) -> list[Message]:
        entry = self._sessions.get(session_id)
        if entry is None or time.monotonic() - entry[0] > self.ttl:
            return []
        return entry[1]

    def append(self, session_id: str, question: str, answer: str) -> None:
        history = self.history(session_id)
        history = history + [Message("user", question), Message("assistant", answer)]
        self._sessions[session_id] = (time.monotonic(), history)


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="reground", version="0.1.0")
    sessions = _SessionStore()

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "corpus_fingerprint": engine.corpus.index_fingerprint}

    @app.post("/query", response_model=QueryResponse)
    def query(request: QueryRequest) -> QueryResponse:
        overrides = {}
        if request.top_k is not None:
            overrides["dense_pool"] = request.top_k
        if request.keep_k is not None:
            overrides["keep_after_fusion"] = request.keep_k
        history = sessions.history(request.session_id) if request.session_id else None
        try:
            result = engine.answer_query(
                request.question,
                history=history,
                preprocess=request.preprocess,
                stream=request.stream,
                pipeline_overrides=overrides or None,
                reasoning_effort=request.reasoning_effort,
            )
        except (BackendUnavailableError, GenerationTimeoutError, MissingCredentialsError) as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if request.session_id:
            sessions.append(request.session_id, request.question, result.answer)
        return QueryResponse(
            answer=result.answer,
            sources=result.sources,
            audit_id=result.audit_id,
            citations=list(result.citations),
            truncated=result.bundle.truncated,
        )

    @app.post("/indicators")
    def indicators(request: IndicatorRequest) -> dict:
        try:
            return engine.run_indicators(request.op, request.indicators, request.runs)
        except MissingFieldError as exc:
            raise HTTPException(
                status_code=400, detail={"field": exc.field, "error": "missing"}
            ) from exc
        except InvalidValueError as exc:
            raise HTTPException(
                status_code=400,
                detail={"field": exc.field, "value": exc.value, "error": "invalid value"},
            ) from exc
        except (BackendUnavailableError, GenerationTimeoutError) as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc

    @app.get("/audit/{audit_id}")
    def audit(audit_id: str) -> dict:
        try:
            return engine.audit_store.get(audit_id)
        except UnknownAuditIdError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get("/chunks/{chunk_id}")
    def chunk(chunk_id: str) -> dict:
        if engine.corpus is None or chunk_id not in engine.corpus:
            raise HTTPException(status_code=404, detail=f"unknown chunk id {chunk_id!r}")
        found = engine.corpus.get(chunk_id)
        return {**found.to_dict(), "position": engine.corpus.position_of(chunk_id)}

    @app.exception_handler(IndexCorruptError)
    def _index_error(request, exc):  # pragma: no cover - defensive
        raise HTTPException(status_code=503, detail=str(exc))

    return app
