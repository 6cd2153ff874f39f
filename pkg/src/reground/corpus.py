"""Chunked corpus loading, validation, and retrieval-string construction.

The corpus is a JSON array of chunk objects. Chunks are the atomic evidence
unit: everything retrieved, cited, or audited downstream resolves back to a
chunk by id or positional index. The corpus is immutable after load; a reload
replaces it wholesale.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    DuplicateChunkIdError,
    MalformedJsonError,
    MissingFileError,
    SchemaViolationError,
)

CHUNK_KINDS = ("article", "amc", "gm", "table")

_REQUIRED_FIELDS = (
    "chunk_id",
    "chunk_title",
    "chunk_text",
    "chunk_summary",
    "chunk_keywords",
    "source_file",
    "section_title",
    "page",
    "kind",
)


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    chunk_title: str
    chunk_text: str
    chunk_summary: str
    chunk_keywords: tuple[str, ...]
    source_file: str
    section_title: str
    page: int
    kind: str

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in _REQUIRED_FIELDS}
        d["chunk_keywords"] = list(self.chunk_keywords)
        return d


@dataclass(frozen=True)
class Corpus:
    chunks: tuple[Chunk, ...]
    index_fingerprint: str

    def __len__(self) -> int:
        return len(self.chunks)

    def position_of(self, chunk_id: str) -> int:
        return self._positions[chunk_id]

    def get(self, chunk_id: str) -> Chunk:
        return self.chunks[self._positions[chunk_id]]

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._positions

    @property
    def _positions(self) -> dict[str, int]:
        # built lazily; frozen dataclass forces object.__setattr__
        cached = self.__dict__.get("_positions_cache")
        if cached is None:
            cached = {c.chunk_id: i for i, c in enumerate(self.chunks)}
            object.__setattr__(self, "_positions_cache", cached)
        return cached


def _validate_chunk(raw: dict) -> Chunk:
    chunk_id = raw.get("chunk_id")
    if not isinstance(chunk_id, str) or not chunk_id:
        raise SchemaViolationError("chunk_id", chunk_id, "must be a non-empty string")

    unknown = set(raw) - set(_REQUIRED_FIELDS)
    if unknown:
        raise SchemaViolationError(sorted(unknown)[0], chunk_id, "unknown field")
    for field in _REQUIRED_FIELDS:
        if field not in raw:
            raise SchemaViolationError(field, chunk_id, "missing field")

    for field in ("chunk_title", "chunk_text"):
        if not isinstance(raw[field], str) or not raw[field]:
            raise SchemaViolationError(field, chunk_id, "must be a non-empty string")
    for field in ("chunk_summary", "source_file", "section_title"):
        if not isinstance(raw[field], str):
            raise SchemaViolationError(field, chunk_id, "must be a string")

    keywords = raw["chunk_keywords"]
    if not isinstance(keywords, list):
        raise SchemaViolationError("chunk_keywords", chunk_id, "must be a list")
    for kw in keywords:
        if not isinstance(kw, str) or not kw or kw != kw.lower():
            raise SchemaViolationError(
                "chunk_keywords", chunk_id, "keywords must be non-empty lowercase strings"
            )

    page = raw["page"]
    if not isinstance(page, int) or isinstance(page, bool) or page < 1:
        raise SchemaViolationError("page", chunk_id, "must be an integer >= 1")

    if raw["kind"] not in CHUNK_KINDS:
        raise SchemaViolationError("kind", chunk_id, f"must be one of {CHUNK_KINDS}")

    return Chunk(
        chunk_id=chunk_id,
        chunk_title=raw["chunk_title"],
        chunk_text=raw["chunk_text"],
        chunk_summary=raw["chunk_summary"],
        chunk_keywords=tuple(keywords),
        source_file=raw["source_file"],
        section_title=raw["section_title"],
        page=page,
        kind=raw["kind"],
    )


def compute_fingerprint(chunks: list[Chunk] | tuple[Chunk, ...]) -> str:
    """Content hash over the canonical JSON form of every chunk, in order."""
    payload = json.dumps([c.to_dict() for c in chunks], sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a chunk file; positional indices follow file order."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"corpus file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedJsonError(exc.pos) from exc
    if not isinstance(raw, list):
        raise MalformedJsonError(0, "corpus file must contain a JSON array")

    chunks: list[Chunk] = []
    seen: set[str] = set()
    for item in raw:
        if not isinstance(item, dict):
            raise MalformedJsonError(0, "corpus entries must be JSON objects")
        chunk = _validate_chunk(item)
        if chunk.chunk_id in seen:
            raise DuplicateChunkIdError(chunk.chunk_id)
        seen.add(chunk.chunk_id)
        chunks.append(chunk)

    return Corpus(chunks=tuple(chunks), index_fingerprint=compute_fingerprint(chunks))


def build_retrieval_string(chunk: Chunk) -> str:
    """Title-doubled indexing representation: title, title, text, newline-joined.

    Stored alongside metadata at index build time so the indexed form is
    auditable and stable across runs.
    """
    return f"{chunk.chunk_title}\n{chunk.chunk_title}\n{chunk.chunk_text}"
