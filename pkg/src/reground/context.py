"""Bounded context assembly and the append-only audit log.

Context is built as a strict ranked prefix: chunks are rendered in final rank
order and insertion stops at the first chunk that would overflow the
character budget. The rendering format is bit-exact because grounding checks
parse the inline "[index]" markers back out of answers.

Audit records are JSON lines keyed by a deterministic sequential id, so two
cold-start runs over the same inputs produce byte-identical records apart
from timestamps.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Chunk
from .errors import StorageFailureError, UnknownAuditIdError

DEFAULT_BUDGET = 12_000
NO_CONTEXT = "[NO CONTEXT]"


@dataclass(frozen=True)
class SourceRef:
    chunk_index: int
    chunk_id: str
    source_file: str
    section_title: str
    page: int

    def to_dict(self) -> dict:
        return {
            "chunk_index": self.chunk_index,
            "chunk_id": self.chunk_id,
            "source_file": self.source_file,
            "section_title": self.section_title,
            "page": self.page,
        }


@dataclass(frozen=True)
class ContextBundle:
    context_text: str
    included_ids: tuple[str, ...]
    sources: tuple[SourceRef, ...]
    truncated: bool

    def to_dict(self) -> dict:
        return {
            "context_text": self.context_text,
            "included_ids": list(self.included_ids),
            "sources": [s.to_dict() for s in self.sources],
            "truncated": self.truncated,
        }


def render_chunk(index: int, chunk: Chunk) -> str:
    return f"[{index}] {chunk.section_title}, page {chunk.page} > {chunk.chunk_text}\n"


def assemble_context(
    ranked: list[tuple[int, Chunk]], budget: int = DEFAULT_BUDGET
) -> ContextBundle:
    """Assemble up to `budget` characters of (index, chunk) pairs in rank order.

    Stops at the first chunk whose rendering would exceed the remaining
    budget (no skip-ahead), so included ids are always a ranked prefix.
    """
    if not ranked:
        return ContextBundle(NO_CONTEXT, (), (), truncated=False)

    parts: list[str] = []
    included: list[str] = []
    sources: list[SourceRef] = []
    used = 0
    truncated = False
    for index, chunk in ranked:
        rendering = render_chunk(index, chunk)
        if used + len(rendering) > budget:
            truncated = True
            break
        parts.append(rendering)
        used += len(rendering)
        included.append(chunk.chunk_id)
        sources.append(
            SourceRef(index, chunk.chunk_id, chunk.source_file, chunk.section_title, chunk.page)
        )
    if not included:
        return ContextBundle(NO_CONTEXT, (), (), truncated=True)
    return ContextBundle("".join(parts), tuple(included), tuple(sources), truncated)


class AuditStore:
    """Append-only JSON-lines store; single-writer appends, concurrent reads."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._count = 0
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                self._count = sum(1 for line in fh if line.strip())

    def record(self, payload: dict) -> str:
        """Persist one record; returns its id. Timestamps live in a single field."""
        with self._lock:
            record_id = f"rec-{self._count + 1:06d}"
            entry = {"audit_id": record_id, **payload, "timestamps": {"recorded_at": time.time()}}
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
            except OSError as exc:
                raise StorageFailureError(str(exc)) from exc
            self._count += 1
            return record_id

    def get(self, record_id: str) -> dict:
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    if entry.get("audit_id") == record_id:
                        return entry
        raise UnknownAuditIdError(f"no audit record {record_id!r}")

    def all(self) -> list[dict]:
        if not self.path.exists():
            return []
        with self.path.open(encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]
