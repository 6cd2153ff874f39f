"""Orchestration shared by the CLI and the HTTP service.

The engine owns the loaded corpus, both indexes, the retriever, the audit
store, and the backend registry. Index building and loading guard against
stale state via the corpus fingerprint, and every query or indicator run
appends a replayable audit record.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dense as dense_mod
from . import sparse as sparse_mod
from .context import DEFAULT_BUDGET, ContextBundle, assemble_context
from .corpus import Corpus, build_retrieval_string, load_corpus
from .embedding import Encoder, EncoderRegistry, default_registry, encode_normalized
from .errors import IndexCorruptError, IndexWriteFailureError
from .evaluation import EvalQuery, outcome_for, retrieval_report
from .gateway import (
    AnswerResult,
    BackendRegistry,
    GenerationBackend,
    GenerationParams,
    Message,
    build_chat_messages,
    generate_answer,
    generate_subqueries,
)
from .indicators import (
    DEFAULT_INDICATORS,
    check_cross_indicator_coherence,
    request_indicator,
    validate_operation_input,
)
from .pipeline import PipelineConfig, Retriever, RetrievalTrace

logger = logging.getLogger(__name__)

DENSE_INDEX_FILE = "dense.idx"
INDEX_META_FILE = "index_meta.json"


@dataclass
class RunConfig:
    corpus_path: str
    index_dir: str
    audit_path: str
    encoder_name: str = "hashed-bow"
    dimension: int = 384
    dense_backend: str = "flat_exact"
    backend_name: str = "contract-mock"
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    generation: GenerationParams = field(default_factory=GenerationParams)
    context_budget: int = DEFAULT_BUDGET
    max_subqueries: int = 3
    indicator_runs: int = 10

    def to_dict(self) -> dict:
        return {
            "corpus_path": str(self.corpus_path),
            "index_dir": str(self.index_dir),
            "audit_path": str(self.audit_path),
            "encoder_name": self.encoder_name,
            "dimension": self.dimension,
            "dense_backend": self.dense_backend,
            "backend_name": self.backend_name,
            "pipeline": self.pipeline.to_dict(),
            "generation": self.generation.to_dict(),
            "context_budget": self.context_budget,
            "max_subqueries": self.max_subqueries,
            "indicator_runs": self.indicator_runs,
        }


@dataclass
class QueryResult:
    answer: str
    sources: list[dict]
    audit_id: str
    bundle: ContextBundle
    trace: RetrievalTrace
    citations: tuple[int, ...]
    sub_results: list["QueryResult"] = field(default_factory=list)


def embed_corpus(corpus: Corpus, encoder: Encoder) -> tuple[np.ndarray, list[str]]:
    """Unit-norm embeddings of every chunk's retrieval string.

    Chunks embedding to zero are excluded from the dense index and logged;
    they remain reachable through sparse retrieval.
    """
    vectors: list[np.ndarray] = []
    ids: list[str] = []
    for chunk in corpus.chunks:
        vec = encode_normalized(encoder, build_retrieval_string(chunk))
        if vec is None:
            logger.warning("chunk %s embeds to zero; excluded from dense index", chunk.chunk_id)
            continue
        vectors.append(vec)
        ids.append(chunk.chunk_id)
    if not vectors:
        return np.zeros((0, encoder.dimension), dtype=np.float32), []
    return np.stack(vectors), ids


class Engine:
    def __init__(
        self,
        config: RunConfig,
        backends: BackendRegistry | None = None,
        encoders: EncoderRegistry | None = None,
    ):
        self.config = config
        self.encoders = encoders or default_registry(config.dimension)
        self.backends = backends or BackendRegistry()
        self.corpus: Corpus | None = None
        self.retriever: Retriever | None = None
        self._audit_store = None

    # -- index lifecycle

    @property
    def audit_store(self):
        from .context import AuditStore

        if self._audit_store is None:
            self._audit_store = AuditStore(self.config.audit_path)
        return self._audit_store

    def build_index(self) -> dict:
        """Load the corpus, embed, build, and persist the dense index."""
        corpus = load_corpus(self.config.corpus_path)
        encoder = self.encoders.get(self.config.encoder_name)
        vectors, ids = embed_corpus(corpus, encoder)
        index = dense_mod.build(
            vectors,
            ids,
            backend=self.config.dense_backend,
            encoder_name=encoder.name,
        )
        index_dir = Path(self.config.index_dir)
        try:
            index_dir.mkdir(parents=True, exist_ok=True)
            dense_mod.save(index, index_dir / DENSE_INDEX_FILE)
            meta = {
                "fingerprint": corpus.index_fingerprint,
                "encoder_name": encoder.name,
                "dimension": encoder.dimension,
                "dense_backend": self.config.dense_backend,
                "n_chunks": len(corpus),
                "n_indexed": len(ids),
            }
            (index_dir / INDEX_META_FILE).write_text(
                json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8"
            )
        except OSError as exc:
            raise IndexWriteFailureError(str(exc)) from exc
        self._attach(corpus, index)
        return meta

    def load(self) -> None:
        """Load corpus and persisted indexes; fingerprint mismatch means stale."""
        corpus = load_corpus(self.config.corpus_path)
        index_dir = Path(self.config.index_dir)
        meta_path = index_dir / INDEX_META_FILE
        if not meta_path.exists():
            raise IndexCorruptError(
                f"no index metadata at {meta_path}; run 'build-index' first"
            )
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta["fingerprint"] != corpus.index_fingerprint:
            raise IndexCorruptError(
                "corpus fingerprint does not match the persisted index; "
                "rebuild the index with 'build-index'"
            )
        index = dense_mod.load(index_dir / DENSE_INDEX_FILE)
        if index.encoder_name != self.config.encoder_name:
            raise IndexCorruptError(
                f"index was built with encoder {index.encoder_name!r}, "
                f"configured encoder is {self.config.encoder_name!r}; rebuild"
            )
        self._attach(corpus, index)

    def _attach(self, corpus: Corpus, index: dense_mod.DenseIndex) -> None:
        documents = [build_retrieval_string(c) for c in corpus.chunks]
        sparse_index = sparse_mod.build(documents, [c.chunk_id for c in corpus.chunks])
        encoder = self.encoders.get(self.config.encoder_name)
        self.corpus = corpus
        self.retriever = Retriever(corpus, index, sparse_index, encoder, self.config.pipeline)

    def _require_loaded(self) -> Retriever:
        if self.retriever is None:
            raise IndexCorruptError("engine not loaded; call load() or build_index()")
        return self.retriever

    # -- query flow

    def retrieve(self, query: str) -> tuple[RetrievalTrace, ContextBundle]:
        retriever = self._require_loaded()
        trace = retriever.retrieve(query)
        ranked = [(c.position, self.corpus.get(c.chunk_id)) for c in trace.kept]
        bundle = assemble_context(ranked, self.config.context_budget)
        return trace, bundle

    def _record_query_audit(
        self,
        query: str,
        trace: RetrievalTrace,
        bundle: ContextBundle,
        result: AnswerResult | None,
        sub_queries: list[dict] | None = None,
        parent_id: str | None = None,
    ) -> str:
        payload = {
            "kind": "query",
            "query": query,
            "sub_queries": sub_queries or [],
            "parent_id": parent_id,
            "config": self.config.to_dict(),
            "corpus_fingerprint": self.corpus.index_fingerprint,
            "retrieved": [c.to_dict() for c in trace.candidates],
            "included_ids": list(bundle.included_ids),
            "context_text": bundle.context_text,
            "sources": [s.to_dict() for s in bundle.sources],
            "answer": result.answer if result else "",
            "citations": list(result.citations) if result else [],
            "reasoning_trace": result.reasoning_trace if result else None,
        }
        return self.audit_store.record(payload)

    def answer_query(
        self,
        question: str,
        history: list[Message] | None = None,
        preprocess: bool = False,
        stream: bool = False,
        pipeline_overrides: dict | None = None,
        reasoning_effort: str | None = None,
    ) -> QueryResult:
        retriever = self._require_loaded()
        if pipeline_overrides:
            retriever.config = replace(retriever.config, **pipeline_overrides)
        params = self.config.generation
        if reasoning_effort:
            params = replace(params, reasoning_effort=reasoning_effort)
        backend = self.backends.get(self.config.backend_name)

        if preprocess:
            subs = generate_subqueries(question, self.config.max_subqueries, backend, params)
            sub_payload = [{"query": s.query, "reasoning_level": s.reasoning_level} for s in subs]
            parent = self._run_single(question, backend, params, history, stream,
                                      sub_queries=sub_payload)
            # conversational state resets between sub-queries
            for sub in subs:
                child = self._run_single(sub.query, backend, params, None, stream,
                                         parent_id=parent.audit_id)
                parent.sub_results.append(child)
            if parent.sub_results:
                parent.answer = "\n\n".join(r.answer for r in parent.sub_results)
            return parent
        return self._run_single(question, backend, params, history, stream)

    def _run_single(
        self,
        question: str,
        backend: GenerationBackend,
        params: GenerationParams,
        history: list[Message] | None,
        stream: bool,
        sub_queries: list[dict] | None = None,
        parent_id: str | None = None,
    ) -> QueryResult:
        trace, bundle = self.retrieve(question)
        messages = build_chat_messages(question, bundle, history)
        if stream:
            text = "".join(backend.stream(messages, params))
            result = AnswerResult(answer=text, citations=(), reasoning_trace=None)
            from .gateway import extract_citations

            result.citations = extract_citations(text)
        else:
            result = generate_answer(messages, params, backend)
        audit_id = self._record_query_audit(
            question, trace, bundle, result, sub_queries, parent_id
        )
        return QueryResult(
            answer=result.answer,
            sources=[s.to_dict() for s in bundle.sources],
            audit_id=audit_id,
            bundle=bundle,
            trace=trace,
            citations=result.citations,
        )

    def replay(self, record: dict) -> list[str]:
        """Re-run retrieval from an audit record; returns the included ids."""
        if record.get("corpus_fingerprint") != self.corpus.index_fingerprint:
            raise IndexCorruptError("audit record refers to a different corpus fingerprint")
        _, bundle = self.retrieve(record["query"])
        return list(bundle.included_ids)

    # -- indicator flow

    def run_indicators(self, op_raw: dict, indicator_names: list[str], runs: int | None = None) -> dict:
        self._require_loaded()
        op = validate_operation_input(op_raw)
        backend = self.backends.get(self.config.backend_name)
        runs = runs or self.config.indicator_runs
        results = {}
        audit_ids = {}
        for name in indicator_names:
            if name not in DEFAULT_INDICATORS:
                from .errors import InvalidValueError

                raise InvalidValueError("indicators", name)
            spec = DEFAULT_INDICATORS[name]
            result, bundle = request_indicator(
                spec, op, runs, backend, self.retriever,
                budget=self.config.context_budget, params=self.config.generation,
            )
            results[name] = result
            audit_ids[name] = self.audit_store.record(
                {
                    "kind": "indicator",
                    "indicator": name,
                    "op": op.to_dict(),
                    "config": self.config.to_dict(),
                    "corpus_fingerprint": self.corpus.index_fingerprint,
                    "included_ids": list(bundle.included_ids),
                    "context_text": bundle.context_text,
                    "sources": [s.to_dict() for s in bundle.sources],
                    "result": result.to_dict(),
                }
            )
        warnings = check_cross_indicator_coherence(results)
        return {
            "op": op.to_dict(),
            "indicators": {name: r.to_dict() for name, r in results.items()},
            "warnings": warnings,
            "audit_ids": audit_ids,
        }

    # -- evaluation flow

    def run_eval(self, fixture_path: str | Path) -> dict:
        """Retrieval metrics over an EvalQuery fixture file."""
        self._require_loaded()
        raw = json.loads(Path(fixture_path).read_text(encoding="utf-8"))
        outcomes = []
        for item in raw:
            query = EvalQuery(
                query=item["query"],
                variant=item["variant"],
                ground_truth_chunk_id=item["ground_truth_chunk_id"],
            )
            trace, _ = self.retrieve(query.query)
            ranked = [c.chunk_id for c in trace.kept]
            outcomes.append(outcome_for(query, ranked))
        return retrieval_report(outcomes)
