"""Hybrid ranking pipeline: RRF fusion of dense and sparse lists, MMR
diversification of the dense pool, field-aware post-scoring, late-interaction
(MaxSim) reranking, and elbow filtering.

Stage order is fixed: dense(pool) -> MMR -> [dense list] + BM25 -> RRF ->
truncate -> post-score -> rerank -> elbow. Every stage is a pure function of
immutable inputs; identical (corpus, config, query) always reproduce the
same candidate sequence and scores. Ties break by corpus position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dense as dense_mod
from . import sparse as sparse_mod
from .corpus import Chunk, Corpus
from .embedding import Encoder, encode_normalized, l2_normalize
from .sparse import tokenize


@dataclass(frozen=True)
class PipelineConfig:
    dense_pool: int = 50
    keep_after_fusion: int = 10
    rrf_k: int = 60
    lambda_mmr: float = 0.6
    w_fused: float = 0.5
    w_summary: float = 0.4
    w_keyword: float = 0.1
    elbow_threshold: float = 0.8
    score_floor: float | None = None

    def to_dict(self) -> dict:
        return {
            "dense_pool": self.dense_pool,
            "keep_after_fusion": self.keep_after_fusion,
            "rrf_k": self.rrf_k,
            "lambda_mmr": self.lambda_mmr,
            "post_weights": [self.w_fused, self.w_summary, self.w_keyword],
            "elbow_threshold": self.elbow_threshold,
            "score_floor": self.score_floor,
        }


@dataclass
class RankedCandidate:
    chunk_id: str
    position: int  # corpus position, the deterministic tie-break
    dense_rank: int | None = None
    sparse_rank: int | None = None
    rrf_score: float = 0.0
    mmr_selected: bool = False
    post_score: float = 0.0
    rerank_score: float = 0.0
    final_rank: int | None = None

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "position": self.position,
            "dense_rank": self.dense_rank,
            "sparse_rank": self.sparse_rank,
            "rrf_score": self.rrf_score,
            "mmr_selected": self.mmr_selected,
            "post_score": self.post_score,
            "rerank_score": self.rerank_score,
            "final_rank": self.final_rank,
        }


# --- stage primitives -------------------------------------------------------

def rrf_fuse(
    ranked_lists: list[list[str]],
    rrf_k: int,
    position_of,
) -> list[tuple[str, float]]:
    """Fuse ranked id lists by summing 1/(k + rank); descending, position tie-break."""
    scores: dict[str, float] = {}
    for ranked in ranked_lists:
        for rank, cid in enumerate(ranked, start=1):
            scores[cid] = scores.get(cid, 0.0) + 1.0 / (rrf_k + rank)
    return sorted(scores.items(), key=lambda t: (-t[1], position_of(t[0])))


def mmr_select(
    candidate_vectors: np.ndarray,
    query_vector: np.ndarray,
    lambda_mmr: float,
    m: int,
) -> list[int]:
    """Greedy MMR over unit vectors; returns selected indices in pick order.

    First pick is the most query-similar candidate; each later pick maximizes
    lambda * cos(q, c) - (1 - lambda) * max_s cos(c, s) over the selected set.
    Ties resolve to the earliest candidate index.
    """
    n = candidate_vectors.shape[0]
    if n == 0:
        return []
    m = min(m, n)
    relevance = candidate_vectors @ query_vector
    selected: list[int] = []
    remaining = list(range(n))
    max_sim_to_selected = np.full(n, -np.inf)

    first = int(np.argmax(relevance))
    selected.append(first)
    remaining.remove(first)
    while remaining and len(selected) < m:
        sims = candidate_vectors[remaining] @ candidate_vectors[selected[-1]]
        for j, idx in enumerate(remaining):
            prev = max_sim_to_selected[idx]
            max_sim_to_selected[idx] = sims[j] if prev == -np.inf else max(prev, sims[j])
        mmr = [
            lambda_mmr * relevance[idx]
            - (1.0 - lambda_mmr) * max_sim_to_selected[idx]
            for idx in remaining
        ]
        best = int(np.argmax(mmr))
        selected.append(remaining.pop(best))
    return selected


def keyword_boost(query: str, keywords: list[str] | tuple[str, ...]) -> int:
    """Count of keywords appearing as substrings of the lowercased query."""
    q = query.lower()
    return sum(1 for kw in set(keywords) if kw in q)


def elbow_filter(scores: list[float], threshold: float) -> int:
    """Length of the kept prefix: cut at the first drop s_i - s_{i+1} > threshold."""
    if not scores:
        return 0
    for i in range(len(scores) - 1):
        if scores[i] - scores[i + 1] > threshold:
            return i + 1
    return len(scores)


def normalize_and_floor(
    scores: list[float], floor: float | None
) -> tuple[list[float], list[int]]:
    """Min-max normalize to [0,1] and drop entries below the floor.

    Degenerate min == max maps every score to 1.0. A disabled floor (None)
    keeps everything. Returns (normalized scores, kept indices).
    """
    if not scores:
        return [], []
    lo, hi = min(scores), max(scores)
    if hi == lo:
        normalized = [1.0] * len(scores)
    else:
        normalized = [(s - lo) / (hi - lo) for s in scores]
    if floor is None:
        return normalized, list(range(len(scores)))
    kept = [i for i, s in enumerate(normalized) if s >= floor]
    return [normalized[i] for i in kept], kept


# --- the per-query pipeline --------------------------------------------------

@dataclass
class RetrievalTrace:
    """All fused candidates (in final score order) plus the kept prefix."""

    candidates: list[RankedCandidate] = field(default_factory=list)
    kept: list[RankedCandidate] = field(default_factory=list)


class Retriever:
    """Runs the full ranking pipeline over one corpus + index pair.

    Owns the read-mostly caches: summary embeddings and per-document token
    embeddings for the MaxSim reranker, both keyed by chunk id.
    """

    def __init__(
        self,
        corpus: Corpus,
        dense_index: dense_mod.DenseIndex,
        sparse_index: sparse_mod.SparseIndex,
        encoder: Encoder,
        config: PipelineConfig | None = None,
    ):
        self.corpus = corpus
        self.dense_index = dense_index
        self.sparse_index = sparse_index
        self.encoder = encoder
        self.config = config or PipelineConfig()
        self._summary_cache: dict[str, np.ndarray | None] = {}
        self._doc_token_cache: dict[str, np.ndarray] = {}
        self._dense_positions = {cid: i for i, cid in enumerate(dense_index.id_map)}

    # -- per-field helpers

    def _summary_embedding(self, chunk: Chunk) -> np.ndarray | None:
        if chunk.chunk_id not in self._summary_cache:
            self._summary_cache[chunk.chunk_id] = encode_normalized(
                self.encoder, chunk.chunk_summary
            )
        return self._summary_cache[chunk.chunk_id]

    def _token_matrix(self, text: str) -> np.ndarray:
        """Unit-norm embeddings of distinct tokens (zero-embedding tokens skipped)."""
        rows: list[np.ndarray] = []
        seen: set[bytes] = set()
        for token in tokenize(text):
            vec = self.encoder.encode(token)
            if not np.any(vec):
                continue
            unit = l2_normalize(vec)
            key = unit.tobytes()
            if key in seen:
                continue
            seen.add(key)
            rows.append(unit)
        if not rows:
            return np.zeros((0, self.encoder.dimension), dtype=np.float32)
        return np.stack(rows)

    def _doc_tokens(self, chunk: Chunk) -> np.ndarray:
        if chunk.chunk_id not in self._doc_token_cache:
            self._doc_token_cache[chunk.chunk_id] = self._token_matrix(chunk.chunk_text)
        return self._doc_token_cache[chunk.chunk_id]

    def maxsim_score(self, query: str, chunk: Chunk) -> float:
        """Sum over distinct query tokens of the max cosine to any document token."""
        q_tokens = self._token_matrix(query)
        d_tokens = self._doc_tokens(chunk)
        if q_tokens.shape[0] == 0 or d_tokens.shape[0] == 0:
            return 0.0
        return float((q_tokens @ d_tokens.T).max(axis=1).sum())

    def post_score_value(
        self,
        fused_norm: float,
        query: str,
        query_vector: np.ndarray | None,
        chunk: Chunk,
    ) -> float:
        cfg = self.config
        summary_cos = 0.0
        if query_vector is not None:
            emb = self._summary_embedding(chunk)
            if emb is not None:
                summary_cos = float(emb @ query_vector)
        boost = keyword_boost(query, chunk.chunk_keywords)
        return cfg.w_fused * fused_norm + cfg.w_summary * summary_cos + cfg.w_keyword * boost

    # -- orchestration

    def retrieve(self, query: str) -> RetrievalTrace:
        """Full pipeline; kept candidates get final ranks assigned.

        Candidates cut by the elbow or floor keep their stage scores but get
        final_rank None, so audit records still show the full trajectory.
        """
        cfg = self.config
        query_vector = encode_normalized(self.encoder, query)

        # dense pool + MMR diversification (sparse-only fallback on zero query)
        dense_ids: list[str] = []
        if query_vector is not None:
            hits = dense_mod.search(self.dense_index, query_vector, cfg.dense_pool)
            pool_vectors = self.dense_index.vectors[
                [self._dense_positions[h.chunk_id] for h in hits]
            ]
            order = mmr_select(pool_vectors, query_vector, cfg.lambda_mmr, len(hits))
            dense_ids = [hits[i].chunk_id for i in order]

        sparse_hits = sparse_mod.search(query, cfg.dense_pool, self.sparse_index)
        sparse_ids = [cid for cid, _ in sparse_hits]

        fused = rrf_fuse([dense_ids, sparse_ids], cfg.rrf_k, self.corpus.position_of)
        fused = fused[: cfg.keep_after_fusion]
        if not fused:
            return RetrievalTrace()

        dense_rank = {cid: r for r, cid in enumerate(dense_ids, start=1)}
        sparse_rank = {cid: r for r, cid in enumerate(sparse_ids, start=1)}
        candidates = [
            RankedCandidate(
                chunk_id=cid,
                position=self.corpus.position_of(cid),
                dense_rank=dense_rank.get(cid),
                sparse_rank=sparse_rank.get(cid),
                rrf_score=score,
                mmr_selected=cid in dense_rank,
            )
            for cid, score in fused
        ]

        # field-aware post-scoring on min-max-normalized fused scores
        fused_norm, _ = normalize_and_floor([c.rrf_score for c in candidates], None)
        for cand, norm in zip(candidates, fused_norm):
            chunk = self.corpus.get(cand.chunk_id)
            cand.post_score = self.post_score_value(norm, query, query_vector, chunk)
        candidates.sort(key=lambda c: (-c.post_score, c.position))

        # late-interaction rerank
        for cand in candidates:
            cand.rerank_score = self.maxsim_score(query, self.corpus.get(cand.chunk_id))
        candidates.sort(key=lambda c: (-c.rerank_score, c.position))

        # elbow filtering on the scores entering the filter (rerank scores)
        keep = elbow_filter([c.rerank_score for c in candidates], cfg.elbow_threshold)
        kept = candidates[:keep]

        if cfg.score_floor is not None and kept:
            _, kept_idx = normalize_and_floor(
                [c.rerank_score for c in kept], cfg.score_floor
            )
            kept = [kept[i] for i in kept_idx]

        for rank, cand in enumerate(kept, start=1):
            cand.final_rank = rank
        return RetrievalTrace(candidates=candidates, kept=kept)
