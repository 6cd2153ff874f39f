import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reground import dense, sparse
from reground.corpus import load_corpus
from reground.embedding import HashedBowEncoder, encode_normalized
from reground.engine import embed_corpus
from reground.pipeline import (
    PipelineConfig,
    Retriever,
    elbow_filter,
    keyword_boost,
    mmr_select,
    normalize_and_floor,
    rrf_fuse,
)


def unit_rows(n, d, seed=0):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, d)).astype(np.float32)
    return m / np.linalg.norm(m, axis=1, keepdims=True)


# --- RRF ---------------------------------------------------------------------

def test_rrf_agreement_beats_single_list():
    fused = rrf_fuse([["A"], ["A", "B"]], 60, {"A": 0, "B": 1}.get)
    scores = dict(fused)
    assert scores["A"] == pytest.approx(2 / 61)
    assert scores["B"] == pytest.approx(1 / 62)
    assert fused[0][0] == "A"


def test_rrf_single_list_rank1():
    fused = rrf_fuse([["B"], []], 60, {"B": 0}.get)
    assert dict(fused)["B"] == pytest.approx(1 / 61)


def test_rrf_reversed_lists_hand_eval():
    positions = {"A": 0, "B": 1, "C": 2}
    fused = rrf_fuse([["A", "B", "C"], ["C", "B", "A"]], 60, positions.get)
    scores = dict(fused)
    assert scores["A"] == pytest.approx(1 / 61 + 1 / 63)
    assert scores["B"] == pytest.approx(2 / 62)
    assert scores["C"] == pytest.approx(1 / 63 + 1 / 61)
    # A and C tie exactly; B's score is lower; position breaks the A/C tie
    assert [cid for cid, _ in fused] == ["A", "C", "B"]


def test_rrf_empty():
    assert rrf_fuse([[], []], 60, lambda c: 0) == []


def brute_force_rrf(lists, k, positions):
    scores = {}
    for lst in lists:
        for rank, cid in enumerate(lst, 1):
            scores[cid] = scores.get(cid, 0.0) + 1.0 / (k + rank)
    return sorted(scores, key=lambda c: (-scores[c], positions[c]))


def test_rrf_random_pairs_match_brute_force():
    rng = np.random.default_rng(11)
    ids = [f"c{i}" for i in range(30)]
    positions = {c: i for i, c in enumerate(ids)}
    for _ in range(50):
        a = list(rng.permutation(ids))[: rng.integers(0, 30)]
        b = list(rng.permutation(ids))[: rng.integers(0, 30)]
        fused = [cid for cid, _ in rrf_fuse([a, b], 60, positions.get)]
        assert fused == brute_force_rrf([a, b], 60, positions)


# --- MMR ---------------------------------------------------------------------

def brute_force_mmr(vectors, q, lam, m):
    n = len(vectors)
    rel = vectors @ q
    selected, remaining = [], list(range(n))
    while remaining and len(selected) < m:
        best, best_score = None, None
        for idx in remaining:
            if selected:
                red = max(float(vectors[idx] @ vectors[s]) for s in selected)
                score = lam * rel[idx] - (1 - lam) * red
            else:
                score = rel[idx] if lam == 1.0 else None
                score = rel[idx]
            if best_score is None or score > best_score:
                best, best_score = idx, score
        selected.append(best)
        remaining.remove(best)
    return selected


def test_mmr_lambda_one_is_relevance_order():
    v = unit_rows(8, 6, seed=1)
    q = unit_rows(1, 6, seed=2)[0]
    order = mmr_select(v, q, 1.0, 8)
    rel = v @ q
    assert order == sorted(range(8), key=lambda i: (-rel[i], i))


def test_mmr_duplicate_selected_last():
    q = np.array([1.0, 0.0, 0.0], dtype=np.float32)
    a = np.array([0.9, 0.4358899, 0.0], dtype=np.float32)
    vectors = np.stack([a, a, np.array([0.9, 0.0, 0.4358899], dtype=np.float32)])
    vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    order = mmr_select(vectors, q, 0.6, 3)
    assert order == brute_force_mmr(vectors, q, 0.6, 3)
    assert order[0] == 0 and order[1] == 2 and order[2] == 1


def test_mmr_matches_brute_force_random():
    for seed in range(10):
        v = unit_rows(12, 8, seed=seed)
        q = unit_rows(1, 8, seed=100 + seed)[0]
        assert mmr_select(v, q, 0.6, 12) == brute_force_mmr(v, q, 0.6, 12)


def test_mmr_exhaustion_and_uniqueness():
    v = unit_rows(5, 4, seed=3)
    q = unit_rows(1, 4, seed=4)[0]
    order = mmr_select(v, q, 0.6, 50)
    assert sorted(order) == list(range(5))


# --- keyword boost -------------------------------------------------------------

def test_keyword_boost_examples():
    assert keyword_boost("ground risk buffer", ["ground risk", "buffer"]) == 2
    assert keyword_boost("totally unrelated", ["buffer"]) == 0
    assert keyword_boost("many risks exist", ["risk"]) == 1  # substring semantics


# --- elbow filter ----------------------------------------------------------------

def reference_elbow(scores, threshold):
    for i in range(len(scores) - 1):
        if scores[i] - scores[i + 1] > threshold:
            return i + 1
    return len(scores)


def test_elbow_examples():
    assert elbow_filter([0.95, 0.90, 0.05], 0.8) == 2
    assert elbow_filter([0.5, 0.5, 0.5], 0.8) == 3
    assert elbow_filter([0.7], 0.8) == 1
    assert elbow_filter([], 0.8) == 0


@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=30))
def test_elbow_matches_reference(values):
    scores = sorted(values, reverse=True)
    assert elbow_filter(scores, 0.8) == reference_elbow(scores, 0.8)
    assert 0 <= elbow_filter(scores, 0.8) <= len(scores)


@given(
    st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=20),
    st.floats(0, 5),
    st.floats(0, 5),
)
def test_elbow_kept_length_non_decreasing_in_threshold(values, t1, t2):
    scores = sorted(values, reverse=True)
    lo, hi = min(t1, t2), max(t1, t2)
    assert elbow_filter(scores, hi) >= elbow_filter(scores, lo)


# --- normalize and floor --------------------------------------------------------

def test_normalize_and_floor_examples():
    normed, kept = normalize_and_floor([2.0, 1.0, 0.0], 0.25)
    assert normed == [1.0, 0.5] and kept == [0, 1]
    normed, kept = normalize_and_floor([2.0, 1.0, 0.0], None)
    assert normed == [1.0, 0.5, 0.0] and kept == [0, 1, 2]
    normed, kept = normalize_and_floor([3.0, 3.0], 0.9)
    assert normed == [1.0, 1.0] and kept == [0, 1]
    normed, kept = normalize_and_floor([7.0], 0.5)
    assert normed == [1.0]


# --- integrated retriever -------------------------------------------------------

@pytest.fixture
def retriever(corpus_file):
    corpus = load_corpus(corpus_file)
    encoder = HashedBowEncoder(dimension=384)
    vectors, ids = embed_corpus(corpus, encoder)
    dindex = dense.build(vectors, ids, encoder_name=encoder.name)
    from reground.corpus import build_retrieval_string

    sindex = sparse.build(
        [build_retrieval_string(c) for c in corpus.chunks],
        [c.chunk_id for c in corpus.chunks],
    )
    return Retriever(corpus, dindex, sindex, encoder, PipelineConfig())


def test_retriever_finds_title_match(retriever):
    trace = retriever.retrieve("What is the ground risk buffer?")
    assert trace.kept
    assert trace.kept[0].chunk_id == "art-1"
    assert trace.kept[0].final_rank == 1


def test_retriever_deterministic(retriever):
    a = retriever.retrieve("operational volume containment")
    b = retriever.retrieve("operational volume containment")
    assert [c.to_dict() for c in a.kept] == [c.to_dict() for c in b.kept]


def test_retriever_empty_for_tokenless_query(retriever):
    # no word tokens: zero query embedding, sparse-only fallback finds nothing
    trace = retriever.retrieve("???")
    assert trace.kept == []


def test_retriever_unknown_terms_still_return_dense_candidates(retriever):
    # dense retrieval always proposes a pool; scores just stay near zero
    trace = retriever.retrieve("zzzz qqqq xxxxx")
    assert all(c.rerank_score == 0.0 for c in trace.candidates)


def test_post_score_degenerate_weights(corpus_file):
    corpus = load_corpus(corpus_file)
    encoder = HashedBowEncoder(dimension=384)
    vectors, ids = embed_corpus(corpus, encoder)
    dindex = dense.build(vectors, ids, encoder_name=encoder.name)
    from reground.corpus import build_retrieval_string

    sindex = sparse.build(
        [build_retrieval_string(c) for c in corpus.chunks],
        [c.chunk_id for c in corpus.chunks],
    )
    # pure fused weight: post-score order equals fused order
    cfg = PipelineConfig(w_fused=1.0, w_summary=0.0, w_keyword=0.0,
                         elbow_threshold=1e9)
    r = Retriever(corpus, dindex, sindex, encoder, cfg)
    trace = r.retrieve("ground risk buffer")
    fused_order = sorted(trace.candidates, key=lambda c: (-c.rrf_score, c.position))
    post_order = sorted(trace.candidates, key=lambda c: (-c.post_score, c.position))
    assert [c.chunk_id for c in fused_order] == [c.chunk_id for c in post_order]


def test_post_score_summary_match_wins(corpus_file):
    corpus = load_corpus(corpus_file)
    encoder = HashedBowEncoder(dimension=384)
    vectors, ids = embed_corpus(corpus, encoder)
    dindex = dense.build(vectors, ids, encoder_name=encoder.name)
    from reground.corpus import build_retrieval_string

    sindex = sparse.build(
        [build_retrieval_string(c) for c in corpus.chunks],
        [c.chunk_id for c in corpus.chunks],
    )
    cfg = PipelineConfig(w_fused=0.0, w_summary=1.0, w_keyword=0.0,
                         elbow_threshold=1e9)
    r = Retriever(corpus, dindex, sindex, encoder, cfg)
    # query equal to a chunk's summary text: cosine 1 with the reference encoder
    target = corpus.get("gm-1")
    trace = r.retrieve(target.chunk_summary)
    best = max(trace.candidates, key=lambda c: c.post_score)
    assert best.chunk_id == "gm-1"
    assert best.post_score == pytest.approx(1.0, abs=1e-5)


def test_post_score_blend_matches_oracle(retriever):
    query = "operational volume ground risk"
    trace = retriever.retrieve(query)
    cands = trace.candidates
    q_vec = encode_normalized(retriever.encoder, query)
    rrf_scores = [c.rrf_score for c in cands]
    lo, hi = min(rrf_scores), max(rrf_scores)
    for cand in cands:
        chunk = retriever.corpus.get(cand.chunk_id)
        fused_norm = 1.0 if hi == lo else (cand.rrf_score - lo) / (hi - lo)
        emb = encode_normalized(retriever.encoder, chunk.chunk_summary)
        cos = float(emb @ q_vec) if emb is not None else 0.0
        boost = sum(1 for kw in set(chunk.chunk_keywords) if kw in query.lower())
        expected = 0.5 * fused_norm + 0.4 * cos + 0.1 * boost
        assert cand.post_score == pytest.approx(expected, abs=1e-9)


def test_maxsim_verbatim_and_disjoint(retriever):
    chunk = retriever.corpus.get("art-1")
    # every query token appears verbatim: each MaxSim term is 1
    score = retriever.maxsim_score("ground risk buffer", chunk)
    assert score == pytest.approx(3.0, abs=1e-5)
    assert retriever.maxsim_score("zzzz qqqq", chunk) == 0.0
    # duplicate query tokens collapse to one bucket
    assert retriever.maxsim_score("risk risk", chunk) == pytest.approx(1.0, abs=1e-5)


def test_maxsim_order_matches_token_pair_oracle(retriever):
    query = "containment populated volume"
    q_tokens = retriever._token_matrix(query)
    scored = []
    for cid in ("art-1", "amc-1", "art-2"):
        chunk = retriever.corpus.get(cid)
        d_tokens = retriever._token_matrix(chunk.chunk_text)
        total = 0.0
        for qt in q_tokens:
            total += max(float(qt @ dt) for dt in d_tokens)
        scored.append((cid, total))
        assert retriever.maxsim_score(query, chunk) == pytest.approx(total, abs=1e-6)
    oracle_order = [c for c, _ in sorted(scored, key=lambda t: -t[1])]
    got = sorted(scored, key=lambda t: -retriever.maxsim_score(query,
                 retriever.corpus.get(t[0])))
    assert [c for c, _ in got] == oracle_order
