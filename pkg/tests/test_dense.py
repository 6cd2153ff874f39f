import numpy as np
import pytest

from reground import dense
from reground.errors import DimensionMismatchError, UnnormalizedVectorError


def unit_rows(n, d, seed=0):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, d)).astype(np.float32)
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def brute_force(vectors, q, k):
    scores = vectors @ q
    order = np.lexsort((np.arange(len(scores)), -scores))
    return [(int(i), float(scores[i])) for i in order[:k]]


def test_build_flat():
    v = unit_rows(3, 8)
    index = dense.build(v, ["a", "b", "c"])
    assert index.size == 3 and index.backend == "flat_exact"


def test_unnormalized_rejected():
    v = unit_rows(3, 8)
    v[1] *= 2.0
    with pytest.raises(UnnormalizedVectorError) as err:
        dense.build(v, ["a", "b", "c"])
    assert err.value.position == 1


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        dense.build(unit_rows(3, 8), ["a", "b"])


def test_self_similarity():
    v = unit_rows(5, 16)
    index = dense.build(v, [f"c{i}" for i in range(5)])
    hits = dense.search(index, v[3], k=1)
    assert hits[0].chunk_id == "c3"
    assert hits[0].score == pytest.approx(1.0, abs=1e-6)


def test_orthogonal_ties_break_by_position():
    v = np.eye(4, dtype=np.float32)
    index = dense.build(v[:3], ["c0", "c1", "c2"])
    hits = dense.search(index, v[3], k=3)
    assert [h.chunk_id for h in hits] == ["c0", "c1", "c2"]
    assert all(h.score == pytest.approx(0.0) for h in hits)


def test_flat_matches_brute_force():
    v = unit_rows(200, 16, seed=1)
    index = dense.build(v, [f"c{i}" for i in range(200)])
    for seed in range(5):
        q = unit_rows(1, 16, seed=100 + seed)[0]
        hits = dense.search(index, q, k=10)
        expected = brute_force(v, q, 10)
        assert [(index.id_map.index(h.chunk_id), h.score) for h in hits] == expected


def test_scores_non_increasing_and_full_coverage():
    v = unit_rows(30, 8, seed=2)
    index = dense.build(v, [f"c{i}" for i in range(30)])
    hits = dense.search(index, unit_rows(1, 8, seed=3)[0], k=100)
    assert len(hits) == 30
    scores = [h.score for h in hits]
    assert scores == sorted(scores, reverse=True)
    assert len({h.chunk_id for h in hits}) == 30
    assert [h.rank for h in hits] == list(range(1, 31))


def test_flat_persistence_round_trip(tmp_path):
    v = unit_rows(20, 8, seed=4)
    index = dense.build(v, [f"c{i}" for i in range(20)])
    path = tmp_path / "flat.idx"
    dense.save(index, path)
    first = path.read_bytes()
    dense.save(index, path)
    assert path.read_bytes() == first  # deterministic bytes
    loaded = dense.load(path)
    assert np.array_equal(loaded.vectors, index.vectors)
    assert loaded.id_map == index.id_map


def test_hnsw_round_trip_and_search(tmp_path):
    v = unit_rows(200, 16, seed=5)
    index = dense.build(v, [f"c{i}" for i in range(200)], backend="hnsw")
    path = tmp_path / "hnsw.idx"
    dense.save(index, path)
    loaded = dense.load(path)
    q = unit_rows(1, 16, seed=6)[0]
    a = [h.chunk_id for h in dense.search(index, q, 5)]
    b = [h.chunk_id for h in dense.search(loaded, q, 5)]
    assert a == b


def test_hnsw_recall_small():
    v = unit_rows(400, 16, seed=7)
    ids = [f"c{i}" for i in range(400)]
    flat = dense.build(v, ids)
    hnsw = dense.build(v, ids, backend="hnsw")
    recalls = []
    for seed in range(20):
        q = unit_rows(1, 16, seed=1000 + seed)[0]
        truth = {h.chunk_id for h in dense.search(flat, q, 10)}
        got = {h.chunk_id for h in dense.search(hnsw, q, 10)}
        recalls.append(len(truth & got) / 10)
    assert sum(recalls) / len(recalls) >= 0.95
