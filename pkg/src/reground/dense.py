"""Dense maximum-inner-product search over unit-norm chunk embeddings.

Two backends: a flat exact scan (the deterministic baseline used for all
acceptance runs) and an HNSW proximity graph with explicit construction and
query-time exploration budgets. Vectors are unit-norm, so inner product is
cosine similarity and scores live in [-1, 1]. Ties break toward the lower
corpus position for auditability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import NORM_TOLERANCE
from .errors import (
    DimensionMismatchError,
    EmptyIndexError,
    IndexCorruptError,
    UnnormalizedVectorError,
)

DEFAULT_HNSW_PARAMS = {"M": 32, "ef_construction": 200, "ef_search": 128}
DEFAULT_SEED = 7


@dataclass(frozen=True)
class DenseHit:
    chunk_id: str
    score: float
    rank: int  # 1-based


@dataclass
class DenseIndex:
    backend: str  # "flat_exact" | "hnsw"
    vectors: np.ndarray  # N x d, float32, unit-norm rows
    id_map: tuple[str, ...]
    encoder_name: str
    seed: int = DEFAULT_SEED
    hnsw_params: dict = field(default_factory=lambda: dict(DEFAULT_HNSW_PARAMS))
    _graph: "_HnswGraph | None" = None

    @property
    def size(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])


def _validate_vectors(vectors: np.ndarray) -> np.ndarray:
    if vectors.ndim != 2 or vectors.shape[0] < 1:
        raise DimensionMismatchError("need a non-empty N x d matrix")
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    norms = np.linalg.norm(vectors, axis=1)
    bad = np.where(np.abs(norms - 1.0) > NORM_TOLERANCE * 10)[0]
    if bad.size:
        raise UnnormalizedVectorError(int(bad[0]))
    return vectors


def build(
    vectors: np.ndarray,
    id_map: list[str] | tuple[str, ...],
    backend: str = "flat_exact",
    encoder_name: str = "hashed-bow",
    hnsw_params: dict | None = None,
    seed: int = DEFAULT_SEED,
) -> DenseIndex:
    vectors = _validate_vectors(vectors)
    if len(id_map) != vectors.shape[0]:
        raise DimensionMismatchError("id_map length must equal vector count")
    params = dict(DEFAULT_HNSW_PARAMS)
    if hnsw_params:
        params.update(hnsw_params)
    index = DenseIndex(
        backend=backend,
        vectors=vectors,
        id_map=tuple(id_map),
        encoder_name=encoder_name,
        seed=seed,
        hnsw_params=params,
    )
    if backend == "hnsw":
        graph = _HnswGraph(params["M"], params["ef_construction"], seed)
        graph.build(vectors)
        index._graph = graph
    elif backend != "flat_exact":
        raise ValueError(f"unknown dense backend: {backend!r}")
    return index


def _top_k_by_score(scores: np.ndarray, positions: np.ndarray, k: int) -> list[tuple[int, float]]:
    # sort by score descending, position ascending
    order = np.lexsort((positions, -scores))
    return [(int(positions[i]), float(scores[i])) for i in order[:k]]


def search(index: DenseIndex, query: np.ndarray, k: int) -> list[DenseHit]:
    """Top-k hits by inner product; flat is exact, hnsw approximate."""
    if index.size == 0:
        raise EmptyIndexError("dense index is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query, dtype=np.float32)
    if q.shape != (index.dimension,):
        raise DimensionMismatchError(
            f"query dimension {q.shape} != index dimension {index.dimension}"
        )

    if index.backend == "flat_exact" or index._graph is None:
        scores = index.vectors @ q
        pairs = _top_k_by_score(scores, np.arange(index.size), min(k, index.size))
    else:
        ef = max(index.hnsw_params["ef_search"], k)
        candidates = index._graph.search(index.vectors, q, ef)
        positions = np.fromiter(candidates, dtype=np.int64)
        scores = index.vectors[positions] @ q
        pairs = _top_k_by_score(scores, positions, min(k, len(candidates)))

    return [
        DenseHit(chunk_id=index.id_map[pos], score=score, rank=r + 1)
        for r, (pos, score) in enumerate(pairs)
    ]


class _HnswGraph:
    """Layered navigable small-world graph over unit vectors (inner product)."""

    def __init__(self, m: int, ef_construction: int, seed: int):
        self.m = m
        self.m0 = 2 * m
        self.ef_construction = ef_construction
        self.seed = seed
        self.ml = 1.0 / math.log(m)
        self.levels: list[int] = []
        # neighbors[layer][node] -> list of node ids
        self.neighbors: list[dict[int, list[int]]] = []
        self.entry_point: int = -1

    def _ensure_layers(self, level: int) -> None:
        while len(self.neighbors) <= level:
            self.neighbors.append({})

    def _search_layer(
        self, vectors: np.ndarray, q: np.ndarray, entry: list[int], ef: int, layer: int
    ) -> list[tuple[float, int]]:
        """Best-first exploration; returns up to ef (sim, node) pairs, best first."""
        import heapq

        visited = set(entry)
        sims = vectors[np.asarray(entry)] @ q
        # candidates: max-heap via negated sim; results: min-heap of sims
        candidates = [(-float(s), n) for s, n in zip(sims, entry)]
        heapq.heapify(candidates)
        results = [(float(s), n) for s, n in zip(sims, entry)]
        heapq.heapify(results)
        while len(results) > ef:
            heapq.heappop(results)

        adjacency = self.neighbors[layer]
        while candidates:
            neg_sim, node = heapq.heappop(candidates)
            if results and -neg_sim < results[0][0] and len(results) >= ef:
                break
            fresh = [n for n in adjacency.get(node, ()) if n not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            fresh_sims = vectors[np.asarray(fresh)] @ q
            for s, n in zip(fresh_sims, fresh):
                s = float(s)
                if len(results) < ef or s > results[0][0]:
                    heapq.heappush(candidates, (-s, n))
                    heapq.heappush(results, (s, n))
                    if len(results) > ef:
                        heapq.heappop(results)
        return sorted(results, key=lambda t: -t[0])

    def _select_neighbors(self, pool: list[tuple[float, int]], m: int) -> list[int]:
        return [n for _, n in sorted(pool, key=lambda t: -t[0])[:m]]

    def _link(self, vectors: np.ndarray, node: int, picked: list[int], layer: int) -> None:
        adjacency = self.neighbors[layer]
        cap = self.m0 if layer == 0 else self.m
        adjacency[node] = list(picked)
        for other in picked:
            links = adjacency.setdefault(other, [])
            links.append(node)
            if len(links) > cap:
                sims = vectors[np.asarray(links)] @ vectors[other]
                keep = np.argsort(-sims)[:cap]
                adjacency[other] = [links[i] for i in keep]

    def build(self, vectors: np.ndarray) -> None:
        rng = np.random.default_rng(self.seed)
        n = vectors.shape[0]
        self.levels = []
        for i in range(n):
            level = int(-math.log(rng.random()) * self.ml)
            self.levels.append(level)
            self._ensure_layers(level)
            self._insert(vectors, i, level)

    def _insert(self, vectors: np.ndarray, node: int, level: int) -> None:
        if self.entry_point < 0:
            self.entry_point = node
            for layer in range(level + 1):
                self.neighbors[layer][node] = []
            return

        q = vectors[node]
        top = self.levels[self.entry_point]
        entry = [self.entry_point]
        for layer in range(top, level, -1):
            if layer < len(self.neighbors):
                best = self._search_layer(vectors, q, entry, 1, layer)
                entry = [best[0][1]]
        for layer in range(min(level, top), -1, -1):
            pool = self._search_layer(vectors, q, entry, self.ef_construction, layer)
            m = self.m0 if layer == 0 else self.m
            picked = self._select_neighbors(pool, m)
            self._link(vectors, node, picked, layer)
            entry = [n for _, n in pool]
        if level > top:
            self.entry_point = node
            for layer in range(top + 1, level + 1):
                self.neighbors[layer].setdefault(node, [])

    def search(self, vectors: np.ndarray, q: np.ndarray, ef: int) -> list[int]:
        entry = [self.entry_point]
        top = self.levels[self.entry_point]
        for layer in range(top, 0, -1):
            best = self._search_layer(vectors, q, entry, 1, layer)
            entry = [best[0][1]]
        pool = self._search_layer(vectors, q, entry, ef, 0)
        return [n for _, n in pool]

    def to_json(self) -> str:
        return json.dumps(
            {
                "levels": self.levels,
                "entry_point": self.entry_point,
                "neighbors": [
                    {str(k): v for k, v in layer.items()} for layer in self.neighbors
                ],
            }
        )

    @classmethod
    def from_json(cls, payload: str, m: int, ef_construction: int, seed: int) -> "_HnswGraph":
        data = json.loads(payload)
        graph = cls(m, ef_construction, seed)
        graph.levels = list(data["levels"])
        graph.entry_point = int(data["entry_point"])
        graph.neighbors = [
            {int(k): list(v) for k, v in layer.items()} for layer in data["neighbors"]
        ]
        return graph


_MAGIC = b"RGDI1\n"


def _write_block(fh, payload: bytes) -> None:
    fh.write(len(payload).to_bytes(8, "little"))
    fh.write(payload)


def _read_block(fh) -> bytes:
    length = int.from_bytes(fh.read(8), "little")
    return fh.read(length)


def save(index: DenseIndex, path: str | Path) -> None:
    """Persist header + vectors + id_map (+ graph for hnsw).

    The format is fully deterministic (no timestamps, sorted headers), so
    rebuilding an unchanged flat index reproduces the file byte for byte.
    """
    header = {
        "backend": index.backend,
        "dimension": index.dimension,
        "n": index.size,
        "encoder_name": index.encoder_name,
        "seed": index.seed,
        "hnsw_params": index.hnsw_params,
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        _write_block(fh, json.dumps(header, sort_keys=True).encode("utf-8"))
        _write_block(fh, np.ascontiguousarray(index.vectors, dtype="<f4").tobytes())
        _write_block(fh, json.dumps(list(index.id_map)).encode("utf-8"))
        if index._graph is not None:
            _write_block(fh, index._graph.to_json().encode("utf-8"))


def load(path: str | Path) -> DenseIndex:
    try:
        with open(path, "rb") as fh:
            if fh.read(len(_MAGIC)) != _MAGIC:
                raise ValueError("bad magic")
            header = json.loads(_read_block(fh).decode("utf-8"))
            raw = _read_block(fh)
            vectors = np.frombuffer(raw, dtype="<f4").reshape(
                header["n"], header["dimension"]
            ).copy()
            id_map = tuple(json.loads(_read_block(fh).decode("utf-8")))
            graph_payload = None
            if header["backend"] == "hnsw":
                graph_payload = _read_block(fh).decode("utf-8")
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise IndexCorruptError(f"cannot read dense index {path}: {exc}") from exc
    index = DenseIndex(
        backend=header["backend"],
        vectors=vectors,
        id_map=id_map,
        encoder_name=header["encoder_name"],
        seed=header["seed"],
        hnsw_params=header["hnsw_params"],
    )
    if graph_payload is not None:
        index._graph = _HnswGraph.from_json(
            graph_payload,
            header["hnsw_params"]["M"],
            header["hnsw_params"]["ef_construction"],
            header["seed"],
        )
    return index
