"""BM25 lexical retrieval over the same retrieval-string representation
used by the dense index.

Tokenization is intentionally plain: lowercase, maximal runs of word
characters, no stemming, no stopwords, so every lexical match stays directly
interpretable. IDF uses the +1-smoothed variant, which keeps scores
non-negative.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .errors import EmptyIndexError

_TOKEN_RE = re.compile(r"\w+")

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class SparseIndex:
    postings: dict[str, list[tuple[int, int]]]  # term -> [(position, tf)]
    doc_lengths: list[int]
    avg_len: float
    n_docs: int
    id_map: tuple[str, ...]
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    _doc_tfs: list[Counter] = field(default_factory=list, repr=False)


def build(documents: list[str], id_map: list[str] | tuple[str, ...],
          k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> SparseIndex:
    if len(documents) != len(id_map):
        raise ValueError("documents and id_map must align")
    doc_tfs = [Counter(tokenize(doc)) for doc in documents]
    doc_lengths = [sum(tf.values()) for tf in doc_tfs]
    postings: dict[str, list[tuple[int, int]]] = {}
    for pos, tf in enumerate(doc_tfs):
        for term, count in tf.items():
            postings.setdefault(term, []).append((pos, count))
    n = len(documents)
    avg_len = (sum(doc_lengths) / n) if n else 0.0
    return SparseIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_len=avg_len,
        n_docs=n,
        id_map=tuple(id_map),
        k1=k1,
        b=b,
        _doc_tfs=doc_tfs,
    )


def idf(index: SparseIndex, term: str) -> float:
    n_t = len(index.postings.get(term, ()))
    return math.log((index.n_docs - n_t + 0.5) / (n_t + 0.5) + 1.0)


def bm25_score(query_tokens: list[str], position: int, index: SparseIndex) -> float:
    """BM25 score of one document for the given query tokens."""
    tf = index._doc_tfs[position]
    dl = index.doc_lengths[position]
    norm = index.k1 * (1.0 - index.b + index.b * dl / index.avg_len) if index.avg_len else index.k1
    score = 0.0
    for term in query_tokens:
        f = tf.get(term, 0)
        if f == 0:
            continue
        score += idf(index, term) * (f * (index.k1 + 1.0)) / (f + norm)
    return score


def search(query: str, k: int, index: SparseIndex) -> list[tuple[str, float]]:
    """Documents with positive score, descending, position tie-break, at most k."""
    if index.n_docs == 0:
        raise EmptyIndexError("sparse index is empty")
    query_tokens = tokenize(query)
    touched: set[int] = set()
    for term in set(query_tokens):
        for pos, _ in index.postings.get(term, ()):
            touched.add(pos)
    scored = [(pos, bm25_score(query_tokens, pos, index)) for pos in touched]
    scored = [(pos, s) for pos, s in scored if s > 0.0]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return [(index.id_map[pos], s) for pos, s in scored[:k]]
