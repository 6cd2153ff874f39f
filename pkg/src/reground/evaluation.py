"""Retrieval and assessment evaluation: Hit@m, MRR, grounding classification,
explanation similarity, and majority-vote accuracy.

Grounding support is an automated proxy for a manual sentence-level check:
a sentence counts as supported when it cites a marker that resolves to an
included chunk and shares enough content words with that chunk. Percentages
are reported to one decimal place.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations

from .context import ContextBundle
from .errors import (
    EmptySetError,
    FewerThanTwoError,
    LengthMismatchError,
    UnparsableCitationError,
)
from .sparse import tokenize

DEFAULT_OVERLAP_THRESHOLD = 0.5

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_CITATION_RE = re.compile(r"\[(\d+)\]")

# phrases the contract prompts use to flag evidence gaps
_GAP_PHRASES = (
    "not enough information",
    "insufficient",
    "information is missing",
    "cannot provide an answer",
    "cannot be determined",
)

VARIANTS = ("direct", "synonym", "reworked")


@dataclass(frozen=True)
class EvalQuery:
    query: str
    variant: str
    ground_truth_chunk_id: str


@dataclass(frozen=True)
class RetrievalOutcome:
    query: str
    ranked_ids: tuple[str, ...]
    rank_of_truth: int | None  # 1-based, None when absent
    variant: str = "direct"


def outcome_for(query: EvalQuery, ranked_ids: list[str]) -> RetrievalOutcome:
    rank = None
    if query.ground_truth_chunk_id in ranked_ids:
        rank = ranked_ids.index(query.ground_truth_chunk_id) + 1
    return RetrievalOutcome(
        query=query.query,
        ranked_ids=tuple(ranked_ids),
        rank_of_truth=rank,
        variant=query.variant,
    )


def hit_at_m(outcomes: list[RetrievalOutcome], m: int) -> float:
    if not outcomes:
        raise EmptySetError("no outcomes")
    hits = sum(1 for o in outcomes if o.rank_of_truth is not None and o.rank_of_truth <= m)
    return 100.0 * hits / len(outcomes)


def mrr(outcomes: list[RetrievalOutcome]) -> float:
    if not outcomes:
        raise EmptySetError("no outcomes")
    total = sum(1.0 / o.rank_of_truth for o in outcomes if o.rank_of_truth is not None)
    return total / len(outcomes)


# --- grounding -----------------------------------------------------------------

@dataclass(frozen=True)
class GroundingLabel:
    label: str  # grounded | unsupported | incomplete
    chunk_used: bool
    sentence_support: tuple[tuple[str, bool], ...]


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT_RE.split(text.strip()) if s]


def _overlap(sentence: str, chunk_text: str) -> float:
    s_tokens = set(tokenize(_CITATION_RE.sub("", sentence)))
    if not s_tokens:
        return 0.0
    c_tokens = set(tokenize(chunk_text))
    return len(s_tokens & c_tokens) / len(s_tokens)


def classify_grounding(
    answer: str,
    bundle: ContextBundle,
    citations: tuple[int, ...],
    truth_id: str | None = None,
    overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD,
    chunk_text_of=None,
) -> GroundingLabel:
    """Three-way label from a per-sentence support map.

    `chunk_text_of` maps a chunk index marker to its text; it must cover the
    included chunk indexes. A marker outside the included set raises
    UnparsableCitationError.
    """
    index_to_id = {src.chunk_index: src.chunk_id for src in bundle.sources}
    for marker in citations:
        if marker not in index_to_id:
            raise UnparsableCitationError(marker)

    sentences = split_sentences(answer)
    lowered = answer.lower()
    flags_gap = any(p in lowered for p in _GAP_PHRASES)

    support: list[tuple[str, bool]] = []
    for sentence in sentences:
        cited = [int(m) for m in _CITATION_RE.findall(sentence)]
        supported = False
        for marker in cited:
            if marker in index_to_id and chunk_text_of is not None:
                if _overlap(sentence, chunk_text_of(marker)) >= overlap_threshold:
                    supported = True
                    break
        support.append((sentence, supported))

    cited_ids = {index_to_id[m] for m in citations if m in index_to_id}
    used = truth_id is not None and (
        truth_id in cited_ids or truth_id in bundle.included_ids
    )

    if not sentences or flags_gap:
        label = "incomplete"
    elif all(s for _, s in support):
        label = "grounded"
    else:
        label = "unsupported"
    return GroundingLabel(label=label, chunk_used=used, sentence_support=tuple(support))


# --- consistency and accuracy -----------------------------------------------------

def explanation_similarity(texts: list[str]) -> float:
    """Mean pairwise token-set Jaccard, in percent."""
    if len(texts) < 2:
        raise FewerThanTwoError("need at least two texts")
    token_sets = [set(tokenize(t)) for t in texts]
    scores = []
    for a, b in combinations(token_sets, 2):
        if not a and not b:
            scores.append(1.0)
        else:
            scores.append(len(a & b) / len(a | b))
    return 100.0 * sum(scores) / len(scores)


def accuracy(predictions: list[str | None], truths: list[str]) -> float:
    """Exact-match percentage; inconclusive (None) predictions count as wrong."""
    if len(predictions) != len(truths):
        raise LengthMismatchError("predictions and truths must align")
    if not truths:
        raise EmptySetError("no cases")
    matches = sum(1 for p, t in zip(predictions, truths) if p == t)
    return 100.0 * matches / len(truths)


# --- report assembly ----------------------------------------------------------------

def retrieval_report(outcomes: list[RetrievalOutcome], cutoffs=(1, 3, 5, 10)) -> dict:
    """Per-variant and overall Hit@m / MRR, rounded to one decimal (MRR to 3)."""
    def _row(subset):
        return {
            **{f"hit@{m}": round(hit_at_m(subset, m), 1) for m in cutoffs},
            "mrr": round(mrr(subset), 3),
            "n": len(subset),
        }

    report = {"overall": _row(outcomes), "variants": {}}
    for variant in VARIANTS:
        subset = [o for o in outcomes if o.variant == variant]
        if subset:
            report["variants"][variant] = _row(subset)
    report["similarity_measure"] = "token-set jaccard"
    return report
