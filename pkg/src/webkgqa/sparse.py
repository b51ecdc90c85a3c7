"""In-memory inverted index with BM25 (Okapi) scoring.

Scoring follows the classic form: for each query term q with frequency f
in document C of length |C|,

    idf(q) * f * (k1 + 1) / (f + k1 * (1 - b + b * |C| / avg_dl))

with the non-negative idf variant ln((N - df + 0.5) / (df + 0.5) + 1).
Query terms are a multiset: repeated terms contribute repeatedly.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Sequence

from .candidates import Method, ScoredCandidate, Stage
from .corpus import Chunk, tokenize


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError("bm25.k1 must be non-negative")
        if not 0 <= self.b <= 1:
            raise ValueError("bm25.b must lie in [0, 1]")


@dataclass
class InvertedIndex:
    """Immutable after build_index; safe for concurrent read-only scoring."""

    postings: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    doc_lengths: list[int] = field(default_factory=list)
    avg_doc_length: float = 0.0
    doc_count: int = 0
    doc_freq: dict[str, int] = field(default_factory=dict)
    chunk_ids: list[str] = field(default_factory=list)


def build_index(chunks: Sequence[Chunk]) -> InvertedIndex:
    """Index chunk texts with the corpus tokenizer."""
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    chunk_ids: list[str] = []
    for ordinal, ch in enumerate(chunks):
        tokens = tokenize(ch.text)
        doc_lengths.append(len(tokens))
        chunk_ids.append(ch.chunk_id)
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, freq in counts.items():
            postings.setdefault(term, []).append((ordinal, freq))
    doc_count = len(doc_lengths)
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=sum(doc_lengths) / doc_count if doc_count else 0.0,
        doc_count=doc_count,
        doc_freq={term: len(plist) for term, plist in postings.items()},
        chunk_ids=chunk_ids,
    )


def _idf(index: InvertedIndex, term: str) -> float:
    df = index.doc_freq.get(term, 0)
    if df == 0:
        return 0.0
    return math.log((index.doc_count - df + 0.5) / (df + 0.5) + 1.0)


def _contribution(index: InvertedIndex, params: Bm25Params, term: str, freq: int, doc: int) -> float:
    norm = 1.0 - params.b + params.b * index.doc_lengths[doc] / index.avg_doc_length
    return _idf(index, term) * (freq * (params.k1 + 1.0)) / (freq + params.k1 * norm)


def bm25_score(
    index: InvertedIndex,
    params: Bm25Params,
    query_terms: Sequence[str],
    doc: int,
) -> float:
    """Score one document against the query term multiset."""
    if not 0 <= doc < index.doc_count:
        raise IndexError(f"doc ordinal {doc} out of range for {index.doc_count} documents")
    if index.avg_doc_length == 0:
        return 0.0
    score = 0.0
    for term in query_terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        pos = bisect_left(plist, (doc, 0))
        if pos < len(plist) and plist[pos][0] == doc:
            score += _contribution(index, params, term, plist[pos][1], doc)
    return score


def top_k(
    index: InvertedIndex,
    params: Bm25Params,
    query_terms: Sequence[str],
    k: int,
    *,
    stage: Stage = Stage.STAGE1,
) -> list[ScoredCandidate]:
    """Best k documents by BM25 score, ties broken by ascending ordinal.

    Documents scoring zero (no query term present) are omitted, so fewer
    than k candidates may be returned.
    """
    if k <= 0 or index.doc_count == 0 or index.avg_doc_length == 0:
        return []
    scores: dict[int, float] = {}
    for term in query_terms:
        for doc, freq in index.postings.get(term, ()):
            scores[doc] = scores.get(doc, 0.0) + _contribution(index, params, term, freq, doc)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [
        ScoredCandidate(chunk_id=index.chunk_ids[doc], score=s, stage=stage, method=Method.BM25)
        for doc, s in ranked[:k]
        if s > 0.0
    ]
