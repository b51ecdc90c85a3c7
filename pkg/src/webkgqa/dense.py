"""Dense similarity search with pluggable embedder/reranker contracts.

The built-ins are deterministic stand-ins for neural models: a hashed
bag-of-tokens embedder and a token-set Jaccard reranker. Both are pure,
so the whole retrieval pipeline runs offline and reproducibly.
"""

from __future__ import annotations

import hashlib
from typing import Mapping, Protocol, Sequence

import numpy as np

from .candidates import Method, ScoredCandidate, Stage
from .corpus import Chunk, tokenize

DEFAULT_DIM = 256


class Embedder(Protocol):
    dim: int

    def embed_many(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class Reranker(Protocol):
    def score(self, query: str, texts: Sequence[str]) -> list[float]: ...


def _bucket(token: str, dim: int) -> int:
    # Seeded, portable hash: identical vectors on every platform/run.
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


class HashedBagEmbedder:
    """Hash token counts into a fixed number of buckets, L2-normalized."""

    def __init__(self, dim: int = DEFAULT_DIM) -> None:
        if dim <= 0:
            raise ValueError("embedding dimension must be positive")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token in tokenize(text):
            vec[_bucket(token, self.dim)] += 1.0
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def embed_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


class JaccardReranker:
    """Relevance as Jaccard similarity of query/candidate token sets."""

    def score(self, query: str, texts: Sequence[str]) -> list[float]:
        q = set(tokenize(query))
        scores = []
        for text in texts:
            t = set(tokenize(text))
            union = q | t
            scores.append(len(q & t) / len(union) if union else 0.0)
        return scores


_DEFAULT_EMBEDDER = HashedBagEmbedder()
_DEFAULT_RERANKER = JaccardReranker()


def embed(text: str) -> np.ndarray:
    """Built-in deterministic embedding of a text."""
    return _DEFAULT_EMBEDDER.embed(text)


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def top_n_dense(
    query: str,
    pool: Sequence[Chunk],
    n: int,
    embedder: Embedder | None = None,
) -> list[ScoredCandidate]:
    """Up to n pool chunks by cosine similarity to the query embedding."""
    if n <= 0 or not pool:
        return []
    embedder = embedder or _DEFAULT_EMBEDDER
    vectors = embedder.embed_many([query] + [c.text for c in pool])
    query_vec, chunk_vecs = vectors[0], vectors[1:]
    sims = [cosine_similarity(query_vec, v) for v in chunk_vecs]
    order = sorted(range(len(pool)), key=lambda i: (-sims[i], i))
    return [
        ScoredCandidate(
            chunk_id=pool[i].chunk_id,
            score=sims[i],
            stage=Stage.STAGE2_DENSE,
            method=Method.DENSE,
        )
        for i in order[:n]
    ]


def rerank(
    query: str,
    candidates: Sequence[ScoredCandidate],
    pool: Mapping[str, Chunk],
    reranker: Reranker | None = None,
) -> list[ScoredCandidate]:
    """Reorder candidates by reranker relevance, non-increasing.

    The result is the same multiset of candidates re-scored and tagged
    stage2_reranked; the sort is stable, so reranking is idempotent.
    """
    missing = [c.chunk_id for c in candidates if c.chunk_id not in pool]
    if missing:
        raise KeyError(f"candidates reference unknown chunks: {missing}")
    reranker = reranker or _DEFAULT_RERANKER
    scores = reranker.score(query, [pool[c.chunk_id].text for c in candidates])
    rescored = [
        ScoredCandidate(
            chunk_id=c.chunk_id,
            score=s,
            stage=Stage.STAGE2_RERANKED,
            method=Method.RERANKER,
        )
        for c, s in zip(candidates, scores)
    ]
    return sorted(rescored, key=lambda c: -c.score)
