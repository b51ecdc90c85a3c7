"""Two-stage retrieval: broad sparse recall, then hybrid precision.

Stage 1 runs BM25 separately over page-body chunks and name/snippet
chunks, keeping up to k_stage1 candidates from each. Stage 2 searches
only that pool: a sparse branch keeps the top m_sparse by BM25 while a
dense branch embeds the pool, keeps the top n_dense by cosine, and
reranks them. The final references are the reranked candidates followed
by sparse-only ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .candidates import ScoredCandidate, Stage
from .corpus import Chunk, ChunkingConfig, Page, SourceKind, build_corpus, tokenize
from .dense import Embedder, Reranker, rerank, top_n_dense
from .sparse import Bm25Params, build_index, top_k


@dataclass(frozen=True)
class RetrievalConfig:
    k_stage1: int = 200
    m_sparse: int = 5
    n_dense: int = 20
    bm25: Bm25Params = field(default_factory=Bm25Params)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)

    def __post_init__(self) -> None:
        for name in ("k_stage1", "m_sparse", "n_dense"):
            if getattr(self, name) <= 0:
                raise ValueError(f"retrieval.{name} must be positive")
        if self.k_stage1 < 4 * (self.m_sparse + self.n_dense):
            raise ValueError(
                "retrieval.k_stage1 must be at least 4 * (m_sparse + n_dense) "
                f"({self.k_stage1} < {4 * (self.m_sparse + self.n_dense)})"
            )


@dataclass(frozen=True)
class Reference:
    """A retrieved text plus the attribution label shown in the prompt."""

    text: str
    label: str
    score: float = 0.0
    stage: str = ""
    chunk_id: str = ""


@dataclass
class RetrievalOutcome:
    references: list[Reference]
    corpus_size: int = 0
    stage1_size: int = 0


def stage1(query: str, chunks: Sequence[Chunk], cfg: RetrievalConfig) -> list[ScoredCandidate]:
    """Sparse recall over body chunks and name/snippet chunks separately."""
    body = [c for c in chunks if c.source_kind == SourceKind.PAGE_RESULT]
    meta = [c for c in chunks if c.source_kind != SourceKind.PAGE_RESULT]
    terms = tokenize(query)
    pool: list[ScoredCandidate] = []
    for group in (body, meta):
        if group:
            pool.extend(top_k(build_index(group), cfg.bm25, terms, cfg.k_stage1, stage=Stage.STAGE1))
    return pool


def stage2(
    query: str,
    pool: Sequence[ScoredCandidate],
    chunks_by_id: Mapping[str, Chunk],
    cfg: RetrievalConfig,
    embedder: Embedder | None = None,
    reranker: Reranker | None = None,
) -> list[ScoredCandidate]:
    """Hybrid search over the stage-1 pool.

    Returns the reranked dense top-n followed by sparse-only top-m
    candidates, deduplicated by chunk id with the reranked entry winning.
    """
    if not pool:
        return []
    pool_chunks = [chunks_by_id[c.chunk_id] for c in pool]
    terms = tokenize(query)
    sparse_top = top_k(
        build_index(pool_chunks), cfg.bm25, terms, cfg.m_sparse, stage=Stage.STAGE2_SPARSE
    )
    dense_top = top_n_dense(query, pool_chunks, cfg.n_dense, embedder)
    reranked = rerank(query, dense_top, chunks_by_id, reranker)
    seen = {c.chunk_id for c in reranked}
    return list(reranked) + [c for c in sparse_top if c.chunk_id not in seen]


def retrieve_outcome(
    query: str,
    pages: Sequence[Page],
    cfg: RetrievalConfig,
    embedder: Embedder | None = None,
    reranker: Reranker | None = None,
) -> RetrievalOutcome:
    """Full pipeline with per-stage counts for tracing."""
    chunks = build_corpus(list(pages), cfg.chunking)
    if not chunks:
        return RetrievalOutcome(references=[])
    by_id = {c.chunk_id: c for c in chunks}
    pool = stage1(query, chunks, cfg)
    final = stage2(query, pool, by_id, cfg, embedder, reranker)
    references = []
    for cand in final:
        ch = by_id[cand.chunk_id]
        page_name = pages[ch.page_index].page_name
        references.append(
            Reference(
                text=ch.text,
                label=f"page {ch.page_index}: {page_name}",
                score=cand.score,
                stage=cand.stage.value,
                chunk_id=cand.chunk_id,
            )
        )
    return RetrievalOutcome(
        references=references, corpus_size=len(chunks), stage1_size=len(pool)
    )


def retrieve(
    query: str,
    pages: Sequence[Page],
    cfg: RetrievalConfig,
    embedder: Embedder | None = None,
    reranker: Reranker | None = None,
) -> list[Reference]:
    """Ordered reference list for the answer prompt."""
    return retrieve_outcome(query, pages, cfg, embedder, reranker).references
