"""Scored retrieval candidates shared by the sparse and dense retrievers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Stage(str, Enum):
    STAGE1 = "stage1"
    STAGE2_SPARSE = "stage2_sparse"
    STAGE2_DENSE = "stage2_dense"
    STAGE2_RERANKED = "stage2_reranked"


class Method(str, Enum):
    BM25 = "bm25"
    DENSE = "dense"
    RERANKER = "reranker"


@dataclass(frozen=True)
class ScoredCandidate:
    chunk_id: str
    score: float
    stage: Stage
    method: Method

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValueError(f"candidate score must be finite, got {self.score}")
