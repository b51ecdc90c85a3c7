"""Wiring: turn an AppConfig into runnable pipeline components."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .backends import (
    AbstainChatModel,
    ChatModel,
    HttpChatModel,
    HttpEmbedder,
    HttpReranker,
    ScriptedChatModel,
)
from .config import AppConfig, BackendConfig
from .corpus import ChunkingConfig, Page
from .dataset import DatasetRecord
from .dense import Embedder, HashedBagEmbedder, JaccardReranker, Reranker
from .generation import ConfidenceTier, GatedAnswer, generate_answer
from .kg import DomainLabel, KgOutcome, KgStore, default_registry, kg_answer
from .pipeline import Reference, RetrievalOutcome, retrieve_outcome
from .router import Dynamism, RouteResult, resolve_dynamism, route


def build_chat_model(backend: BackendConfig) -> ChatModel:
    if backend.url:
        return HttpChatModel(backend.url, timeout=backend.timeout)
    if backend.script:
        return ScriptedChatModel.from_file(backend.script)
    return AbstainChatModel()


@dataclass
class System:
    """All components for answering records, built once per run."""

    config: AppConfig
    embedder: Embedder
    reranker: Reranker
    chat_model: ChatModel
    judge_model: ChatModel | None
    kg_store: KgStore | None

    @classmethod
    def from_config(cls, config: AppConfig) -> "System":
        embedder: Embedder
        if config.embedding.url:
            embedder = HttpEmbedder(config.embedding.url, timeout=config.embedding.timeout)
        else:
            embedder = HashedBagEmbedder()
        reranker: Reranker
        if config.rerank.url:
            reranker = HttpReranker(config.rerank.url, timeout=config.rerank.timeout)
        else:
            reranker = JaccardReranker()
        judge_model = build_chat_model(config.judge) if config.judge.configured else None
        kg_store = KgStore.from_jsonl(config.kg_store_path) if config.kg_store_path else None
        return cls(
            config=config,
            embedder=embedder,
            reranker=reranker,
            chat_model=build_chat_model(config.chat),
            judge_model=judge_model,
            kg_store=kg_store,
        )

    def domain_label(self, record_domain: str) -> DomainLabel:
        try:
            return DomainLabel(record_domain.strip().lower())
        except ValueError:
            return DomainLabel.OPEN

    def make_kg_answerer(self) -> Callable[[str, str], KgOutcome] | None:
        if self.kg_store is None:
            return None
        store = self.kg_store
        registry = default_registry()

        def answerer(query: str, query_time: str) -> KgOutcome:
            return kg_answer(
                query,
                query_time,
                self.chat_model,
                store,
                registry,
                self.config.false_premise_response,
            )

        return answerer

    def make_retriever(self, chunk_size: int | None = None) -> Callable[[str, Sequence[Page]], RetrievalOutcome]:
        cfg = self.config.retrieval
        if chunk_size is not None:
            cfg = replace(cfg, chunking=ChunkingConfig(chunk_size=chunk_size, overlap=cfg.chunking.overlap))

        def retriever(query: str, pages: Sequence[Page]) -> RetrievalOutcome:
            return retrieve_outcome(query, pages, cfg, self.embedder, self.reranker)

        return retriever

    def make_generator(self, threshold: ConfidenceTier | None = None) -> Callable[[str, str, Sequence[Reference]], GatedAnswer]:
        tier = self.config.threshold if threshold is None else threshold

        def generator(query: str, query_time: str, references: Sequence[Reference]) -> GatedAnswer:
            return generate_answer(query, query_time, references, self.chat_model, tier)

        return generator

    def answer_record(
        self,
        record: DatasetRecord,
        threshold: ConfidenceTier | None = None,
        chunk_size: int | None = None,
    ) -> RouteResult:
        domain = self.domain_label(record.domain)
        dynamism = resolve_dynamism(record.static_or_dynamic, domain, self.config.profiles)
        return route(
            record.query,
            record.query_time,
            record.search_results,
            dynamism,
            kg_answerer=self.make_kg_answerer(),
            retriever=self.make_retriever(chunk_size),
            generator=self.make_generator(threshold),
        )

    def make_answer_fn(
        self,
        threshold: ConfidenceTier | None = None,
        chunk_size: int | None = None,
    ) -> Callable[[DatasetRecord], str]:
        def answer(record: DatasetRecord) -> str:
            return self.answer_record(record, threshold, chunk_size).final_text

        return answer
