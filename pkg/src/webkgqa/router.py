"""Adaptive routing between the KG workflow and the web retrieval path.

How fast a question's answer drifts decides the strategy: stable
questions trust the KG and skip web retrieval entirely when it answers;
fast-moving ones always run the web path, folding any KG payload into
the references for the generator to synthesize.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

from .corpus import Page
from .errors import BackendError
from .generation import GatedAnswer
from .kg import DomainLabel, KgOutcome, format_payload
from .pipeline import Reference, RetrievalOutcome

KG_REFERENCE_LABEL = "knowledge graph"


class Dynamism(str, Enum):
    STATIC = "static"
    SLOW_CHANGING = "slow_changing"
    FAST_CHANGING = "fast_changing"
    REAL_TIME = "real_time"

    @classmethod
    def parse(cls, value: str) -> "Dynamism":
        return cls(value.strip().lower().replace("-", "_"))


@dataclass(frozen=True)
class DomainProfile:
    domain: DomainLabel
    default_dynamism: Dynamism
    kg_priority: bool


DEFAULT_PROFILES: dict[DomainLabel, DomainProfile] = {
    DomainLabel.OPEN: DomainProfile(DomainLabel.OPEN, Dynamism.STATIC, kg_priority=True),
    DomainLabel.MUSIC: DomainProfile(DomainLabel.MUSIC, Dynamism.SLOW_CHANGING, kg_priority=True),
    DomainLabel.MOVIE: DomainProfile(DomainLabel.MOVIE, Dynamism.SLOW_CHANGING, kg_priority=True),
    DomainLabel.SPORTS: DomainProfile(DomainLabel.SPORTS, Dynamism.FAST_CHANGING, kg_priority=False),
    DomainLabel.FINANCE: DomainProfile(DomainLabel.FINANCE, Dynamism.REAL_TIME, kg_priority=False),
}


def resolve_dynamism(
    record_value: str | None,
    domain: DomainLabel,
    profiles: Mapping[DomainLabel, DomainProfile] | None = None,
) -> Dynamism:
    """Record-level dynamism wins; otherwise the domain profile default."""
    if record_value:
        try:
            return Dynamism.parse(record_value)
        except ValueError:
            pass
    profiles = profiles or DEFAULT_PROFILES
    profile = profiles.get(domain)
    return profile.default_dynamism if profile else Dynamism.STATIC


KgAnswerer = Callable[[str, str], KgOutcome]
Retriever = Callable[[str, Sequence[Page]], RetrievalOutcome]
Generator = Callable[[str, str, Sequence[Reference]], GatedAnswer]


@dataclass
class RouteResult:
    final_text: str
    path: str  # "kg" or "web"
    kg: KgOutcome | None = None
    gated: GatedAnswer | None = None
    trace: dict = field(default_factory=dict)


def route(
    query: str,
    query_time: str,
    pages: Sequence[Page],
    dynamism: Dynamism,
    *,
    kg_answerer: KgAnswerer | None,
    retriever: Retriever,
    generator: Generator,
) -> RouteResult:
    """Combine the KG and web paths according to the dynamism class.

    static / slow_changing: a KG answer is final and the web path never
    runs. fast_changing / real_time: the web path always runs, with any
    KG payload prepended as an extra reference. A failing KG backend
    degrades to the web path instead of aborting the query.
    """
    kg_outcome: KgOutcome | None = None
    kg_error: str | None = None
    if kg_answerer is not None:
        try:
            kg_outcome = kg_answerer(query, query_time)
        except BackendError as exc:
            kg_error = str(exc)

    trace: dict = {"dynamism": dynamism.value, "kg_enabled": kg_answerer is not None}
    if kg_error:
        trace["kg_error"] = kg_error
    if kg_outcome is not None:
        trace["kg_domain"] = kg_outcome.domain.value
        trace["kg_answered"] = kg_outcome.answered

    if (
        dynamism in (Dynamism.STATIC, Dynamism.SLOW_CHANGING)
        and kg_outcome is not None
        and kg_outcome.answered
    ):
        trace["path"] = "kg"
        return RouteResult(
            final_text=kg_outcome.answer or "",
            path="kg",
            kg=kg_outcome,
            trace=trace,
        )

    outcome = retriever(query, pages)
    references = list(outcome.references)
    prepend_kg = dynamism != Dynamism.STATIC
    if (
        prepend_kg
        and kg_outcome is not None
        and kg_outcome.result is not None
        and kg_outcome.result.found
    ):
        references.insert(
            0,
            Reference(
                text=format_payload(kg_outcome.result.payload),
                label=KG_REFERENCE_LABEL,
            ),
        )
        trace["kg_reference"] = True
    gated = generator(query, query_time, references)
    trace.update(
        {
            "path": "web",
            "corpus_chunks": outcome.corpus_size,
            "stage1_candidates": outcome.stage1_size,
            "references": len(references),
            "confidence": str(gated.confidence),
            "accepted": gated.accepted,
        }
    )
    return RouteResult(
        final_text=gated.final_text,
        path="web",
        kg=kg_outcome,
        gated=gated,
        trace=trace,
    )
