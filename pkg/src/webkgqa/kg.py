"""Knowledge-graph workflow: domain classification, structured function
calls generated by the chat model, execution against a mock KG store, and
rule-based post-processing of retrieved payloads.

The store is a fixture loaded from JSONL; answers are only ever values
read out of it, never generated, so this path trades coverage for a
near-zero error rate.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .backends import ChatModel, iter_json_values
from .errors import DataError

DEFAULT_FALSE_PREMISE_RESPONSE = "invalid question"
CERTAINTY_THRESHOLD = 0.9


class DomainLabel(str, Enum):
    FINANCE = "finance"
    SPORTS = "sports"
    MUSIC = "music"
    MOVIE = "movie"
    OPEN = "open"


def canonical_name(name: str) -> str:
    """Lowercase, trim, and collapse internal whitespace."""
    return " ".join(name.strip().lower().split())


def format_payload(payload: Any) -> str:
    """Render a stored payload as answer text."""
    if isinstance(payload, bool):
        return "yes" if payload else "no"
    if isinstance(payload, float) and payload.is_integer():
        return str(int(payload))
    if isinstance(payload, (list, tuple)):
        return ", ".join(format_payload(item) for item in payload)
    if isinstance(payload, dict):
        return json.dumps(payload, sort_keys=True)
    return str(payload)


# ---------------------------------------------------------------------------
# Store


@dataclass(frozen=True)
class KgEntity:
    entity_type: str
    name: str
    attributes: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class KgResult:
    found: bool
    payload: Any = None
    provenance: tuple[str, ...] = ()


_NOT_FOUND = KgResult(found=False)


class KgStore:
    """Immutable entity/relation store backing the mock KG functions."""

    def __init__(
        self,
        entities: Iterable[KgEntity] = (),
        relations: Iterable[tuple[str, str, str]] = (),
    ) -> None:
        self._by_key: dict[tuple[str, str], KgEntity] = {}
        self._names: set[str] = set()
        for raw in entities:
            entity = KgEntity(
                entity_type=canonical_name(raw.entity_type),
                name=canonical_name(raw.name),
                attributes=dict(raw.attributes),
            )
            key = (entity.entity_type, entity.name)
            if key in self._by_key:
                raise DataError(f"duplicate entity {key} in KG store")
            self._by_key[key] = entity
            self._names.add(entity.name)
        self.relations: list[tuple[str, str, str]] = []
        for subject, predicate, obj in relations:
            triple = (canonical_name(subject), canonical_name(predicate), canonical_name(obj))
            if triple[0] not in self._names or triple[2] not in self._names:
                raise DataError(f"relation endpoint missing from store: {triple}")
            self.relations.append(triple)

    def __len__(self) -> int:
        return len(self._by_key)

    def find(self, name: str, entity_type: str | None = None) -> KgEntity | None:
        wanted = canonical_name(name)
        if entity_type is not None:
            return self._by_key.get((canonical_name(entity_type), wanted))
        for (_, candidate_name), entity in self._by_key.items():
            if candidate_name == wanted:
                return entity
        return None

    def related(self, subject: str, predicate: str) -> list[str]:
        s = canonical_name(subject)
        p = canonical_name(predicate)
        return [obj for subj, pred, obj in self.relations if subj == s and pred == p]

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "KgStore":
        path = Path(path)
        if not path.exists():
            raise DataError(f"KG store file not found: {path}")
        entities: list[KgEntity] = []
        relations: list[tuple[str, str, str]] = []
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            if "relation" in raw:
                triple = raw["relation"]
                if not (isinstance(triple, list) and len(triple) == 3):
                    raise DataError(f"{path}:{line_no}: relation must be [subject, predicate, object]")
                relations.append(tuple(triple))
            elif "entity_type" in raw and "name" in raw:
                entities.append(
                    KgEntity(
                        entity_type=raw["entity_type"],
                        name=raw["name"],
                        attributes=raw.get("attributes") or {},
                    )
                )
            else:
                raise DataError(f"{path}:{line_no}: line is neither an entity nor a relation")
        return cls(entities, relations)


# ---------------------------------------------------------------------------
# Function registry


@dataclass(frozen=True)
class KgFunctionCall:
    name: str
    params: dict[str, str]


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    description: str
    domain: DomainLabel
    params: dict[str, str]
    required: tuple[str, ...]
    handler: Callable[[KgStore, Mapping[str, str]], KgResult]

    def schema(self) -> dict:
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": {
                        name: {"type": "string", "description": desc}
                        for name, desc in self.params.items()
                    },
                    "required": list(self.required),
                },
            },
        }


class FunctionRegistry:
    """Named KG query functions with declared parameter schemas."""

    def __init__(self) -> None:
        self._specs: dict[str, FunctionSpec] = {}

    def register(self, spec: FunctionSpec) -> None:
        if spec.name in self._specs:
            raise ValueError(f"function {spec.name!r} already registered")
        self._specs[spec.name] = spec

    def get(self, name: str) -> FunctionSpec | None:
        return self._specs.get(name)

    def for_domain(self, domain: DomainLabel) -> list[FunctionSpec]:
        return [s for s in self._specs.values() if s.domain == domain]

    def names(self) -> list[str]:
        return list(self._specs)

    def validate_call(self, call: KgFunctionCall) -> str | None:
        """Reason the call is invalid, or None when it satisfies its schema."""
        spec = self._specs.get(call.name)
        if spec is None:
            return f"unknown function {call.name!r}"
        for param in spec.required:
            if param not in call.params:
                return f"{call.name} is missing required parameter {param!r}"
        for key, value in call.params.items():
            if not isinstance(value, str):
                return f"{call.name} parameter {key!r} must be a string"
        return None


def entity_attribute_handler(
    entity_type: str, name_param: str, attr_param: str
) -> Callable[[KgStore, Mapping[str, str]], KgResult]:
    """Generic handler: look up an entity of a type and read one attribute."""

    def handler(store: KgStore, params: Mapping[str, str]) -> KgResult:
        entity = store.find(params[name_param], entity_type)
        if entity is None:
            return _NOT_FOUND
        attribute = canonical_name(params[attr_param]).replace(" ", "_")
        if attribute not in entity.attributes:
            return _NOT_FOUND
        return KgResult(found=True, payload=entity.attributes[attribute], provenance=(entity.name,))

    return handler


def default_registry() -> FunctionRegistry:
    """Built-in function families: music fully, the rest as skeletons."""
    registry = FunctionRegistry()
    registry.register(
        FunctionSpec(
            name="get_artist_info",
            description="Useful for when you need to get information about an artist, such as singer, band",
            domain=DomainLabel.MUSIC,
            params={
                "artist_name": "the name of artist or band",
                "artist_information": (
                    "the kind of artist information, such as birthplace, birthday, "
                    "lifespan, all_works, grammy_count, grammy_year, band_members"
                ),
            },
            required=("artist_name", "artist_information"),
            handler=entity_attribute_handler("artist", "artist_name", "artist_information"),
        )
    )
    registry.register(
        FunctionSpec(
            name="get_song_info",
            description="Useful for when you need to get information about a song",
            domain=DomainLabel.MUSIC,
            params={
                "song_name": "the name of the song",
                "song_information": (
                    "the kind of song information, such as author, artist, album, "
                    "release_date, grammy_year"
                ),
            },
            required=("song_name", "song_information"),
            handler=entity_attribute_handler("song", "song_name", "song_information"),
        )
    )
    registry.register(
        FunctionSpec(
            name="get_year_info",
            description="Useful for when you need to get information about music awards in a given year",
            domain=DomainLabel.MUSIC,
            params={
                "year": "the four-digit year, such as 2010",
                "year_information": (
                    "the kind of year information, such as grammy_best_song, "
                    "grammy_best_album, grammy_best_new_artist"
                ),
            },
            required=("year", "year_information"),
            handler=entity_attribute_handler("year", "year", "year_information"),
        )
    )
    registry.register(
        FunctionSpec(
            name="get_company_info",
            description="Useful for when you need to get information about a company or stock",
            domain=DomainLabel.FINANCE,
            params={
                "company_name": "the name or ticker of the company",
                "company_information": (
                    "the kind of company information, such as ticker, open_price, "
                    "close_price, market_cap, ceo"
                ),
            },
            required=("company_name", "company_information"),
            handler=entity_attribute_handler("company", "company_name", "company_information"),
        )
    )
    registry.register(
        FunctionSpec(
            name="get_team_info",
            description="Useful for when you need to get information about a sports team",
            domain=DomainLabel.SPORTS,
            params={
                "team_name": "the name of the team",
                "team_information": (
                    "the kind of team information, such as home_city, league, "
                    "championships, coach"
                ),
            },
            required=("team_name", "team_information"),
            handler=entity_attribute_handler("team", "team_name", "team_information"),
        )
    )
    registry.register(
        FunctionSpec(
            name="get_movie_info",
            description="Useful for when you need to get information about a movie",
            domain=DomainLabel.MOVIE,
            params={
                "movie_name": "the name of the movie",
                "movie_information": (
                    "the kind of movie information, such as director, release_year, "
                    "cast, oscar_count, length"
                ),
            },
            required=("movie_name", "movie_information"),
            handler=entity_attribute_handler("movie", "movie_name", "movie_information"),
        )
    )
    registry.register(
        FunctionSpec(
            name="get_person_info",
            description="Useful for when you need to get information about a movie person, such as an actor or director",
            domain=DomainLabel.MOVIE,
            params={
                "person_name": "the name of the person",
                "person_information": (
                    "the kind of person information, such as birthday, oscar_count, acted_in"
                ),
            },
            required=("person_name", "person_information"),
            handler=entity_attribute_handler("person", "person_name", "person_information"),
        )
    )
    return registry


# ---------------------------------------------------------------------------
# Model-driven classification and call generation

CLASSIFY_SYSTEM_PROMPT = """You classify a question into exactly one domain: finance, sports, music, movie, or open.
Reply with a JSON object: {"domain": "<finance|sports|music|movie|open>", "certainty": <number between 0 and 1>}.
Pick one of the four named domains only when you are more than 90% certain the question belongs to it; otherwise use open."""

_NAMED_DOMAINS = {
    DomainLabel.FINANCE,
    DomainLabel.SPORTS,
    DomainLabel.MUSIC,
    DomainLabel.MOVIE,
}


def classify_domain(query: str, model: ChatModel) -> DomainLabel:
    """Ask the model for a domain plus certainty; default to open.

    A named domain is returned only with certainty strictly above 0.9;
    unparseable replies classify as open.
    """
    reply = model.send(CLASSIFY_SYSTEM_PROMPT, query)
    for value in iter_json_values(reply):
        if not isinstance(value, dict):
            continue
        domain_raw = value.get("domain")
        certainty = value.get("certainty")
        if not isinstance(domain_raw, str):
            continue
        try:
            domain = DomainLabel(domain_raw.strip().lower())
        except ValueError:
            continue
        if (
            domain in _NAMED_DOMAINS
            and isinstance(certainty, (int, float))
            and not isinstance(certainty, bool)
            and 0 <= certainty <= 1
            and certainty > CERTAINTY_THRESHOLD
        ):
            return domain
        return DomainLabel.OPEN
    return DomainLabel.OPEN


def build_function_call_prompt(domain: DomainLabel, registry: FunctionRegistry) -> str:
    specs = registry.for_domain(domain)
    blocks = "\n".join(json.dumps(spec.schema(), indent=4) for spec in specs)
    return (
        "You are an AI agent of linguist talking to a human. "
        "For all questions you MUST use one of the functions provided.\n"
        "You have access to the following tools:\n"
        f"{blocks}\n"
        "To use these tools you must always respond in a Python function call "
        "based on the above provided function definition of the tool!\n"
        "For example:\n"
        '{"name": "get_artist_info", "params": {"artist_name": "justin bieber", '
        '"artist_information": "birthday"}}\n'
        "For a multi-step question, respond with a JSON array of function calls in "
        'order; a later call may use "$prev" inside a parameter to reference the '
        "previous result."
    )


def _coerce_call(value: Any) -> KgFunctionCall | None:
    if not isinstance(value, dict):
        return None
    name = value.get("name")
    params = value.get("params")
    if not isinstance(name, str) or not isinstance(params, dict):
        return None
    coerced: dict[str, str] = {}
    for key, raw in params.items():
        if isinstance(raw, str):
            coerced[key] = raw
        elif isinstance(raw, (int, float)) and not isinstance(raw, bool):
            coerced[key] = format_payload(raw)
        else:
            return None
    return KgFunctionCall(name=name, params=coerced)


def generate_function_call(
    query: str,
    domain: DomainLabel,
    model: ChatModel,
    registry: FunctionRegistry,
) -> list[KgFunctionCall] | None:
    """Structured call(s) for the query, or None when nothing valid parses.

    A None result sends the question down the web path instead.
    """
    if not registry.for_domain(domain):
        return None
    reply = model.send(build_function_call_prompt(domain, registry), query)
    calls: list[KgFunctionCall] | None = None
    for value in iter_json_values(reply):
        if isinstance(value, dict):
            call = _coerce_call(value)
            if call is not None:
                calls = [call]
                break
        if isinstance(value, list) and value:
            coerced = [_coerce_call(item) for item in value]
            if all(c is not None for c in coerced):
                calls = coerced  # type: ignore[assignment]
                break
    if not calls:
        return None
    for call in calls:
        if registry.validate_call(call) is not None:
            return None
    return calls


# ---------------------------------------------------------------------------
# Execution


def execute_call(store: KgStore, call: KgFunctionCall, registry: FunctionRegistry) -> KgResult:
    """Dispatch a validated call; entity absence is data, not an error."""
    reason = registry.validate_call(call)
    if reason is not None:
        raise ValueError(reason)
    spec = registry.get(call.name)
    assert spec is not None
    return spec.handler(store, call.params)


def execute_calls(
    store: KgStore, calls: Sequence[KgFunctionCall], registry: FunctionRegistry
) -> KgResult:
    """Run a call chain; "$prev" in later params takes the prior payload.

    Independent calls (no "$prev") yield a list of their payloads;
    chained calls yield the final payload. Any not-found aborts the chain.
    """
    prev_payload: Any = None
    chained = False
    payloads: list[Any] = []
    provenance: list[str] = []
    for call in calls:
        params = dict(call.params)
        if prev_payload is not None:
            for key, value in params.items():
                if "$prev" in value:
                    params[key] = value.replace("$prev", format_payload(prev_payload))
                    chained = True
        result = execute_call(store, KgFunctionCall(call.name, params), registry)
        if not result.found:
            return _NOT_FOUND
        payloads.append(result.payload)
        provenance.extend(result.provenance)
        prev_payload = result.payload
    payload = payloads[-1] if (chained or len(payloads) == 1) else payloads
    return KgResult(found=True, payload=payload, provenance=tuple(provenance))


# ---------------------------------------------------------------------------
# Post-processing rules

_YEAR_RE = re.compile(r"\b(?:19|20)\d{2}\b")
_PAST_BOUND_CUES = ("so far", "to date", "until now", "up to now", "as of")
_YESNO_PREFIXES = (
    "is ", "was ", "are ", "were ", "did ", "does ", "do ", "has ", "have ", "had ",
)
_GREATER_CUES = ("more", "greater", "higher", "longer", "older", "bigger", "larger")

_WHEN_FORMATS = (
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d",
    "%m/%d/%Y, %H:%M:%S",
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y",
)


def parse_query_time(query_time: str) -> datetime | None:
    text = query_time.strip()
    # Trailing timezone labels ("PT") are dropped; dates are compared naively.
    text = re.sub(r"\s+[A-Z]{2,4}$", "", text)
    for fmt in _WHEN_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    return None


def _item_date(item: Any) -> date | None:
    if isinstance(item, dict) and isinstance(item.get("date"), str):
        item = item["date"]
    if isinstance(item, str):
        match = re.match(r"(\d{4})-(\d{2})-(\d{2})", item.strip())
        if match:
            try:
                return date(int(match[1]), int(match[2]), int(match[3]))
            except ValueError:
                return None
    return None


def _as_number(value: Any) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return None
    return None


def _apply_temporal(payload: Any, query: str, query_time: str) -> Any:
    """Filter dated list payloads when the query is bounded by now."""
    when = parse_query_time(query_time)
    if when is None or not isinstance(payload, list):
        return payload
    cues = [cue for cue in _PAST_BOUND_CUES if cue in query]
    this_year = "this year" in query
    today = "today" in query
    if not (cues or this_year or today) or not any(_item_date(i) for i in payload):
        return payload
    kept = []
    for item in payload:
        item_date = _item_date(item)
        if item_date is None:
            kept.append(item)
            continue
        if item_date > when.date():
            continue
        if this_year and item_date.year != when.year:
            continue
        if today and item_date != when.date():
            continue
        kept.append(item)
    return kept


def post_process(
    result: KgResult,
    query: str,
    query_time: str,
    false_premise_response: str = DEFAULT_FALSE_PREMISE_RESPONSE,
) -> str | None:
    """Refine a retrieved payload into answer text.

    Ordered rule chain: temporal filtering, numerical aggregation,
    yes/no logic over list payloads, then a false-premise check on years
    the query asserts. Rules that do not fire pass the payload through;
    a filter that empties the payload is a conflict and yields None.
    """
    if not result.found:
        return None
    query_lower = query.lower()
    payload = _apply_temporal(result.payload, query_lower, query_time)

    if isinstance(payload, (list, tuple)):
        if "how many" in query_lower or "number of" in query_lower:
            return str(len(payload))
        numbers = [_as_number(item) for item in payload]
        if all(n is not None for n in numbers) and numbers:
            if "total" in query_lower or "sum" in query_lower:
                return format_payload(sum(numbers))
            if "difference" in query_lower and len(numbers) == 2:
                return format_payload(abs(numbers[0] - numbers[1]))

    if isinstance(payload, (list, tuple)) and query_lower.startswith(_YESNO_PREFIXES):
        numbers = [_as_number(item) for item in payload]
        if len(payload) == 2 and all(n is not None for n in numbers):
            if any(cue in query_lower for cue in _GREATER_CUES):
                return "yes" if numbers[0] > numbers[1] else "no"
        canonical_query = canonical_name(query)
        member = any(canonical_name(format_payload(item)) in canonical_query for item in payload)
        return "yes" if member else "no"

    asserted_years = set(_YEAR_RE.findall(query))
    payload_years = set(_YEAR_RE.findall(format_payload(payload)))
    if asserted_years and payload_years and not (asserted_years & payload_years):
        return false_premise_response

    if isinstance(payload, (list, tuple)) and not payload:
        return None
    return format_payload(payload)


# ---------------------------------------------------------------------------
# End-to-end KG answering


@dataclass
class KgOutcome:
    """Everything the KG path produced for one query."""

    domain: DomainLabel
    calls: list[KgFunctionCall] = field(default_factory=list)
    result: KgResult | None = None
    answer: str | None = None

    @property
    def answered(self) -> bool:
        return self.answer is not None


def kg_answer(
    query: str,
    query_time: str,
    model: ChatModel,
    store: KgStore,
    registry: FunctionRegistry | None = None,
    false_premise_response: str = DEFAULT_FALSE_PREMISE_RESPONSE,
) -> KgOutcome:
    """Classify, call, execute, post-process; answer only on a full chain.

    No-call, not-found, and rule conflicts all yield an unanswered
    outcome rather than a guess.
    """
    registry = registry or default_registry()
    domain = classify_domain(query, model)
    outcome = KgOutcome(domain=domain)
    calls = generate_function_call(query, domain, model, registry)
    if not calls:
        return outcome
    outcome.calls = calls
    result = execute_calls(store, calls, registry)
    outcome.result = result
    if not result.found:
        return outcome
    outcome.answer = post_process(result, query, query_time, false_premise_response)
    return outcome
