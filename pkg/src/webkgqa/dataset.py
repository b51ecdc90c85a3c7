"""Loading question records from JSON-lines dataset files.

Each record carries the question, its timestamp, domain and dynamism
labels, an optional ground-truth answer, and the pre-fetched web search
results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Page
from .errors import DataError


@dataclass
class DatasetRecord:
    query: str
    query_time: str = ""
    domain: str = ""
    static_or_dynamic: str = ""
    answer: str | None = None
    search_results: list[Page] = field(default_factory=list)
    question_type: str | None = None


def _page_from_dict(raw: dict) -> Page:
    return Page(
        page_name=raw.get("page_name") or "",
        page_html=raw.get("page_result") or "",
        page_snippet=raw.get("page_snippet") or "",
    )


def record_from_dict(raw: dict) -> DatasetRecord:
    if not isinstance(raw, dict):
        raise DataError(f"dataset record must be an object, got {type(raw).__name__}")
    query = raw.get("query")
    if not isinstance(query, str) or not query:
        raise DataError("dataset record is missing a non-empty 'query' field")
    results = raw.get("search_results") or []
    if not isinstance(results, list):
        raise DataError("'search_results' must be an array")
    return DatasetRecord(
        query=query,
        query_time=raw.get("query_time") or "",
        domain=raw.get("domain") or "",
        static_or_dynamic=raw.get("static_or_dynamic") or "",
        answer=raw.get("answer"),
        search_results=[_page_from_dict(r) for r in results],
        question_type=raw.get("question_type"),
    )


def load_records(path: str | Path) -> list[DatasetRecord]:
    """Read one record per non-blank line from a JSONL file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    records = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
        records.append(record_from_dict(raw))
    return records


def load_pages_file(path: str | Path) -> DatasetRecord:
    """Read a single question's pages for one-shot asking.

    Accepts either a full dataset record (JSON object, or the first line
    of a JSONL file) or a bare search_results array.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"pages file not found: {path}")
    text = path.read_text(encoding="utf-8").strip()
    if not text:
        raise DataError(f"pages file is empty: {path}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError:
        try:
            raw = json.loads(text.splitlines()[0])
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON or JSONL: {exc}") from exc
    if isinstance(raw, list):
        return DatasetRecord(query="", search_results=[_page_from_dict(r) for r in raw])
    return record_from_dict(raw)
