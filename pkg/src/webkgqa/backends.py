"""Pluggable model backends: chat, embedding, and rerank services.

Every backend has a deterministic in-process stand-in so the pipeline
runs offline; HTTP variants speak small JSON POST contracts. Scripted
chat models replay canned replies for tests and reproducible evaluation
runs.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Protocol, Sequence

import numpy as np
import requests

from .errors import BackendError, DataError


class ChatModel(Protocol):
    def send(self, system_prompt: str, user_prompt: str) -> str: ...


def prompt_hash(system_prompt: str, user_prompt: str) -> str:
    """Stable key for a (system, user) prompt pair."""
    payload = system_prompt + "\x00" + user_prompt
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def iter_json_values(text: str) -> Iterator[Any]:
    """Yield every JSON object/array embedded in free-form text, in order.

    Tolerates surrounding prose and code fences; malformed fragments are
    skipped.
    """
    decoder = json.JSONDecoder()
    pos = 0
    while pos < len(text):
        char = text[pos]
        if char not in "{[":
            pos += 1
            continue
        try:
            value, end = decoder.raw_decode(text, pos)
        except json.JSONDecodeError:
            pos += 1
            continue
        yield value
        pos = end


@dataclass
class ScriptEntry:
    reply: str
    prompt_hash: str | None = None
    system_contains: str | None = None
    user_contains: str | None = None
    default: bool = False

    def matches(self, system_prompt: str, user_prompt: str, digest: str) -> bool:
        if self.prompt_hash is not None:
            return self.prompt_hash == digest
        if self.system_contains is None and self.user_contains is None:
            return False
        if self.system_contains is not None and self.system_contains not in system_prompt:
            return False
        if self.user_contains is not None and self.user_contains not in user_prompt:
            return False
        return True


class ScriptedChatModel:
    """Replays canned replies keyed by prompt hash or substring match.

    Entries are tried in order: exact prompt-hash matches win, then the
    first substring match, then a default entry if present. An unmatched
    prompt raises BackendError so broken fixtures fail loudly.
    """

    def __init__(self, entries: Sequence[ScriptEntry]) -> None:
        self.entries = list(entries)
        self.calls: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedChatModel":
        entries = []
        path = Path(path)
        if not path.exists():
            raise DataError(f"scripted replies file not found: {path}")
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            if "reply" not in raw:
                raise DataError(f"{path}:{line_no}: entry is missing 'reply'")
            entries.append(
                ScriptEntry(
                    reply=raw["reply"],
                    prompt_hash=raw.get("prompt_hash"),
                    system_contains=raw.get("system_contains"),
                    user_contains=raw.get("user_contains"),
                    default=bool(raw.get("default", False)),
                )
            )
        return cls(entries)

    def send(self, system_prompt: str, user_prompt: str) -> str:
        with self._lock:
            self.calls.append((system_prompt, user_prompt))
        digest = prompt_hash(system_prompt, user_prompt)
        for entry in self.entries:
            if entry.prompt_hash is not None and entry.prompt_hash == digest:
                return entry.reply
        for entry in self.entries:
            if entry.matches(system_prompt, user_prompt, digest):
                return entry.reply
        for entry in self.entries:
            if entry.default:
                return entry.reply
        raise BackendError("no scripted reply matches the prompt")


class AbstainChatModel:
    """Fallback when no chat backend is configured: declines everything."""

    def send(self, system_prompt: str, user_prompt: str) -> str:
        return '{"answer": "I don\'t know", "confidence": "low"}'


def _post_json(url: str, payload: dict, timeout: float) -> dict:
    try:
        response = requests.post(url, json=payload, timeout=timeout)
        response.raise_for_status()
        return response.json()
    except (requests.RequestException, ValueError) as exc:
        raise BackendError(f"backend request to {url} failed: {exc}") from exc


class HttpChatModel:
    """POST {"system", "user", "temperature": 0} -> {"reply": "..."}."""

    def __init__(self, url: str, timeout: float = 30.0, max_in_flight: int = 4) -> None:
        self.url = url
        self.timeout = timeout
        self._slot = threading.Semaphore(max_in_flight)

    def send(self, system_prompt: str, user_prompt: str) -> str:
        payload = {"system": system_prompt, "user": user_prompt, "temperature": 0}
        with self._slot:
            data = _post_json(self.url, payload, self.timeout)
        reply = data.get("reply")
        if not isinstance(reply, str):
            raise BackendError(f"chat backend returned no 'reply' string: {data}")
        return reply


class HttpEmbedder:
    """POST {"texts": [...]} -> {"vectors": [[...], ...]}."""

    def __init__(self, url: str, timeout: float = 30.0, dim: int | None = None) -> None:
        self.url = url
        self.timeout = timeout
        self.dim = dim

    def embed_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        data = _post_json(self.url, {"texts": list(texts)}, self.timeout)
        vectors = data.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise BackendError("embedding backend returned a malformed 'vectors' array")
        arrays = [np.asarray(v, dtype=float) for v in vectors]
        dims = {a.shape for a in arrays}
        if len(dims) > 1 or (self.dim is not None and dims and dims != {(self.dim,)}):
            raise BackendError(f"embedding backend returned inconsistent dimensions: {dims}")
        return arrays


class HttpReranker:
    """POST {"query": "...", "candidates": [...]} -> {"scores": [...]}."""

    def __init__(self, url: str, timeout: float = 30.0) -> None:
        self.url = url
        self.timeout = timeout

    def score(self, query: str, texts: Sequence[str]) -> list[float]:
        data = _post_json(self.url, {"query": query, "candidates": list(texts)}, self.timeout)
        scores = data.get("scores")
        if not isinstance(scores, list) or len(scores) != len(texts):
            raise BackendError("rerank backend returned a malformed 'scores' array")
        return [float(s) for s in scores]
