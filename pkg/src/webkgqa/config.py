"""Application configuration: a single JSON file plus env-var overrides.

Every backend is optional; anything left unset falls back to the
deterministic built-ins so the whole system runs offline.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import ChunkingConfig
from .errors import ConfigError
from .generation import ConfidenceTier
from .kg import DEFAULT_FALSE_PREMISE_RESPONSE, DomainLabel
from .pipeline import RetrievalConfig
from .router import DEFAULT_PROFILES, DomainProfile, Dynamism
from .sparse import Bm25Params

_ENV_URL_VARS = {
    "chat": "WEBKGQA_CHAT_URL",
    "embedding": "WEBKGQA_EMBEDDING_URL",
    "rerank": "WEBKGQA_RERANK_URL",
    "judge": "WEBKGQA_JUDGE_URL",
}


@dataclass(frozen=True)
class BackendConfig:
    """Endpoint for one backend; script points at a replay file instead."""

    url: str | None = None
    script: str | None = None
    timeout: float = 30.0

    @property
    def configured(self) -> bool:
        return self.url is not None or self.script is not None


@dataclass(frozen=True)
class AppConfig:
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    threshold: ConfidenceTier = ConfidenceTier.HIGH
    chat: BackendConfig = field(default_factory=BackendConfig)
    embedding: BackendConfig = field(default_factory=BackendConfig)
    rerank: BackendConfig = field(default_factory=BackendConfig)
    judge: BackendConfig = field(default_factory=BackendConfig)
    kg_store_path: str | None = None
    false_premise_response: str = DEFAULT_FALSE_PREMISE_RESPONSE
    profiles: dict[DomainLabel, DomainProfile] = field(default_factory=lambda: dict(DEFAULT_PROFILES))
    worker_count: int = 1

    def __post_init__(self) -> None:
        if self.worker_count < 1:
            raise ConfigError("worker_count must be at least 1")


def _backend_from_dict(raw: dict, name: str) -> BackendConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"backends.{name} must be an object")
    return BackendConfig(
        url=raw.get("url"),
        script=raw.get("script"),
        timeout=float(raw.get("timeout", 30.0)),
    )


def _retrieval_from_dict(raw: dict) -> RetrievalConfig:
    bm25_raw = raw.get("bm25") or {}
    chunking_raw = raw.get("chunking") or {}
    try:
        return RetrievalConfig(
            k_stage1=int(raw.get("k_stage1", 200)),
            m_sparse=int(raw.get("m_sparse", 5)),
            n_dense=int(raw.get("n_dense", 20)),
            bm25=Bm25Params(
                k1=float(bm25_raw.get("k1", 1.5)),
                b=float(bm25_raw.get("b", 0.75)),
            ),
            chunking=ChunkingConfig(
                chunk_size=int(chunking_raw.get("chunk_size", 500)),
                overlap=int(chunking_raw.get("overlap", 0)),
            ),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _profiles_from_dict(raw: dict) -> dict[DomainLabel, DomainProfile]:
    profiles = dict(DEFAULT_PROFILES)
    for domain_raw, override in raw.items():
        try:
            domain = DomainLabel(domain_raw.strip().lower())
        except ValueError as exc:
            raise ConfigError(f"profiles: unknown domain {domain_raw!r}") from exc
        if isinstance(override, str):
            override = {"dynamism": override}
        if not isinstance(override, dict):
            raise ConfigError(f"profiles.{domain.value} must be a string or object")
        base = profiles[domain]
        try:
            dynamism = Dynamism.parse(override.get("dynamism", base.default_dynamism.value))
        except ValueError as exc:
            raise ConfigError(f"profiles.{domain.value}: unknown dynamism") from exc
        profiles[domain] = DomainProfile(
            domain=domain,
            default_dynamism=dynamism,
            kg_priority=bool(override.get("kg_priority", base.kg_priority)),
        )
    return profiles


def config_from_dict(raw: dict) -> AppConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    threshold_raw = raw.get("threshold", "high")
    try:
        threshold = ConfidenceTier.parse(threshold_raw)
    except ValueError as exc:
        raise ConfigError(f"threshold must be low/medium/high, got {threshold_raw!r}") from exc
    backends = raw.get("backends") or {}
    if not isinstance(backends, dict):
        raise ConfigError("backends must be an object")
    try:
        worker_count = int(raw.get("worker_count", 1))
    except (TypeError, ValueError) as exc:
        raise ConfigError("worker_count must be an integer") from exc
    return AppConfig(
        retrieval=_retrieval_from_dict(raw.get("retrieval") or {}),
        threshold=threshold,
        chat=_backend_from_dict(backends.get("chat") or {}, "chat"),
        embedding=_backend_from_dict(backends.get("embedding") or {}, "embedding"),
        rerank=_backend_from_dict(backends.get("rerank") or {}, "rerank"),
        judge=_backend_from_dict(backends.get("judge") or {}, "judge"),
        kg_store_path=raw.get("kg_store_path"),
        false_premise_response=raw.get("false_premise_response", DEFAULT_FALSE_PREMISE_RESPONSE),
        profiles=_profiles_from_dict(raw.get("profiles") or {}),
        worker_count=worker_count,
    )


def _apply_env_overrides(config: AppConfig, env: dict[str, str]) -> AppConfig:
    overrides = {}
    for name, var in _ENV_URL_VARS.items():
        value = env.get(var)
        if value:
            overrides[name] = replace(getattr(config, name), url=value)
    return replace(config, **overrides) if overrides else config


def load_config(path: str | Path | None, env: dict[str, str] | None = None) -> AppConfig:
    """Load the config file (defaults when path is None) and apply env overrides."""
    env = os.environ if env is None else env
    if path is None:
        return _apply_env_overrides(AppConfig(), dict(env))
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return _apply_env_overrides(config_from_dict(raw), dict(env))
