"""INI-style configuration with one section per subsystem."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from ..errors import ConfigurationError
from ..grounding import GroundingConfig
from ..ingest import ChunkPolicy
from ..retrieval import RetrievalConfig


@dataclass
class T2sConfig:
    max_retries: int = 2
    row_limit: int = 1000
    clock: str = "2025-06-15T00:00:00"


@dataclass
class ProvidersConfig:
    mode: str = "mock"
    embed_dim: int = 64
    endpoints: dict[str, str] = field(default_factory=dict)
    timeout_ms: int = 10000


@dataclass
class ServiceSettings:
    host: str = "127.0.0.1"
    port: int = 8080
    heartbeat_s: float = 15.0
    relevance_floor: float = 0.2
    data_dir: str = "data"
    dialogue_window: int = 10
    allow_secondary_path: bool = False


@dataclass
class AppConfig:
    chunking: ChunkPolicy = field(default_factory=ChunkPolicy)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    grounding: GroundingConfig = field(default_factory=GroundingConfig)
    t2s: T2sConfig = field(default_factory=T2sConfig)
    providers: ProvidersConfig = field(default_factory=ProvidersConfig)
    service: ServiceSettings = field(default_factory=ServiceSettings)


def _get(parser: configparser.ConfigParser, section: str, option: str, cast, default):
    if not parser.has_option(section, option):
        return default
    raw = parser.get(section, option)
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {option}: bad value {raw!r}") from exc


def load_config(path: str | None = None) -> AppConfig:
    """Read the config file (missing file or None -> all defaults)."""
    parser = configparser.ConfigParser()
    if path:
        read = parser.read(path, encoding="utf-8")
        if not read:
            raise ConfigurationError(f"config file not found: {path}")

    chunking = ChunkPolicy(
        window_tokens=_get(parser, "chunking", "window", int, 1000),
        overlap_tokens=_get(parser, "chunking", "overlap", int, 150),
        tokenizer_id=_get(parser, "chunking", "tokenizer", str, "simple"),
    )
    retrieval = RetrievalConfig(
        embed_dim=_get(parser, "retrieval", "embed_dim", int, 64),
        M=_get(parser, "retrieval", "m", int, 16),
        ef_construction=_get(parser, "retrieval", "ef_construction", int, 200),
        ef_search=_get(parser, "retrieval", "ef_search", int, 100),
        k1=_get(parser, "retrieval", "k1", float, 1.2),
        b=_get(parser, "retrieval", "b", float, 0.75),
        rrf_c=_get(parser, "retrieval", "rrf_c", int, 60),
        n_candidates=_get(parser, "retrieval", "n_candidates", int, 200),
        top_snippets=_get(parser, "retrieval", "top_snippets", int, 50),
        seed=_get(parser, "retrieval", "seed", int, 0),
    )
    grounding = GroundingConfig(
        max_rounds=_get(parser, "grounding", "max_rounds", int, 3),
        support_threshold=_get(parser, "grounding", "support_threshold", float, 0.5),
        mode=_get(parser, "grounding", "mode", str, "standard"),
    )
    t2s = T2sConfig(
        max_retries=_get(parser, "t2s", "max_retries", int, 2),
        row_limit=_get(parser, "t2s", "row_limit", int, 1000),
        clock=_get(parser, "t2s", "clock", str, "2025-06-15T00:00:00"),
    )
    endpoints = {}
    if parser.has_section("providers"):
        for key, value in parser.items("providers"):
            if key.endswith("_endpoint"):
                endpoints[key[: -len("_endpoint")]] = value
    providers = ProvidersConfig(
        mode=_get(parser, "providers", "mode", str, "mock"),
        embed_dim=_get(parser, "providers", "embed_dim", int, retrieval.embed_dim),
        endpoints=endpoints,
        timeout_ms=_get(parser, "providers", "timeout_ms", int, 10000),
    )
    service = ServiceSettings(
        host=_get(parser, "service", "host", str, "127.0.0.1"),
        port=_get(parser, "service", "port", int, 8080),
        heartbeat_s=_get(parser, "service", "heartbeat_s", float, 15.0),
        relevance_floor=_get(parser, "service", "relevance_floor", float, 0.2),
        data_dir=_get(parser, "service", "data_dir", str, "data"),
        dialogue_window=_get(parser, "service", "dialogue_window", int, 10),
        allow_secondary_path=_get(parser, "service", "allow_secondary_path", bool, False),
    )
    return AppConfig(chunking, retrieval, grounding, t2s, providers, service)
