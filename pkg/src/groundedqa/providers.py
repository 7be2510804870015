"""Provider interfaces with deterministic local mocks and optional HTTP clients.

Six provider kinds feed the pipeline: embed, draft (LLM), rerank, verify,
route, and websearch. Every kind ships a pure, deterministic mock so the whole
system runs and tests offline; the HTTP clients speak a small shared JSON wire
format so a single adapter serves any backend.
"""

from __future__ import annotations

import json
import re
import threading
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, ProviderError, ScriptExhaustedError
from .text import STOP_WORDS, content_terms, tokenize

PROVIDER_KINDS = ("embed", "draft", "rerank", "verify", "route", "websearch")


@dataclass(frozen=True)
class ProviderConfig:
    kind: str
    mode: str = "mock"
    endpoint: str | None = None
    timeout_ms: int = 10_000
    max_retries_transport: int = 2

    def __post_init__(self) -> None:
        if self.kind not in PROVIDER_KINDS:
            raise ConfigurationError(f"unknown provider kind: {self.kind!r}")
        if self.mode not in ("mock", "http"):
            raise ConfigurationError(f"unknown provider mode: {self.mode!r}")
        if self.mode == "http" and not self.endpoint:
            raise ConfigurationError(f"http provider {self.kind!r} requires an endpoint")


# ---------------------------------------------------------------------------
# Embedding
# ---------------------------------------------------------------------------

def deterministic_embed(text: str, d: int = 64) -> np.ndarray:
    """Feature-hash token counts into ``d`` buckets and L2-normalize.

    Pure function of the text: identical inputs embed identically across
    processes. Texts with no tokens fall back to the first basis vector.
    """
    if d < 8:
        raise ConfigurationError(f"embedding dimension must be >= 8, got {d}")
    vec = np.zeros(d, dtype=np.float64)
    for tok in tokenize(text):
        vec[zlib.crc32(tok.lower().encode("utf-8")) % d] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


class HashEmbedder:
    """Deterministic stand-in for a large-scale embedding model."""

    def __init__(self, d: int = 64):
        self.d = d

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([deterministic_embed(t, self.d) for t in texts]) if texts else np.zeros((0, self.d))


# ---------------------------------------------------------------------------
# Drafting (LLM)
# ---------------------------------------------------------------------------

class ScriptedLLM:
    """Returns canned responses in order and records every prompt it saw.

    The prompt log doubles as an invocation counter for bounded-retry and
    bounded-regeneration assertions.
    """

    def __init__(self, responses: Sequence[str], repeat_last: bool = False):
        self._responses = list(responses)
        self._repeat_last = repeat_last
        self._lock = threading.Lock()
        self.prompts: list[str] = []

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def generate(self, prompt: str) -> str:
        with self._lock:
            idx = len(self.prompts)
            self.prompts.append(prompt)
            if idx < len(self._responses):
                return self._responses[idx]
            if self._repeat_last and self._responses:
                return self._responses[-1]
            raise ScriptExhaustedError(
                f"scripted provider exhausted after {len(self._responses)} responses"
            )


_SNIPPET_LINE_RE = re.compile(r"^SNIPPET \[1\]: (?P<text>.*)$", re.MULTILINE)


def _first_snippet_sentence(prompt: str) -> str:
    m = _SNIPPET_LINE_RE.search(prompt)
    if not m:
        return "No snippet was provided"
    text = m.group("text").strip()
    cut = text.find(". ")
    if cut != -1:
        text = text[:cut]
    return text.rstrip(".!? ")


class ExtractiveDrafter:
    """Copies the first sentence of the top snippet verbatim, cited as [1]."""

    def __init__(self) -> None:
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def generate(self, prompt: str) -> str:
        with self._lock:
            self.prompts.append(prompt)
        return f"{_first_snippet_sentence(prompt)} [1]."


class AdversarialDrafter:
    """Extractive sentence plus one uncited fabricated sentence, every round."""

    def __init__(self, fabrication: str = "Quantum llamas invented the zorgometer yesterday."):
        self.fabrication = fabrication
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def generate(self, prompt: str) -> str:
        with self._lock:
            self.prompts.append(prompt)
        return f"{_first_snippet_sentence(prompt)} [1]. {self.fabrication}"


class FailingDrafter:
    def generate(self, prompt: str) -> str:
        raise ProviderError("draft provider unavailable")


_TABLE_LINE_RE = re.compile(r"^TABLE (?P<name>\w+) \((?P<cols>.*)\)$", re.MULTILINE)


class TemplateSqlDrafter:
    """Deterministic SQL mock: reads the first table from the prompt's schema
    block and emits a grouped count over its first text column."""

    def __init__(self) -> None:
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def generate(self, prompt: str) -> str:
        with self._lock:
            self.prompts.append(prompt)
        m = _TABLE_LINE_RE.search(prompt)
        if not m:
            return "SELECT 1 AS answer"
        table = m.group("name")
        text_col = None
        first_col = None
        for piece in m.group("cols").split(","):
            parts = piece.split()
            if not parts:
                continue
            if first_col is None:
                first_col = parts[0]
            if text_col is None and len(parts) > 1 and "text" in parts[1].lower():
                text_col = parts[0]
        if text_col:
            return (
                f"SELECT {text_col}, COUNT(*) AS n FROM {table} "
                f"GROUP BY {text_col} ORDER BY {text_col}"
            )
        return f"SELECT {first_col} FROM {table} ORDER BY {first_col} LIMIT 5"


# ---------------------------------------------------------------------------
# Scoring (rerank / verify)
# ---------------------------------------------------------------------------

def lexical_overlap_score(left: str, right: str) -> float:
    """|content terms shared| / |content terms of ``left``|, in [0, 1].

    Stop words (see text.STOPWORDS_VERSION) are removed before comparing; a
    left side with no content terms scores 0.
    """
    left_terms = content_terms(left)
    if not left_terms:
        return 0.0
    return len(left_terms & content_terms(right)) / len(left_terms)


class IdentityReranker:
    """Echoes the fused scores so rerank order equals fusion order."""

    def rerank(self, query: str, passages: Sequence[str], fused: Sequence[float] | None = None) -> list[float]:
        if fused is not None:
            return [float(s) for s in fused]
        return [1.0 / (i + 1) for i in range(len(passages))]


class LexicalReranker:
    """Scores each passage by content-term overlap with the query."""

    def rerank(self, query: str, passages: Sequence[str], fused: Sequence[float] | None = None) -> list[float]:
        return [lexical_overlap_score(query, p) for p in passages]


class FailingReranker:
    def rerank(self, query: str, passages: Sequence[str], fused: Sequence[float] | None = None) -> list[float]:
        raise ProviderError("rerank provider unavailable")


class LexicalVerifier:
    """Scores a claim against each passage by content-term overlap."""

    def verify(self, claim: str, passages: Sequence[str]) -> list[float]:
        return [lexical_overlap_score(claim, p) for p in passages]


class FailingVerifier:
    def verify(self, claim: str, passages: Sequence[str]) -> list[float]:
        raise ProviderError("verify provider unavailable")


# ---------------------------------------------------------------------------
# Routing
# ---------------------------------------------------------------------------

@dataclass
class RouteLabel:
    label: str
    flags: set[str] = field(default_factory=set)
    secondary: str | None = None


CHART_VERBS = frozenset({"plot", "chart", "graph", "visualize", "visualise"})
IMAGE_WORDS = frozenset({"image", "picture", "photo", "screenshot"})
DOCUMENT_WORDS = frozenset({"document", "documents", "policy", "policies", "report", "docs", "contract"})


class RuleRouter:
    """Keyword router: table/metric mentions go to sql, plugin verbs to their
    plugin, chart verbs set a flag on top of the data route, everything else
    goes to document retrieval."""

    def __init__(
        self,
        tables: Iterable[str] = (),
        plugin_verbs: Mapping[str, str] | None = None,
        enable_secondary: bool = False,
    ):
        self._lock = threading.Lock()
        self.tables = {t.lower() for t in tables}
        self.plugin_verbs = {k.lower(): v for k, v in (plugin_verbs or {}).items()}
        self.enable_secondary = enable_secondary

    def register_tables(self, names: Iterable[str]) -> None:
        with self._lock:
            self.tables.update(n.lower() for n in names)

    def route(self, query: str, context: Sequence[Mapping] = ()) -> RouteLabel:
        words = {t.lower() for t in tokenize(query)}
        flags: set[str] = set()
        if words & CHART_VERBS:
            flags.add("chart")
        if words & IMAGE_WORDS:
            flags.add("image")
        for verb, plugin_id in self.plugin_verbs.items():
            if verb in words:
                flags.add(f"plugin:{plugin_id}")
                return RouteLabel("plugin", flags)
        with self._lock:
            hits_sql = bool(words & self.tables)
        if hits_sql:
            secondary = "documents" if self.enable_secondary and words & DOCUMENT_WORDS else None
            return RouteLabel("sql", flags, secondary=secondary)
        return RouteLabel("documents", flags)


class FailingRouter:
    def route(self, query: str, context: Sequence[Mapping] = ()) -> RouteLabel:
        raise ProviderError("route provider unavailable")


# ---------------------------------------------------------------------------
# Web search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WebResult:
    title: str
    url: str
    snippet: str


class CannedWebSearch:
    """Deterministic web-search stand-in with a call spy."""

    def __init__(self, results: Sequence[WebResult] | None = None):
        self._results = list(results) if results is not None else None
        self._lock = threading.Lock()
        self.queries: list[str] = []

    @property
    def calls(self) -> int:
        return len(self.queries)

    def search(self, query: str, k: int = 5) -> list[WebResult]:
        with self._lock:
            self.queries.append(query)
        if self._results is not None:
            return self._results[:k]
        return [
            WebResult(
                title=f"Web result {i + 1} for {query}",
                url=f"https://example.org/search/{i + 1}",
                snippet=f"External summary {i + 1} about {query}.",
            )
            for i in range(k)
        ]


class FailingWebSearch:
    def search(self, query: str, k: int = 5) -> list[WebResult]:
        raise ProviderError("websearch provider unavailable")


# ---------------------------------------------------------------------------
# HTTP adapters
# ---------------------------------------------------------------------------

class _HttpJson:
    """POSTs JSON with a timeout and bounded transport retries.

    Failures surface as :class:`ProviderError`; the client never hangs past
    its timeout.
    """

    def __init__(self, config: ProviderConfig, transport=None):
        import httpx

        if config.mode != "http":
            raise ConfigurationError(f"{config.kind}: _HttpJson requires mode=http")
        self._config = config
        self._client = httpx.Client(
            timeout=config.timeout_ms / 1000.0,
            transport=transport,
        )

    def _post(self, payload: dict) -> dict:
        import httpx

        last_exc: Exception | None = None
        for _ in range(self._config.max_retries_transport + 1):
            try:
                resp = self._client.post(self._config.endpoint, json=payload)
                resp.raise_for_status()
                return resp.json()
            except (httpx.HTTPError, json.JSONDecodeError) as exc:
                last_exc = exc
        raise ProviderError(
            f"{self._config.kind} provider at {self._config.endpoint} failed: {last_exc}"
        ) from last_exc

    def close(self) -> None:
        self._client.close()


class HttpEmbedder(_HttpJson):
    def __init__(self, config: ProviderConfig, d: int = 64, transport=None):
        super().__init__(config, transport)
        self.d = d

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        data = self._post({"texts": list(texts)})
        return np.asarray(data["vectors"], dtype=np.float64)


class HttpDrafter(_HttpJson):
    def generate(self, prompt: str) -> str:
        return self._post({"prompt": prompt})["text"]


class HttpReranker(_HttpJson):
    def rerank(self, query: str, passages: Sequence[str], fused: Sequence[float] | None = None) -> list[float]:
        data = self._post({"query": query, "passages": list(passages)})
        return [float(s) for s in data["scores"]]


class HttpVerifier(_HttpJson):
    def verify(self, claim: str, passages: Sequence[str]) -> list[float]:
        data = self._post({"claim": claim, "passages": list(passages)})
        return [float(s) for s in data["scores"]]


class HttpRouter(_HttpJson):
    def route(self, query: str, context: Sequence[Mapping] = ()) -> RouteLabel:
        data = self._post({"query": query, "context": list(context)})
        return RouteLabel(data["label"], set(data.get("flags", [])))


class HttpWebSearch(_HttpJson):
    def search(self, query: str, k: int = 5) -> list[WebResult]:
        data = self._post({"query": query, "k": k})
        return [WebResult(r["title"], r["url"], r["snippet"]) for r in data["results"]]


class HttpPlugin:
    """Registered plugin endpoint: JSON envelope in, JSON payload out.

    Per-plugin timeout defaults to 10 s; failures surface as
    :class:`ProviderError` like every other provider.
    """

    def __init__(self, plugin_id: str, endpoint: str, timeout_ms: int = 10_000, transport=None):
        import httpx

        self.plugin_id = plugin_id
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout_ms / 1000.0, transport=transport)

    def call(self, envelope: Mapping) -> dict:
        import httpx

        try:
            resp = self._client.post(self.endpoint, json={"plugin_id": self.plugin_id, **envelope})
            resp.raise_for_status()
            return resp.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise ProviderError(f"plugin {self.plugin_id} at {self.endpoint} failed: {exc}") from exc


__all__ = [
    "PROVIDER_KINDS",
    "ProviderConfig",
    "deterministic_embed",
    "HashEmbedder",
    "ScriptedLLM",
    "ExtractiveDrafter",
    "AdversarialDrafter",
    "FailingDrafter",
    "lexical_overlap_score",
    "IdentityReranker",
    "LexicalReranker",
    "FailingReranker",
    "LexicalVerifier",
    "FailingVerifier",
    "RouteLabel",
    "RuleRouter",
    "FailingRouter",
    "WebResult",
    "CannedWebSearch",
    "FailingWebSearch",
    "HttpEmbedder",
    "HttpDrafter",
    "HttpReranker",
    "HttpVerifier",
    "HttpRouter",
    "HttpWebSearch",
    "HttpPlugin",
    "TemplateSqlDrafter",
    "STOP_WORDS",
]
