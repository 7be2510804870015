"""Per-query pipeline state, intent routing, and answer assembly.

One worker handles one in-flight query. The state object is append-only while
the query runs and serializes to a JSON snapshot that replays to the identical
final answer: `optimize_answer` is a pure function of the state.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterator, Mapping, Sequence

from .errors import OrchestratorError, ProviderError
from .grounding import (
    ABSTENTION_MARKER,
    GroundedAnswer,
    GroundingConfig,
    grounded_generate,
)
from .retrieval import IndexHandle, Snippet
from .t2s import SchemaContext, T2sResult, run_with_retry

logger = logging.getLogger(__name__)

PRIMARY_ROUTES = ("documents", "sql", "plugin", "chart", "web_search")

_MARKER_RE = re.compile(r"\s*\[(\d+)\]")


@dataclass
class Route:
    primary: str
    flags: set[str] = field(default_factory=set)
    secondary: str | None = None

    def __post_init__(self) -> None:
        if self.primary not in PRIMARY_ROUTES:
            raise OrchestratorError(f"unknown route {self.primary!r}")

    def to_dict(self) -> dict:
        return {"primary": self.primary, "flags": sorted(self.flags), "secondary": self.secondary}


@dataclass
class Event:
    name: str
    payload: dict


@dataclass
class PipelineState:
    session_id: str
    query: str
    mode: str = "standard"
    dialogue_context: list[dict] = field(default_factory=list)
    retrieved_content: list[Snippet] = field(default_factory=list)
    plugin_results: list[tuple[str, dict]] = field(default_factory=list)
    visual_elements: list[dict] = field(default_factory=list)
    citation_traces: list[dict] = field(default_factory=list)
    route_taken: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    route: Route | None = None
    grounded: GroundedAnswer | None = None
    sql: T2sResult | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "session_id": self.session_id,
                "query": self.query,
                "mode": self.mode,
                "dialogue_context": self.dialogue_context,
                "retrieved_content": [s.to_dict() for s in self.retrieved_content],
                "plugin_results": [[pid, payload] for pid, payload in self.plugin_results],
                "visual_elements": self.visual_elements,
                "citation_traces": self.citation_traces,
                "route_taken": self.route_taken,
                "timings": self.timings,
                "warnings": self.warnings,
                "route": self.route.to_dict() if self.route else None,
                "grounded": self.grounded.to_dict() if self.grounded else None,
                "sql": self.sql.to_dict() if self.sql else None,
            },
            ensure_ascii=False,
            indent=2,
        )

    @classmethod
    def from_json(cls, payload: str) -> "PipelineState":
        rec = json.loads(payload)
        route = None
        if rec.get("route"):
            route = Route(
                primary=rec["route"]["primary"],
                flags=set(rec["route"].get("flags", [])),
                secondary=rec["route"].get("secondary"),
            )
        return cls(
            session_id=rec["session_id"],
            query=rec["query"],
            mode=rec.get("mode", "standard"),
            dialogue_context=list(rec.get("dialogue_context", [])),
            retrieved_content=[Snippet.from_dict(s) for s in rec.get("retrieved_content", [])],
            plugin_results=[(p[0], p[1]) for p in rec.get("plugin_results", [])],
            visual_elements=list(rec.get("visual_elements", [])),
            citation_traces=list(rec.get("citation_traces", [])),
            route_taken=list(rec.get("route_taken", [])),
            timings=dict(rec.get("timings", {})),
            warnings=list(rec.get("warnings", [])),
            route=route,
            grounded=GroundedAnswer.from_dict(rec["grounded"]) if rec.get("grounded") else None,
            sql=T2sResult.from_dict(rec["sql"]) if rec.get("sql") else None,
        )


@dataclass
class FinalAnswer:
    text: str
    references: list[dict]
    table: dict | None
    chart: dict | None
    narrative: str
    support: dict
    route: dict | None
    session_id: str
    query: str
    no_answer: bool = False

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "references": self.references,
            "table": self.table,
            "chart": self.chart,
            "narrative": self.narrative,
            "support": self.support,
            "route": self.route,
            "session_id": self.session_id,
            "query": self.query,
            "no_answer": self.no_answer,
        }


class SessionStore:
    """Dialogue turns per session plus optional state snapshots on disk."""

    def __init__(self, root: str | None = None):
        self.root = root
        self._turns: dict[str, list[dict]] = {}
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()
        if root:
            os.makedirs(root, exist_ok=True)

    def turns(self, session_id: str, window: int = 10) -> list[dict]:
        with self._lock:
            return list(self._turns.get(session_id, []))[-window:]

    def append_turn(self, session_id: str, query: str, answer_text: str) -> None:
        with self._lock:
            self._turns.setdefault(session_id, []).append({"query": query, "answer": answer_text})

    def save_state(self, state: PipelineState) -> str | None:
        if not self.root:
            return None
        with self._lock:
            n = self._counters.get(state.session_id, 0) + 1
            self._counters[state.session_id] = n
        session_dir = os.path.join(self.root, state.session_id)
        os.makedirs(session_dir, exist_ok=True)
        path = os.path.join(session_dir, f"turn-{n:04d}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(state.to_json())
        return path

    @staticmethod
    def load_state(path: str) -> PipelineState:
        with open(path, encoding="utf-8") as fh:
            return PipelineState.from_json(fh.read())


@dataclass
class OrchestratorConfig:
    relevance_floor: float = 0.2
    dialogue_window: int = 10
    websearch_k: int = 5
    max_sql_retries: int = 2
    allow_secondary_path: bool = False
    grounding: GroundingConfig = field(default_factory=GroundingConfig)
    clock: datetime | None = None


@dataclass
class ProviderBundle:
    embedder: object
    drafter: object
    reranker: object
    verifier: object
    router: object
    websearch: object
    sql_drafter: object | None = None
    plugins: dict[str, object] = field(default_factory=dict)


def render_answer(
    grounded: GroundedAnswer, snippets: Sequence[Snippet]
) -> tuple[str, list[str], list[dict]]:
    """Rewrite per-round [n] markers into a contiguous reference numbering.

    Returns (final_text, rendered sentence texts, reference entries). Markers
    that resolve to no snippet are stripped so every marker in the rendered
    text has a reference entry.
    """
    by_id = {s.chunk_id: s for s in snippets}
    order: list[str] = []
    for sentence in grounded.sentences:
        for chunk_id in sentence.citations:
            if chunk_id in by_id and chunk_id not in order:
                order.append(chunk_id)
    numbers = {chunk_id: i + 1 for i, chunk_id in enumerate(order)}
    # Map the round-local snippet index (marker value) to the final number.
    marker_to_number = {
        i + 1: numbers[s.chunk_id] for i, s in enumerate(snippets) if s.chunk_id in numbers
    }

    rendered: list[str] = []
    for sentence in grounded.sentences:
        if sentence.verdict == "abstained":
            rendered.append(ABSTENTION_MARKER)
            continue

        def sub(m: re.Match) -> str:
            n = marker_to_number.get(int(m.group(1)))
            return f" [{n}]" if n is not None else ""

        text = _MARKER_RE.sub(sub, sentence.text)
        rendered.append(" ".join(text.split()))

    references = []
    for chunk_id in order:
        snippet = by_id[chunk_id]
        references.append(
            {
                "n": numbers[chunk_id],
                "chunk_id": chunk_id,
                "doc_id": snippet.doc_id,
                "source_uri": snippet.source_uri,
                "start_char": snippet.start_char,
                "end_char": snippet.end_char,
                "snippet": snippet.text,
                "external": snippet.external,
            }
        )
    return " ".join(rendered), rendered, references


class Orchestrator:
    """Routes queries among the documents/sql/plugin/web-search paths and
    streams ordered events while building up the pipeline state."""

    def __init__(
        self,
        providers: ProviderBundle,
        config: OrchestratorConfig | None = None,
        index: IndexHandle | None = None,
        datasources: Mapping[str, tuple[SchemaContext, object]] | None = None,
        sessions: SessionStore | None = None,
    ):
        self.providers = providers
        self.config = config or OrchestratorConfig()
        self.index = index
        self.datasources = dict(datasources or {})
        self.sessions = sessions or SessionStore()

    # -- lifecycle ---------------------------------------------------------

    def init_state(self, session_id: str, query: str, mode: str = "standard") -> PipelineState:
        if not query.strip():
            raise OrchestratorError("query must be non-empty")
        return PipelineState(
            session_id=session_id,
            query=query,
            mode=mode,
            dialogue_context=self.sessions.turns(session_id, self.config.dialogue_window),
        )

    def route(self, state: PipelineState) -> Route:
        """Classify intent; provider failure falls back to document retrieval."""
        try:
            label = self.providers.router.route(state.query, state.dialogue_context)
            route = Route(primary=label.label, flags=set(label.flags), secondary=label.secondary)
        except ProviderError:
            logger.warning("router failed; defaulting to documents")
            route = Route(primary="documents")
        state.route = route
        return route

    # -- execution ---------------------------------------------------------

    def execute(self, state: PipelineState, route: Route) -> Iterator[Event]:
        """Run the routed path(s), yielding events in emission order."""
        if "image" in route.flags:
            yield self._event(state, "warning", {"message": "image analysis is not supported"})

        primary = route.primary
        if primary == "chart":
            # Chart is an overlay on a data route; treat as sql when a
            # datasource exists, else fall back to documents.
            primary = "sql" if self.datasources else "documents"
            route.flags.add("chart")

        if primary == "documents":
            yield from self._documents_path(state)
        elif primary == "web_search":
            yield from self._documents_path(state, force_web=True)
        elif primary == "sql":
            yield from self._sql_path(state, route)
        elif primary == "plugin":
            yield from self._plugin_path(state, route)

        if self.config.allow_secondary_path and route.secondary == "documents" and primary != "documents":
            yield from self._documents_path(state)

    def _event(self, state: PipelineState, name: str, payload: dict) -> Event:
        state.route_taken.append(name)
        return Event(name, payload)

    def _documents_path(self, state: PipelineState, force_web: bool = False) -> Iterator[Event]:
        t0 = time.perf_counter()
        snippets: list[Snippet] = []
        if self.index is not None and not force_web:
            candidates = self.index.hybrid_retrieve(state.query)
            snippets = self.index.rerank_and_select(state.query, candidates, self.providers.reranker)
        state.timings["retrieve"] = time.perf_counter() - t0

        insufficient = not snippets or max(s.score for s in snippets) < self.config.relevance_floor
        if insufficient or force_web:
            try:
                results = self.providers.websearch.search(state.query, self.config.websearch_k)
            except ProviderError as exc:
                results = []
                state.warnings.append(f"web search failed: {exc}")
                yield self._event(state, "warning", {"message": f"web search failed: {exc}"})
            web_snippets = [
                Snippet(
                    chunk_id=f"web-{i + 1}",
                    doc_id=f"web-{i + 1}",
                    seq=0,
                    text=r.snippet,
                    start_char=0,
                    end_char=len(r.snippet),
                    score=0.0,
                    source_uri=r.url,
                    external=True,
                )
                for i, r in enumerate(results)
            ]
            if web_snippets:
                snippets = list(snippets) + web_snippets
                message = "internal retrieval was insufficient; merged external web results"
                state.warnings.append(message)
                yield self._event(state, "warning", {"message": message})

        state.retrieved_content.extend(snippets)

        t0 = time.perf_counter()
        grounded = grounded_generate(
            state.query,
            snippets,
            GroundingConfig(
                max_rounds=self.config.grounding.max_rounds,
                support_threshold=self.config.grounding.support_threshold,
                mode=state.mode,
            ),
            self.providers.drafter,
            self.providers.verifier,
        )
        state.timings["generate"] = time.perf_counter() - t0
        state.grounded = grounded
        for sentence in grounded.sentences:
            for chunk_id in sentence.citations:
                state.citation_traces.append(
                    {
                        "sentence_span": [sentence.start, sentence.end],
                        "chunk_id": chunk_id,
                        "score": sentence.score,
                    }
                )

        _, rendered, references = render_answer(grounded, snippets)
        for i, text in enumerate(rendered):
            yield self._event(state, "token", {"text": text + (" " if i < len(rendered) - 1 else ""), "i": i})
        for ref in references:
            yield self._event(state, "citation", ref)

    def _pick_datasource(self, route: Route) -> tuple[str, SchemaContext, object]:
        if not self.datasources:
            raise OrchestratorError("no datasource registered for sql route")
        for flag in route.flags:
            if flag.startswith("datasource:"):
                name = flag.split(":", 1)[1]
                if name not in self.datasources:
                    raise OrchestratorError(f"unknown datasource {name!r}")
                schema, executor = self.datasources[name]
                return name, schema, executor
        name = sorted(self.datasources)[0]
        schema, executor = self.datasources[name]
        return name, schema, executor

    def _sql_path(self, state: PipelineState, route: Route) -> Iterator[Event]:
        drafter = self.providers.sql_drafter or self.providers.drafter
        name, schema, executor = self._pick_datasource(route)
        t0 = time.perf_counter()
        result = run_with_retry(
            question=state.query,
            schema=schema,
            executor=executor,
            llm_provider=drafter,
            max_retries=self.config.max_sql_retries,
            clock=self.config.clock,
            history=[t["query"] for t in state.dialogue_context],
        )
        state.timings["sql"] = time.perf_counter() - t0
        state.sql = result

        yield self._event(
            state,
            "sql_trace",
            {
                "datasource": name,
                "final": result.final,
                "attempts": [
                    {
                        "round": a.round,
                        "sql": a.sql_text,
                        "validation": a.validation,
                        "error": a.error_message,
                    }
                    for a in result.attempts
                ],
            },
        )
        for message in result.warnings:
            state.warnings.append(message)
            yield self._event(state, "warning", {"message": message})
        if result.table is not None:
            yield self._event(state, "table", result.table.to_dict())
        if result.chart.kind != "none" and result.table is not None:
            chart_payload = {**result.chart.to_dict(), "data": result.table.to_dict()}
            state.visual_elements.append(chart_payload)
            yield self._event(state, "chart", chart_payload)
        for i, sentence in enumerate(_split_narrative(result.narrative)):
            yield self._event(state, "token", {"text": sentence, "i": i})

    def _plugin_path(self, state: PipelineState, route: Route) -> Iterator[Event]:
        plugin_id = None
        for flag in route.flags:
            if flag.startswith("plugin:"):
                plugin_id = flag.split(":", 1)[1]
                break
        if plugin_id is None or plugin_id not in self.providers.plugins:
            raise OrchestratorError(f"plugin {plugin_id!r} is not registered")
        plugin = self.providers.plugins[plugin_id]
        payload = plugin.call({"query": state.query, "session_id": state.session_id})
        state.plugin_results.append((plugin_id, payload))
        summary = f"Plugin {plugin_id} returned: {json.dumps(payload, sort_keys=True, ensure_ascii=False)}"
        yield self._event(state, "token", {"text": summary, "i": 0})

    # -- assembly ----------------------------------------------------------

    def optimize_answer(self, state: PipelineState) -> FinalAnswer:
        """Merge grounded text, table, chart, and citations into one payload.

        Pure function of the state: replaying a persisted state reproduces
        the identical answer.
        """
        text = ""
        references: list[dict] = []
        support = {"mode": state.mode, "support_rate": None, "rounds_used": 0, "abstained": 0}
        if state.grounded is not None:
            text, _, references = render_answer(state.grounded, state.retrieved_content)
            support = {
                "mode": state.grounded.mode,
                "support_rate": state.grounded.support_rate,
                "rounds_used": state.grounded.rounds_used,
                "abstained": state.grounded.abstained_count,
            }

        table = None
        chart = None
        narrative = ""
        if state.sql is not None:
            narrative = state.sql.narrative
            if state.sql.table is not None:
                table = state.sql.table.to_dict()
            if state.sql.chart.kind != "none":
                chart = state.sql.chart.to_dict()
        if state.plugin_results:
            plugin_bits = [
                f"Plugin {pid} returned: {json.dumps(payload, sort_keys=True, ensure_ascii=False)}"
                for pid, payload in state.plugin_results
            ]
            narrative = " ".join([narrative, *plugin_bits]).strip()

        no_answer = not text and table is None and not narrative
        if no_answer:
            text = "No answer could be produced for this query."
        return FinalAnswer(
            text=text or narrative,
            references=references,
            table=table,
            chart=chart,
            narrative=narrative,
            support=support,
            route=state.route.to_dict() if state.route else None,
            session_id=state.session_id,
            query=state.query,
            no_answer=no_answer,
        )


def _split_narrative(narrative: str) -> list[str]:
    from .grounding import segment_sentences

    if not narrative:
        return []
    spans = segment_sentences(narrative)
    out = []
    for i, (s, e) in enumerate(spans):
        out.append(narrative[s:e] + (" " if i < len(spans) - 1 else ""))
    return out


def replay_final_answer(state_path: str, orchestrator: Orchestrator | None = None) -> FinalAnswer:
    """Rebuild the final answer from a persisted state snapshot."""
    state = SessionStore.load_state(state_path)
    orch = orchestrator or Orchestrator(
        providers=ProviderBundle(None, None, None, None, None, None)
    )
    return orch.optimize_answer(state)
