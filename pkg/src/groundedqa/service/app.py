"""FastAPI application: ingestion, datasource registration, health, and the
SSE query endpoint.

One orchestrator worker runs per stream; events never interleave across
streams because each request owns its own generator and seq counter.

Note: no ``from __future__ import annotations`` here -- FastAPI must see real
class objects (not strings) for the request models defined inside create_app.
"""

import os
import sqlite3
import time
from dataclasses import dataclass
from datetime import datetime
from typing import Iterator

from ..errors import GroundedQAError, IngestError, OrchestratorError
from ..ingest import ChunkPolicy, ChunkStore, Document, ingest_documents, read_documents
from ..orchestrator import Orchestrator, OrchestratorConfig, ProviderBundle, Route, SessionStore
from ..providers import (
    CannedWebSearch,
    ExtractiveDrafter,
    HashEmbedder,
    HttpDrafter,
    HttpEmbedder,
    HttpReranker,
    HttpRouter,
    HttpVerifier,
    HttpWebSearch,
    LexicalReranker,
    LexicalVerifier,
    ProviderConfig,
    RuleRouter,
    TemplateSqlDrafter,
)
from ..retrieval import IndexHandle, build_indexes
from ..t2s.fixtures import FIXTURES
from ..t2s.schema import ColumnInfo, SchemaContext, SqliteExecutor, TableInfo
from .config import AppConfig, load_config
from .events import SseEvent, format_sse

STORE_FILENAME = "chunks.jsonl"


def _mock_bundle(config: AppConfig) -> ProviderBundle:
    return ProviderBundle(
        embedder=HashEmbedder(config.providers.embed_dim),
        drafter=ExtractiveDrafter(),
        reranker=LexicalReranker(),
        verifier=LexicalVerifier(),
        router=RuleRouter(enable_secondary=config.service.allow_secondary_path),
        websearch=CannedWebSearch(),
        sql_drafter=TemplateSqlDrafter(),
    )


def _http_bundle(config: AppConfig) -> ProviderBundle:
    endpoints = config.providers.endpoints

    def cfg(kind: str) -> ProviderConfig:
        if kind not in endpoints:
            raise OrchestratorError(f"providers.mode=http requires {kind}_endpoint")
        return ProviderConfig(
            kind=kind, mode="http", endpoint=endpoints[kind], timeout_ms=config.providers.timeout_ms
        )

    return ProviderBundle(
        embedder=HttpEmbedder(cfg("embed"), d=config.providers.embed_dim),
        drafter=HttpDrafter(cfg("draft")),
        reranker=HttpReranker(cfg("rerank")),
        verifier=HttpVerifier(cfg("verify")),
        router=HttpRouter(cfg("route")),
        websearch=HttpWebSearch(cfg("websearch")),
        sql_drafter=HttpDrafter(cfg("draft")),
    )


def _schema_from_sqlite(conn: sqlite3.Connection, dialect: str, authorized, units) -> SchemaContext:
    tables = []
    names = [
        r[0]
        for r in conn.execute(
            "SELECT name FROM sqlite_master WHERE type='table' ORDER BY name"
        ).fetchall()
    ]
    units = {k.lower(): v for k, v in (units or {}).items()}
    for name in names:
        cols = []
        for _, col_name, col_type, *_ in conn.execute(f"PRAGMA table_info({name})").fetchall():
            cols.append(ColumnInfo(col_name, col_type or "TEXT", units.get(col_name.lower())))
        sample = [list(r) for r in conn.execute(f"SELECT * FROM {name} LIMIT 3").fetchall()]
        tables.append(TableInfo(name, tuple(cols), tuple(tuple(r) for r in sample)))
    return SchemaContext(
        tables=tables,
        dialect=dialect,
        authorized_columns=set(authorized or ()),
    )


@dataclass
class Datasource:
    name: str
    schema: SchemaContext
    executor: object
    dialect: str = "generic"


class AppContext:
    """All service state: config, providers, index, datasources, sessions."""

    def __init__(self, config: AppConfig | None = None, data_dir: str | None = None):
        self.config = config or load_config(None)
        self.data_dir = data_dir or self.config.service.data_dir
        mode = self.config.providers.mode
        self.providers = _http_bundle(self.config) if mode == "http" else _mock_bundle(self.config)
        self.index: IndexHandle | None = None
        self.datasources: dict[str, Datasource] = {}
        self.sessions = SessionStore(os.path.join(self.data_dir, "sessions") if self.data_dir else None)

    # -- wiring ------------------------------------------------------------

    @property
    def orchestrator(self) -> Orchestrator:
        return Orchestrator(
            providers=self.providers,
            config=OrchestratorConfig(
                relevance_floor=self.config.service.relevance_floor,
                dialogue_window=self.config.service.dialogue_window,
                max_sql_retries=self.config.t2s.max_retries,
                allow_secondary_path=self.config.service.allow_secondary_path,
                grounding=self.config.grounding,
                clock=datetime.fromisoformat(self.config.t2s.clock),
            ),
            index=self.index,
            datasources={ds.name: (ds.schema, ds.executor) for ds in self.datasources.values()},
            sessions=self.sessions,
        )

    # -- ingestion ---------------------------------------------------------

    def ingest(
        self,
        corpus_path: str | None = None,
        docs: list[dict] | None = None,
        window_tokens: int | None = None,
        overlap_tokens: int | None = None,
    ) -> dict:
        if (corpus_path is None) == (docs is None):
            raise IngestError("provide exactly one of corpus_path or inline docs")
        policy = ChunkPolicy(
            window_tokens=window_tokens or self.config.chunking.window_tokens,
            overlap_tokens=(
                overlap_tokens if overlap_tokens is not None else self.config.chunking.overlap_tokens
            ),
            tokenizer_id=self.config.chunking.tokenizer_id,
        )
        if corpus_path is not None:
            documents = read_documents(corpus_path)
        else:
            documents = []
            seen: dict[str, int] = {}
            for i, rec in enumerate(docs or []):
                doc = Document(
                    doc_id=str(rec.get("doc_id", "")),
                    title=str(rec.get("title", "")),
                    text=str(rec.get("text", "")),
                    source_uri=str(rec.get("source_uri", "")),
                    meta={str(k): str(v) for k, v in (rec.get("meta") or {}).items()},
                )
                if not doc.doc_id:
                    raise IngestError(f"inline doc {i}: doc_id required")
                if doc.doc_id in seen:
                    raise IngestError(
                        f"duplicate doc_id {doc.doc_id!r}: inline docs {seen[doc.doc_id]} and {i}"
                    )
                seen[doc.doc_id] = i
                documents.append(doc)
        os.makedirs(self.data_dir, exist_ok=True)
        store_path = os.path.join(self.data_dir, STORE_FILENAME)
        stats = ingest_documents(documents, policy, store_path)
        store = ChunkStore.load(store_path)
        self.index = build_indexes(
            store,
            self.providers.embedder,
            self.config.retrieval,
            doc_uris={d.doc_id: d.source_uri for d in documents},
        )
        return {
            "stats": stats.to_dict(),
            "manifest": self.index.manifest(policy.window_tokens, policy.overlap_tokens),
        }

    # -- datasources ---------------------------------------------------------

    def register_datasource(
        self,
        name: str,
        connection: str,
        dialect: str = "generic",
        authorized_columns: list[str] | None = None,
        unit_annotations: dict[str, str] | None = None,
    ) -> dict:
        if name in self.datasources:
            raise KeyError(name)
        if connection.startswith("fixture:"):
            fixture = connection.split(":", 1)[1]
            if fixture not in FIXTURES:
                raise OrchestratorError(f"unknown fixture {fixture!r}")
            schema, executor = FIXTURES[fixture]()
        elif connection.startswith("sqlite:///"):
            path = connection[len("sqlite:///") :]
            conn = sqlite3.connect(path, check_same_thread=False)
            schema = _schema_from_sqlite(conn, dialect, authorized_columns, unit_annotations)
            executor = SqliteExecutor(conn)
        else:
            raise OrchestratorError(f"unsupported connection string {connection!r}")
        self.datasources[name] = Datasource(name, schema, executor, dialect)
        if isinstance(self.providers.router, RuleRouter):
            self.providers.router.register_tables(schema.table_names | schema.all_columns)
        return {"name": name, "tables": sorted(schema.table_names)}

    # -- query streaming -----------------------------------------------------

    def event_stream(
        self, session_id: str, query: str, mode: str = "standard", datasource: str | None = None
    ) -> Iterator[SseEvent]:
        """Produce one query's ordered event stream (route first, one terminal)."""
        seq = 0

        def emit(name: str, payload: dict) -> SseEvent:
            nonlocal seq
            seq += 1
            return SseEvent(event=name, data=payload, seq=seq)

        orch = self.orchestrator
        try:
            state = orch.init_state(session_id, query, mode)
        except GroundedQAError as exc:
            yield emit("route", {"primary": "documents", "flags": [], "secondary": None})
            yield emit("error", {"message": str(exc)})
            return

        try:
            if datasource is not None:
                route = Route(primary="sql", flags={f"datasource:{datasource}"})
                state.route = route
                yield emit("route", route.to_dict())
                if datasource not in self.datasources:
                    yield emit("error", {"message": f"unknown datasource {datasource!r}"})
                    return
            else:
                route = orch.route(state)
                yield emit("route", route.to_dict())
            for event in orch.execute(state, route):
                yield emit(event.name, event.payload)
            answer = orch.optimize_answer(state)
            self.sessions.append_turn(session_id, query, answer.text)
            self.sessions.save_state(state)
            yield emit("done", answer.to_dict())
        except Exception as exc:  # surface as a terminal error event
            yield emit("error", {"message": str(exc)})

    def sse_body(self, events: Iterator[SseEvent]) -> Iterator[bytes]:
        heartbeat = self.config.service.heartbeat_s
        last = time.monotonic()
        for event in events:
            now = time.monotonic()
            if now - last >= heartbeat:
                yield b": keep-alive\n\n"
            yield format_sse(event).encode("utf-8")
            last = time.monotonic()

    def health(self) -> dict:
        if self.index is None:
            return {"status": "empty", "index_manifest": None}
        return {
            "status": "ready",
            "index_manifest": self.index.manifest(
                self.config.chunking.window_tokens, self.config.chunking.overlap_tokens
            ),
        }


def create_app(ctx: AppContext | None = None):
    from fastapi import FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse, StreamingResponse
    from pydantic import BaseModel, Field

    ctx = ctx or AppContext()
    app = FastAPI(title="groundedqa", version="0.1.0")
    app.state.ctx = ctx

    class QueryRequest(BaseModel):
        session_id: str = Field(min_length=1)
        query: str = Field(min_length=1)
        mode: str = "standard"
        datasource: str | None = None

    class IngestRequest(BaseModel):
        corpus_path: str | None = None
        docs: list[dict] | None = None
        window_tokens: int | None = None
        overlap_tokens: int | None = None

    class DatasourceRequest(BaseModel):
        name: str = Field(min_length=1)
        connection: str = Field(min_length=1)
        dialect: str = "generic"
        authorized_columns: list[str] | None = None
        unit_annotations: dict[str, str] | None = None

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.post("/v1/query")
    def query(req: QueryRequest):
        if req.mode not in ("standard", "strict"):
            return JSONResponse(status_code=400, content={"error": f"unknown mode {req.mode!r}"})
        events = ctx.event_stream(req.session_id, req.query, req.mode, req.datasource)
        return StreamingResponse(ctx.sse_body(events), media_type="text/event-stream")

    @app.post("/v1/ingest")
    def ingest(req: IngestRequest):
        try:
            return ctx.ingest(req.corpus_path, req.docs, req.window_tokens, req.overlap_tokens)
        except GroundedQAError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/v1/datasources")
    def datasources(req: DatasourceRequest):
        try:
            return ctx.register_datasource(
                req.name, req.connection, req.dialect, req.authorized_columns, req.unit_annotations
            )
        except KeyError:
            return JSONResponse(
                status_code=409, content={"error": f"datasource {req.name!r} already registered"}
            )
        except GroundedQAError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/v1/health")
    def health():
        return ctx.health()

    return app
