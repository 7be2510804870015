"""HTTP endpoints, SSE wire format, stream grammar, and session isolation."""

from __future__ import annotations

import json
import threading

import pytest
from fastapi.testclient import TestClient

from groundedqa.service import AppContext, check_stream, create_app, format_sse, parse_sse
from groundedqa.service.config import load_config
from groundedqa.service.events import SseEvent

DOCS = [
    {
        "doc_id": "d1",
        "title": "Policy",
        "text": "The retention policy keeps backups for ninety days. Old data is purged monthly.",
        "source_uri": "file:///policy",
        "meta": {},
    },
    {
        "doc_id": "d2",
        "title": "Logistics",
        "text": "Shipping is free for members. The warehouse is located in Reno.",
        "source_uri": "file:///logistics",
        "meta": {},
    },
]


@pytest.fixture()
def ctx():
    return AppContext(load_config(None), data_dir=None)


@pytest.fixture()
def client(ctx):
    app = create_app(ctx)
    with TestClient(app) as client:
        yield client


def stream_events(client, payload):
    with client.stream("POST", "/v1/query", json=payload) as resp:
        assert resp.status_code == 200
        assert resp.headers["content-type"].startswith("text/event-stream")
        body = "".join(resp.iter_text())
    return parse_sse(body)


class TestHealthAndIngest:
    def test_health_empty_before_ingest(self, client):
        data = client.get("/v1/health").json()
        assert data == {"status": "empty", "index_manifest": None}

    def test_ingest_then_health_ready(self, client):
        r = client.post("/v1/ingest", json={"docs": DOCS})
        assert r.status_code == 200
        assert r.json()["stats"]["docs"] == 2
        health = client.get("/v1/health").json()
        assert health["status"] == "ready"
        assert health["index_manifest"]["chunk_count"] == 2

    def test_ingest_requires_exactly_one_source(self, client):
        assert client.post("/v1/ingest", json={}).status_code == 400
        r = client.post("/v1/ingest", json={"docs": DOCS, "corpus_path": "x.jsonl"})
        assert r.status_code == 400

    def test_ingest_duplicate_doc_id_rejected(self, client):
        r = client.post("/v1/ingest", json={"docs": [DOCS[0], DOCS[0]]})
        assert r.status_code == 400
        assert "duplicate" in r.json()["error"]


class TestDatasources:
    def test_register_and_conflict(self, client):
        r = client.post("/v1/datasources", json={"name": "ops", "connection": "fixture:logistics"})
        assert r.status_code == 200 and r.json()["tables"] == ["shipments"]
        r = client.post("/v1/datasources", json={"name": "ops", "connection": "fixture:music"})
        assert r.status_code == 409

    def test_unknown_fixture_rejected(self, client):
        r = client.post("/v1/datasources", json={"name": "x", "connection": "fixture:nope"})
        assert r.status_code == 400

    def test_sqlite_connection_with_authorization(self, client, tmp_path):
        import sqlite3

        db = tmp_path / "t.db"
        conn = sqlite3.connect(db)
        conn.execute("CREATE TABLE users (id INTEGER, name TEXT, secret TEXT)")
        conn.execute("INSERT INTO users VALUES (1, 'a', 's')")
        conn.commit()
        conn.close()
        r = client.post(
            "/v1/datasources",
            json={
                "name": "udb",
                "connection": f"sqlite:///{db}",
                "authorized_columns": ["id", "name"],
            },
        )
        assert r.status_code == 200


class TestQueryStream:
    def test_documents_query_event_grammar(self, client):
        client.post("/v1/ingest", json={"docs": DOCS})
        events = stream_events(
            client,
            {"session_id": "s1", "query": "what does the retention policy say?", "mode": "standard"},
        )
        names = [e.event for e in events]
        assert names[0] == "route"
        assert names.count("token") >= 1 and names.count("citation") >= 1
        assert names[-1] == "done"
        assert check_stream(events) is None

    def test_strict_mode_abstains_with_metadata(self, client):
        client.post("/v1/ingest", json={"docs": DOCS})
        # Swap in an adversarial drafter so one sentence never verifies.
        from groundedqa.providers import AdversarialDrafter

        client.app.state.ctx.providers.drafter = AdversarialDrafter()
        events = stream_events(
            client,
            {"session_id": "s1", "query": "what does the retention policy say?", "mode": "strict"},
        )
        done = events[-1]
        assert done.event == "done"
        assert "N/A" in done.data["text"]
        assert done.data["support"]["mode"] == "strict"
        assert done.data["support"]["abstained"] >= 1

    def test_sql_query_with_chart_before_done(self, client):
        client.post("/v1/ingest", json={"docs": DOCS})
        client.post("/v1/datasources", json={"name": "ops", "connection": "fixture:logistics"})
        events = stream_events(
            client,
            {"session_id": "s1", "query": "plot shipments by status", "datasource": "ops"},
        )
        names = [e.event for e in events]
        assert "sql_trace" in names and "chart" in names
        assert names.index("chart") < names.index("done")
        assert check_stream(events) is None

    def test_unknown_datasource_single_error_event(self, client):
        client.post("/v1/ingest", json={"docs": DOCS})
        events = stream_events(
            client, {"session_id": "s1", "query": "how many rows", "datasource": "ghost"}
        )
        assert [e.event for e in events] == ["route", "error"]
        assert check_stream(events) is None

    def test_malformed_body_is_400_before_stream(self, client):
        assert client.post("/v1/query", json={"query": "x"}).status_code == 400
        assert client.post("/v1/query", json={"session_id": "s"}).status_code == 400
        assert (
            client.post(
                "/v1/query", json={"session_id": "s", "query": "x", "mode": "zen"}
            ).status_code
            == 400
        )

    def test_seq_strictly_increasing_and_in_payload(self, client):
        client.post("/v1/ingest", json={"docs": DOCS})
        with client.stream(
            "POST", "/v1/query", json={"session_id": "s", "query": "retention policy?"}
        ) as resp:
            body = "".join(resp.iter_text())
        assert "event: route\n" in body and "data: {" in body
        events = parse_sse(body)
        seqs = [e.seq for e in events]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)

    def test_follow_up_reuses_dialogue_context(self, client):
        client.post("/v1/ingest", json={"docs": DOCS})
        stream_events(client, {"session_id": "s9", "query": "retention policy?"})
        events = stream_events(client, {"session_id": "s9", "query": "and the warehouse?"})
        assert events[-1].event == "done"
        assert len(client.app.state.ctx.sessions.turns("s9")) == 2

    def test_concurrent_streams_do_not_interleave(self, client):
        client.post("/v1/ingest", json={"docs": DOCS})
        results: dict[str, list] = {}

        def worker(session):
            events = stream_events(
                client, {"session_id": session, "query": f"retention policy for {session}?"}
            )
            results[session] = events

        threads = [threading.Thread(target=worker, args=(f"s{i}",)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for session, events in results.items():
            assert check_stream(events) is None
            assert events[-1].data["session_id"] == session
            assert f"for {session}" in events[-1].data["query"]


class TestWireFormat:
    def test_format_parses_back(self):
        event = SseEvent("token", {"text": "hello: world\nwith newline?"}, 3)
        raw = format_sse(event)
        assert raw.endswith("\n\n")
        assert raw.startswith("event: token\n")
        lines = raw.strip().split("\n")
        assert len(lines) == 2  # single-line JSON payload
        parsed = parse_sse(raw)[0]
        assert parsed.event == "token" and parsed.seq == 3
        assert parsed.data["text"] == "hello: world\nwith newline?"

    def test_comment_heartbeats_skipped_by_parser(self):
        raw = ": keep-alive\n\n" + format_sse(SseEvent("route", {"primary": "documents"}, 1))
        events = parse_sse(raw)
        assert [e.event for e in events] == ["route"]

    def test_heartbeat_emitted_when_interval_elapsed(self, ctx):
        ctx.config.service.heartbeat_s = 0.0
        chunks = list(
            ctx.sse_body(iter([SseEvent("route", {}, 1), SseEvent("done", {}, 2)]))
        )
        assert any(chunk.startswith(b":") for chunk in chunks)

    def test_grammar_checker_rejects_bad_streams(self):
        def ev(names):
            return [SseEvent(n, {}, i + 1) for i, n in enumerate(names)]

        assert check_stream([]) is not None
        assert check_stream(ev(["token", "done"])) is not None
        assert check_stream(ev(["route", "token"])) is not None
        assert check_stream(ev(["route", "done", "done"])) is not None
        bad_seq = [SseEvent("route", {}, 2), SseEvent("done", {}, 1)]
        assert check_stream(bad_seq) is not None
        assert check_stream(ev(["route", "token", "citation", "done"])) is None


class TestConfig:
    def test_defaults(self):
        config = load_config(None)
        assert config.chunking.window_tokens == 1000
        assert config.retrieval.n_candidates == 200
        assert config.grounding.max_rounds == 3
        assert config.t2s.max_retries == 2

    def test_file_overrides(self, tmp_path):
        path = tmp_path / "svc.ini"
        path.write_text(
            "[chunking]\nwindow = 500\noverlap = 50\n"
            "[retrieval]\nef_search = 64\n"
            "[grounding]\nmode = strict\n"
            "[service]\nport = 9999\nallow_secondary_path = true\n"
        )
        config = load_config(str(path))
        assert config.chunking.window_tokens == 500
        assert config.retrieval.ef_search == 64
        assert config.grounding.mode == "strict"
        assert config.service.port == 9999
        assert config.service.allow_secondary_path is True

    def test_missing_file_errors(self):
        from groundedqa.errors import ConfigurationError

        with pytest.raises(ConfigurationError):
            load_config("/nonexistent/config.ini")


class TestDonePayloadReplayable:
    def test_done_payload_contains_render_inputs(self, client):
        client.post("/v1/ingest", json={"docs": DOCS})
        events = stream_events(client, {"session_id": "s", "query": "retention policy?"})
        done = events[-1].data
        for key in ("text", "references", "table", "chart", "narrative", "support", "route"):
            assert key in done
        tokens = "".join(e.data["text"] for e in events if e.event == "token")
        assert tokens.strip() == done["text"].strip()
        for ref in done["references"]:
            assert f"[{ref['n']}]" in done["text"]
