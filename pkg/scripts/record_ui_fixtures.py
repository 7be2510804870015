"""Record SSE event fixtures for the frontend's replay tests.

Runs real queries through the service context with deterministic mock
providers and dumps the resulting event lists (and one raw SSE body) under
frontend/fixtures/. Rerun after changing event payloads:

    python3 scripts/record_ui_fixtures.py
"""

from __future__ import annotations

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from groundedqa.providers import AdversarialDrafter, ScriptedLLM
from groundedqa.service import AppContext
from groundedqa.service.config import load_config
from groundedqa.service.events import format_sse

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "..", "frontend", "fixtures")

DOCS = [
    {
        "doc_id": "policy-doc",
        "title": "Data Policy",
        "text": (
            "The retention policy keeps backups for ninety days. "
            "Archived records move to cold storage after one year. "
            "Deletion requests are honored within thirty days."
        ),
        "source_uri": "file:///kb/policy.txt",
        "meta": {},
    },
    {
        "doc_id": "ops-doc",
        "title": "Operations",
        "text": (
            "The warehouse in Reno ships orders within two business days. "
            "Support is reachable around the clock during launches."
        ),
        "source_uri": "file:///kb/ops.txt",
        "meta": {},
    },
]


def events_to_json(events) -> list[dict]:
    return [{"event": e.event, "seq": e.seq, "data": e.data} for e in events]


def main() -> None:
    os.makedirs(FIXTURE_DIR, exist_ok=True)
    ctx = AppContext(load_config(None), data_dir=None)
    ctx.ingest(docs=DOCS)
    ctx.register_datasource("ops", "fixture:logistics")

    fixtures: dict[str, list] = {}

    events = list(ctx.event_stream("fix-1", "what does the retention policy say?", "standard"))
    fixtures["documents_standard"] = events_to_json(events)
    with open(os.path.join(FIXTURE_DIR, "raw_stream.sse"), "w", encoding="utf-8") as fh:
        fh.write(": stream opened\n\n")
        fh.write("".join(format_sse(e) for e in events))

    ctx.providers.drafter = AdversarialDrafter(
        fabrication="Meanwhile the moon cheese futures doubled overnight."
    )
    fixtures["strict_abstention"] = events_to_json(
        ctx.event_stream("fix-2", "what does the retention policy say?", "strict")
    )

    ctx.providers.sql_drafter = ScriptedLLM(
        [
            "SELEKT status COUNT FROM shipments",
            "SELECT status, COUNT(*) AS n FROM shipments WHERE status LIKE '%pending%' GROUP BY status",
            "SELECT status, COUNT(*) AS n FROM shipments GROUP BY status ORDER BY status",
        ]
    )
    fixtures["sql_chart"] = events_to_json(
        ctx.event_stream("fix-3", "plot shipments by status", "standard", "ops")
    )

    fixtures["error_stream"] = events_to_json(
        ctx.event_stream("fix-4", "how many rows are there", "standard", "missing-datasource")
    )

    for name, events in fixtures.items():
        path = os.path.join(FIXTURE_DIR, f"{name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(events, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        print(f"wrote {path} ({len(events)} events)")


if __name__ == "__main__":
    main()
