"""SSE event schema, wire formatting, and the stream grammar checker.

Every query stream must match

    route (token | citation | table | chart | sql_trace | warning)* (done | error)

with a strictly increasing ``seq`` and exactly one terminal event. The wire
format is ``event: <name>\\ndata: <single-line JSON>\\n\\n`` (UTF-8); the seq
travels inside the JSON payload.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

EVENT_NAMES = (
    "token",
    "citation",
    "table",
    "chart",
    "sql_trace",
    "route",
    "warning",
    "error",
    "done",
)
TERMINAL_EVENTS = frozenset({"done", "error"})
MIDDLE_EVENTS = frozenset({"token", "citation", "table", "chart", "sql_trace", "warning"})


@dataclass
class SseEvent:
    event: str
    data: dict
    seq: int

    def __post_init__(self) -> None:
        if self.event not in EVENT_NAMES:
            raise ValueError(f"unknown event name {self.event!r}")


def format_sse(event: SseEvent) -> str:
    payload = dict(event.data)
    payload["seq"] = event.seq
    body = json.dumps(payload, ensure_ascii=False, separators=(",", ":"))
    return f"event: {event.event}\ndata: {body}\n\n"


def parse_sse(raw: str) -> list[SseEvent]:
    """Parse a full SSE body back into events (comment lines are skipped)."""
    events: list[SseEvent] = []
    name: str | None = None
    data_lines: list[str] = []
    for line in raw.split("\n"):
        if line.startswith(":"):
            continue
        if line.startswith("event:"):
            name = line[len("event:") :].strip()
        elif line.startswith("data:"):
            data_lines.append(line[len("data:") :].strip())
        elif line == "" and name is not None:
            payload = json.loads("\n".join(data_lines)) if data_lines else {}
            seq = payload.pop("seq", len(events))
            events.append(SseEvent(event=name, data=payload, seq=seq))
            name = None
            data_lines = []
    return events


def check_stream(events: list[SseEvent]) -> str | None:
    """Return a grammar violation description, or None when valid."""
    if not events:
        return "empty stream"
    names = [e.event for e in events]
    if names[0] != "route":
        return f"stream must open with a route event, got {names[0]!r}"
    if names[-1] not in TERMINAL_EVENTS:
        return f"stream must end with done or error, got {names[-1]!r}"
    terminals = [n for n in names if n in TERMINAL_EVENTS]
    if len(terminals) != 1:
        return f"expected exactly one terminal event, got {terminals}"
    for name in names[1:-1]:
        if name not in MIDDLE_EVENTS:
            return f"unexpected mid-stream event {name!r}"
    seqs = [e.seq for e in events]
    if any(b <= a for a, b in zip(seqs, seqs[1:])):
        return f"seq values must strictly increase, got {seqs}"
    return None
