// SSE parsing and the POST-based stream client. EventSource cannot POST, so
// the stream is consumed via fetch + ReadableStream.

import { EVENT_NAMES, EventName, SseEvent } from "./events.js";

export class SseParser {
  private buffer = "";
  private count = 0;

  /** Feed a raw text chunk; returns the events completed by this chunk. */
  feed(chunk: string): SseEvent[] {
    this.buffer += chunk;
    const events: SseEvent[] = [];
    let sep = this.buffer.indexOf("\n\n");
    while (sep !== -1) {
      const block = this.buffer.slice(0, sep);
      this.buffer = this.buffer.slice(sep + 2);
      const event = this.parseBlock(block);
      if (event) events.push(event);
      sep = this.buffer.indexOf("\n\n");
    }
    return events;
  }

  /** Flush a trailing block that was not newline-terminated. */
  end(): SseEvent[] {
    const rest = this.buffer;
    this.buffer = "";
    if (!rest.trim()) return [];
    const event = this.parseBlock(rest);
    return event ? [event] : [];
  }

  private parseBlock(block: string): SseEvent | null {
    let name = "";
    const dataLines: string[] = [];
    for (const rawLine of block.split("\n")) {
      const line = rawLine.replace(/\r$/, "");
      if (!line || line.startsWith(":")) continue; // comments/heartbeats
      if (line.startsWith("event:")) {
        name = line.slice("event:".length).trim();
      } else if (line.startsWith("data:")) {
        dataLines.push(line.slice("data:".length).trim());
      }
    }
    if (!name || !EVENT_NAMES.has(name)) return null;
    let data: Record<string, unknown> = {};
    if (dataLines.length > 0) {
      try {
        data = JSON.parse(dataLines.join("\n")) as Record<string, unknown>;
      } catch {
        return null; // malformed payload; skip rather than crash the view
      }
    }
    this.count += 1;
    const rawSeq = data["seq"];
    const seq = typeof rawSeq === "number" ? rawSeq : this.count;
    delete data["seq"];
    return { event: name as EventName, seq, data };
  }
}

export interface QueryRequest {
  session_id: string;
  query: string;
  mode: "standard" | "strict";
  datasource?: string | null;
}

export interface StreamHandle {
  finished: Promise<void>;
  cancel: () => void;
}

/**
 * Open a query stream and invoke onEvent for each parsed event. onDrop fires
 * when the connection breaks before a terminal event (reconnect affordance).
 */
export function streamQuery(
  baseUrl: string,
  request: QueryRequest,
  onEvent: (event: SseEvent) => void,
  onDrop?: (reason: string) => void
): StreamHandle {
  const controller = new AbortController();
  let sawTerminal = false;

  const finished = (async () => {
    let response: Response;
    try {
      response = await fetch(`${baseUrl}/v1/query`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(request),
        signal: controller.signal,
      });
    } catch (err) {
      onDrop?.(String(err));
      return;
    }
    if (!response.ok || !response.body) {
      onDrop?.(`HTTP ${response.status}`);
      return;
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder("utf-8");
    const parser = new SseParser();
    const dispatch = (events: SseEvent[]) => {
      for (const event of events) {
        if (event.event === "done" || event.event === "error") sawTerminal = true;
        onEvent(event);
      }
    };
    try {
      for (;;) {
        const { value, done } = await reader.read();
        if (done) break;
        dispatch(parser.feed(decoder.decode(value, { stream: true })));
      }
      dispatch(parser.end());
    } catch (err) {
      onDrop?.(String(err));
      return;
    }
    if (!sawTerminal) {
      onDrop?.("stream ended without a terminal event");
    }
  })();

  return { finished, cancel: () => controller.abort() };
}
