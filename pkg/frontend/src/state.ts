// Conversation state built purely by folding SSE events into turns.

import {
  ChartPayload,
  CitationPayload,
  DonePayload,
  RoutePayload,
  SqlTracePayload,
  SseEvent,
  TableData,
} from "./events.js";

export type Mode = "standard" | "strict";

export interface Turn {
  query: string;
  mode: Mode;
  tokens: string[];
  citations: CitationPayload[];
  table: TableData | null;
  chart: ChartPayload | null;
  sqlTrace: SqlTracePayload | null;
  warnings: string[];
  route: RoutePayload | null;
  done: DonePayload | null;
  error: string | null;
  lastSeq: number;
  streaming: boolean;
}

export interface ConversationView {
  sessionId: string;
  /** Mode used for the NEXT query; toggling never touches an in-flight turn. */
  pendingMode: Mode;
  turns: Turn[];
}

export function newConversation(sessionId: string): ConversationView {
  return { sessionId, pendingMode: "standard", turns: [] };
}

export function toggleMode(view: ConversationView, mode: Mode): void {
  view.pendingMode = mode;
}

export function beginTurn(view: ConversationView, query: string): Turn {
  const turn: Turn = {
    query,
    mode: view.pendingMode,
    tokens: [],
    citations: [],
    table: null,
    chart: null,
    sqlTrace: null,
    warnings: [],
    route: null,
    done: null,
    error: null,
    lastSeq: 0,
    streaming: true,
  };
  view.turns.push(turn);
  return turn;
}

export function applyEvent(turn: Turn, event: SseEvent): void {
  if (event.seq <= turn.lastSeq) {
    return; // duplicate or out-of-order delivery; first write wins
  }
  turn.lastSeq = event.seq;
  switch (event.event) {
    case "route":
      turn.route = event.data as unknown as RoutePayload;
      break;
    case "token":
      turn.tokens.push(String((event.data as { text?: unknown }).text ?? ""));
      break;
    case "citation":
      turn.citations.push(event.data as unknown as CitationPayload);
      break;
    case "table":
      turn.table = event.data as unknown as TableData;
      break;
    case "chart":
      turn.chart = event.data as unknown as ChartPayload;
      break;
    case "sql_trace":
      turn.sqlTrace = event.data as unknown as SqlTracePayload;
      break;
    case "warning":
      turn.warnings.push(String((event.data as { message?: unknown }).message ?? ""));
      break;
    case "error":
      turn.error = String((event.data as { message?: unknown }).message ?? "unknown error");
      turn.streaming = false;
      break;
    case "done":
      turn.done = event.data as unknown as DonePayload;
      turn.streaming = false;
      break;
  }
}

export function applyEvents(turn: Turn, events: SseEvent[]): void {
  for (const event of events) {
    applyEvent(turn, event);
  }
}

/** The answer text accumulated so far (joined token increments). */
export function turnText(turn: Turn): string {
  return turn.tokens.join("");
}
