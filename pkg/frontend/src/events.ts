// Typed view of the server's SSE events. The client renders exclusively from
// these payloads; it never synthesizes answer content on its own.

export type EventName =
  | "route"
  | "token"
  | "citation"
  | "table"
  | "chart"
  | "sql_trace"
  | "warning"
  | "error"
  | "done";

export const EVENT_NAMES: ReadonlySet<string> = new Set([
  "route",
  "token",
  "citation",
  "table",
  "chart",
  "sql_trace",
  "warning",
  "error",
  "done",
]);

export interface SseEvent {
  event: EventName;
  seq: number;
  data: Record<string, unknown>;
}

export interface RoutePayload {
  primary: string;
  flags: string[];
  secondary: string | null;
}

export interface TokenPayload {
  text: string;
  i: number;
}

export interface CitationPayload {
  n: number;
  chunk_id: string;
  doc_id: string;
  source_uri: string;
  start_char: number;
  end_char: number;
  snippet: string;
  external: boolean;
}

export interface TableData {
  columns: string[];
  rows: Array<Array<string | number | null>>;
}

export interface ChartPayload {
  kind: "bar" | "line" | "pie" | "none";
  x_column: string | null;
  y_column: string | null;
  reason: string;
  data: TableData;
}

export interface SqlAttempt {
  round: number;
  sql: string;
  validation: string;
  error: string | null;
}

export interface SqlTracePayload {
  datasource: string;
  final: string;
  attempts: SqlAttempt[];
}

export interface DonePayload {
  text: string;
  references: CitationPayload[];
  table: TableData | null;
  chart: Omit<ChartPayload, "data"> | null;
  narrative: string;
  support: {
    mode: string;
    support_rate: number | null;
    rounds_used: number;
    abstained: number;
  };
  route: RoutePayload | null;
  session_id: string;
  query: string;
  no_answer: boolean;
}

export function isSseEvent(value: unknown): value is SseEvent {
  if (typeof value !== "object" || value === null) return false;
  const candidate = value as { event?: unknown; seq?: unknown; data?: unknown };
  return (
    typeof candidate.event === "string" &&
    EVENT_NAMES.has(candidate.event) &&
    typeof candidate.seq === "number" &&
    typeof candidate.data === "object" &&
    candidate.data !== null
  );
}
