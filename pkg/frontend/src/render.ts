// Pure view: ConversationView -> HTML string. Rendering the recorded event
// list yields byte-identical markup to rendering a live stream, which is what
// the snapshot tests pin down.

import { ChartPayload, CitationPayload, SqlTracePayload, TableData } from "./events.js";
import { ConversationView, Turn, turnText } from "./state.js";

const MARKER = /\[(\d+)\]/g;
const ABSTENTION = /\bN\/A\b/g;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function renderPlainSegment(text: string): string {
  // Abstention markers get distinct styling; everything else is escaped text.
  return escapeHtml(text).replace(
    ABSTENTION,
    `<span class="abstained" title="no supported evidence; abstained">N/A</span>`
  );
}

function renderMarkedText(text: string, citations: Map<number, CitationPayload>): string {
  let out = "";
  let last = 0;
  for (const match of text.matchAll(MARKER)) {
    const index = match.index ?? 0;
    const n = Number(match[1]);
    out += renderPlainSegment(text.slice(last, index));
    const citation = citations.get(n);
    if (citation) {
      const hover = `${citation.source_uri || citation.doc_id} (chars ${citation.start_char}-${citation.end_char})`;
      out +=
        `<sup class="cite" data-ref="${n}" title="${escapeHtml(hover)}"` +
        ` data-snippet="${escapeHtml(citation.snippet)}">[${n}]</sup>`;
    } else {
      out += escapeHtml(match[0]);
    }
    last = index + match[0].length;
  }
  out += renderPlainSegment(text.slice(last));
  return out;
}

function renderAnswer(parts: string[], citations: Map<number, CitationPayload>): string {
  return `<p class="answer-text">${parts.map((p) => renderMarkedText(p, citations)).join("")}</p>`;
}

function renderCitations(citations: CitationPayload[]): string {
  if (citations.length === 0) return "";
  const items = citations
    .map(
      (c) =>
        `<li class="reference" data-ref="${c.n}"><span class="ref-n">[${c.n}]</span> ` +
        `<span class="ref-uri">${escapeHtml(c.source_uri || c.doc_id)}</span>` +
        `<span class="ref-span"> chars ${c.start_char}-${c.end_char}${c.external ? " (web)" : ""}</span>` +
        `<blockquote class="ref-snippet">${escapeHtml(c.snippet)}</blockquote></li>`
    )
    .join("");
  return `<ol class="references">${items}</ol>`;
}

function renderTable(table: TableData): string {
  const head = table.columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  const body = table.rows
    .map(
      (row) =>
        `<tr>${row.map((cell) => `<td>${escapeHtml(cell === null ? "" : String(cell))}</td>`).join("")}</tr>`
    )
    .join("");
  return `<table class="result-table"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

function chartSeries(chart: ChartPayload): Array<{ label: string; value: number }> {
  const xi = chart.x_column ? chart.data.columns.indexOf(chart.x_column) : -1;
  const yi = chart.y_column ? chart.data.columns.indexOf(chart.y_column) : -1;
  if (yi < 0) return [];
  return chart.data.rows.map((row, i) => ({
    label: xi >= 0 ? String(row[xi]) : String(i + 1),
    value: Number(row[yi] ?? 0),
  }));
}

const W = 320;
const H = 160;
const PAD = 24;

function renderBar(series: Array<{ label: string; value: number }>): string {
  const max = Math.max(...series.map((s) => s.value), 1);
  const slot = (W - 2 * PAD) / series.length;
  const bars = series
    .map((s, i) => {
      const h = ((H - 2 * PAD) * s.value) / max;
      const x = (PAD + i * slot + slot * 0.15).toFixed(2);
      const y = (H - PAD - h).toFixed(2);
      return (
        `<rect x="${x}" y="${y}" width="${(slot * 0.7).toFixed(2)}" height="${h.toFixed(2)}"></rect>` +
        `<text x="${(PAD + i * slot + slot / 2).toFixed(2)}" y="${H - 8}" text-anchor="middle">${escapeHtml(
          s.label
        )}</text>`
      );
    })
    .join("");
  return bars;
}

function renderLine(series: Array<{ label: string; value: number }>): string {
  const max = Math.max(...series.map((s) => s.value), 1);
  const min = Math.min(...series.map((s) => s.value), 0);
  const span = max - min || 1;
  const step = series.length > 1 ? (W - 2 * PAD) / (series.length - 1) : 0;
  const points = series
    .map((s, i) => {
      const x = PAD + i * step;
      const y = H - PAD - ((H - 2 * PAD) * (s.value - min)) / span;
      return `${x.toFixed(2)},${y.toFixed(2)}`;
    })
    .join(" ");
  return `<polyline fill="none" points="${points}"></polyline>`;
}

function renderPie(series: Array<{ label: string; value: number }>): string {
  const total = series.reduce((acc, s) => acc + Math.max(s.value, 0), 0) || 1;
  const cx = W / 2;
  const cy = H / 2;
  const r = H / 2 - 10;
  let angle = -Math.PI / 2;
  return series
    .map((s, i) => {
      const sweep = (2 * Math.PI * Math.max(s.value, 0)) / total;
      const x1 = cx + r * Math.cos(angle);
      const y1 = cy + r * Math.sin(angle);
      angle += sweep;
      const x2 = cx + r * Math.cos(angle);
      const y2 = cy + r * Math.sin(angle);
      const large = sweep > Math.PI ? 1 : 0;
      return (
        `<path class="slice slice-${i}" d="M ${cx} ${cy} L ${x1.toFixed(2)} ${y1.toFixed(2)} ` +
        `A ${r} ${r} 0 ${large} 1 ${x2.toFixed(2)} ${y2.toFixed(2)} Z">` +
        `<title>${escapeHtml(s.label)}: ${s.value}</title></path>`
      );
    })
    .join("");
}

function renderChart(chart: ChartPayload): string {
  const series = chartSeries(chart);
  if (chart.kind === "none" || series.length === 0) return "";
  let body = "";
  if (chart.kind === "bar") body = renderBar(series);
  else if (chart.kind === "line") body = renderLine(series);
  else if (chart.kind === "pie") body = renderPie(series);
  return (
    `<figure class="chart chart-${chart.kind}">` +
    `<svg viewBox="0 0 ${W} ${H}" role="img" aria-label="${escapeHtml(chart.kind)} chart">${body}</svg>` +
    `<figcaption>${escapeHtml(chart.y_column ?? "")}${
      chart.x_column ? ` by ${escapeHtml(chart.x_column)}` : ""
    }</figcaption></figure>`
  );
}

function renderSqlTrace(trace: SqlTracePayload): string {
  const rows = trace.attempts
    .map(
      (a) =>
        `<li class="attempt attempt-${a.validation}"><span class="attempt-round">round ${a.round}</span> ` +
        `<code class="attempt-sql">${escapeHtml(a.sql)}</code>` +
        `<span class="attempt-status">${escapeHtml(a.validation)}${
          a.error ? `: ${escapeHtml(a.error)}` : ""
        }</span></li>`
    )
    .join("");
  return (
    `<details class="sql-trace"><summary>SQL attempts (${trace.attempts.length}) on ${escapeHtml(
      trace.datasource
    )} - ${escapeHtml(trace.final)}</summary><ol class="attempts">${rows}</ol></details>`
  );
}

export function renderTurn(turn: Turn): string {
  // A done payload alone must replay to the same rendering as the live
  // stream, so every section falls back to the done payload when the
  // incremental events were not replayed.
  const refs = turn.citations.length > 0 ? turn.citations : turn.done?.references ?? [];
  const citations = new Map(refs.map((c) => [c.n, c]));
  const tokens = turn.tokens.length > 0 ? turn.tokens : turn.done ? [turn.done.text] : [];
  const route = turn.route ?? turn.done?.route ?? null;
  const table = turn.table ?? turn.done?.table ?? null;
  let chart = turn.chart;
  if (!chart && turn.done?.chart && turn.done.chart.kind !== "none" && table) {
    chart = { ...turn.done.chart, data: table };
  }

  const pieces: string[] = [
    `<div class="query-bubble"><span class="mode-tag">${turn.mode}</span>${escapeHtml(turn.query)}</div>`,
  ];
  const body: string[] = [];
  if (route) {
    body.push(`<div class="route-tag">route: ${escapeHtml(route.primary)}</div>`);
  }
  for (const warning of turn.warnings) {
    body.push(`<div class="warning">${escapeHtml(warning)}</div>`);
  }
  if (tokens.length > 0) {
    body.push(renderAnswer(tokens, citations));
  }
  if (turn.sqlTrace) body.push(renderSqlTrace(turn.sqlTrace));
  if (table) body.push(renderTable(table));
  if (chart) body.push(renderChart(chart));
  body.push(renderCitations(refs));
  if (turn.error !== null) {
    body.push(`<div class="error-bubble">error: ${escapeHtml(turn.error)}</div>`);
  }
  if (turn.streaming) {
    body.push(`<div class="streaming-indicator">streaming</div>`);
  }
  pieces.push(`<div class="answer-bubble">${body.join("")}</div>`);
  return `<section class="turn">${pieces.join("")}</section>`;
}

export function renderConversation(view: ConversationView): string {
  return `<div class="conversation" data-session="${escapeHtml(view.sessionId)}">${view.turns
    .map(renderTurn)
    .join("")}</div>`;
}

/** All citation markers present in the rendered answer text of a turn. */
export function citationMarkersIn(turn: Turn): number[] {
  const markers: number[] = [];
  for (const match of turnText(turn).matchAll(MARKER)) {
    markers.push(Number(match[1]));
  }
  return markers;
}
