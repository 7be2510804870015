import { describe, expect, it } from "vitest";

import { applyEvent, applyEvents, beginTurn, newConversation, Turn } from "../src/state.js";
import { citationMarkersIn, renderConversation, renderTurn } from "../src/render.js";
import { SseEvent } from "../src/events.js";
import { loadFixture } from "./helpers.js";

function playedTurn(fixture: string, query: string, incremental = false): Turn {
  const view = newConversation("snap");
  const turn = beginTurn(view, query);
  const events = loadFixture(fixture);
  if (incremental) {
    for (const event of events) applyEvent(turn, event);
  } else {
    applyEvents(turn, events);
  }
  return turn;
}

const FIXTURE_QUERIES: Record<string, string> = {
  documents_standard: "what does the retention policy say?",
  strict_abstention: "what does the retention policy say?",
  sql_chart: "plot shipments by status",
  error_stream: "how many rows are there",
};

describe("replay fidelity", () => {
  for (const [fixture, query] of Object.entries(FIXTURE_QUERIES)) {
    it(`live and replayed renders are identical for ${fixture}`, () => {
      const live = renderTurn(playedTurn(fixture, query, true));
      const replayed = renderTurn(playedTurn(fixture, query, false));
      expect(live).toBe(replayed);
    });

    it(`rendering of ${fixture} matches its snapshot`, () => {
      const view = newConversation("snap");
      const turn = beginTurn(view, query);
      applyEvents(turn, loadFixture(fixture));
      expect(renderConversation(view)).toMatchSnapshot();
    });
  }

  for (const fixture of ["documents_standard", "strict_abstention"]) {
    it(`a done-only replay renders identically to the live stream for ${fixture}`, () => {
      const query = FIXTURE_QUERIES[fixture] as string;
      const live = renderTurn(playedTurn(fixture, query, true));

      const view = newConversation("snap");
      const turn = beginTurn(view, query);
      const events = loadFixture(fixture);
      const done = events[events.length - 1] as SseEvent;
      applyEvent(turn, done);
      expect(done.event).toBe("done");
      expect(renderTurn(turn)).toBe(live);
    });
  }

  it("incremental rendering ends at the same markup as a single batch", () => {
    // Render after every event (as the live app repaints) and keep the last.
    const view = newConversation("snap");
    const turn = beginTurn(view, FIXTURE_QUERIES["documents_standard"] as string);
    let lastLive = "";
    for (const event of loadFixture("documents_standard")) {
      applyEvent(turn, event);
      lastLive = renderConversation(view);
    }
    const batchView = newConversation("snap");
    const batchTurn = beginTurn(batchView, FIXTURE_QUERIES["documents_standard"] as string);
    applyEvents(batchTurn, loadFixture("documents_standard"));
    expect(lastLive).toBe(renderConversation(batchView));
  });
});

describe("citation rendering", () => {
  it("every marker in the answer resolves to a reference entry", () => {
    for (const fixture of ["documents_standard", "strict_abstention"]) {
      const turn = playedTurn(fixture, "q");
      const known = new Set(turn.citations.map((c) => c.n));
      const markers = citationMarkersIn(turn);
      expect(markers.length).toBeGreaterThan(0);
      for (const n of markers) {
        expect(known.has(n)).toBe(true);
      }
      const html = renderTurn(turn);
      for (const n of markers) {
        expect(html).toContain(`<sup class="cite" data-ref="${n}"`);
        expect(html).toContain(`<li class="reference" data-ref="${n}"`);
      }
    }
  });

  it("unresolvable markers render as plain text, never as dangling links", () => {
    const view = newConversation("s");
    const turn = beginTurn(view, "q");
    const events: SseEvent[] = [
      { event: "route", seq: 1, data: { primary: "documents", flags: [] } },
      { event: "token", seq: 2, data: { text: "Claim [7].", i: 0 } },
      { event: "done", seq: 3, data: { text: "Claim [7]." } },
    ];
    applyEvents(turn, events);
    const html = renderTurn(turn);
    expect(html).not.toContain('data-ref="7"');
    expect(html).toContain("Claim [7].");
  });

  it("snippet text is escaped into the hover attributes", () => {
    const turn = playedTurn("documents_standard", "q");
    const html = renderTurn(turn);
    expect(html).toContain("data-snippet=");
    expect(html).not.toMatch(/data-snippet="[^"]*</);
  });
});

describe("strict-mode abstentions", () => {
  it("N/A tokens get distinct abstention styling", () => {
    const turn = playedTurn("strict_abstention", "q");
    const html = renderTurn(turn);
    expect(html).toContain('<span class="abstained"');
    expect(turn.done?.support.abstained).toBeGreaterThanOrEqual(1);
  });

  it("supported text is not marked abstained", () => {
    const turn = playedTurn("documents_standard", "q");
    expect(renderTurn(turn)).not.toContain('class="abstained"');
  });
});

describe("sql trace and chart", () => {
  it("renders one attempts-panel row per attempt", () => {
    const turn = playedTurn("sql_chart", "plot shipments by status");
    const html = renderTurn(turn);
    expect(turn.sqlTrace?.attempts).toHaveLength(3);
    expect(html.match(/<li class="attempt /g)).toHaveLength(3);
    expect(html).toContain("SQL attempts (3)");
  });

  it("renders a bar chart with one rect per row", () => {
    const turn = playedTurn("sql_chart", "plot shipments by status");
    const html = renderTurn(turn);
    expect(html).toContain('<figure class="chart chart-bar">');
    expect(html.match(/<rect /g)).toHaveLength(turn.chart?.data.rows.length ?? -1);
  });

  it("renders the result table", () => {
    const turn = playedTurn("sql_chart", "plot shipments by status");
    const html = renderTurn(turn);
    expect(html).toContain('<table class="result-table">');
    expect(html.match(/<tr>/g)?.length).toBe(1 + (turn.table?.rows.length ?? 0));
  });
});

describe("error streams", () => {
  it("shows an inline error bubble", () => {
    const turn = playedTurn("error_stream", "q");
    const html = renderTurn(turn);
    expect(html).toContain('<div class="error-bubble">');
    expect(html).toContain("missing-datasource");
  });
});
