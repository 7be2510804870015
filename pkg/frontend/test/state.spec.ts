import { describe, expect, it } from "vitest";

import { applyEvent, applyEvents, beginTurn, newConversation, toggleMode, turnText } from "../src/state.js";
import { SseEvent } from "../src/events.js";
import { loadFixture } from "./helpers.js";

describe("conversation state", () => {
  it("folds a documents stream into one finished turn", () => {
    const view = newConversation("s");
    const turn = beginTurn(view, "what does the retention policy say?");
    applyEvents(turn, loadFixture("documents_standard"));
    expect(turn.streaming).toBe(false);
    expect(turn.route?.primary).toBe("documents");
    expect(turn.citations).toHaveLength(1);
    expect(turn.done?.text).toBe(turnText(turn).trim());
    expect(turn.error).toBeNull();
  });

  it("error streams mark the turn failed", () => {
    const view = newConversation("s");
    const turn = beginTurn(view, "q");
    applyEvents(turn, loadFixture("error_stream"));
    expect(turn.error).toContain("missing-datasource");
    expect(turn.streaming).toBe(false);
  });

  it("sql stream captures trace, table, and chart", () => {
    const view = newConversation("s");
    const turn = beginTurn(view, "plot shipments by status");
    applyEvents(turn, loadFixture("sql_chart"));
    expect(turn.sqlTrace?.attempts).toHaveLength(3);
    expect(turn.table?.columns).toEqual(["status", "n"]);
    expect(turn.chart?.kind).toBe("bar");
  });

  it("ignores duplicate or stale seq numbers", () => {
    const view = newConversation("s");
    const turn = beginTurn(view, "q");
    const token = (seq: number, text: string): SseEvent => ({
      event: "token",
      seq,
      data: { text, i: 0 },
    });
    applyEvent(turn, { event: "route", seq: 1, data: { primary: "documents", flags: [] } });
    applyEvent(turn, token(2, "hello "));
    applyEvent(turn, token(2, "hello "));
    applyEvent(turn, token(1, "stale "));
    expect(turnText(turn)).toBe("hello ");
  });

  it("mode toggle affects only the next turn", () => {
    const view = newConversation("s");
    const first = beginTurn(view, "first");
    expect(first.mode).toBe("standard");
    toggleMode(view, "strict");
    expect(first.mode).toBe("standard"); // in-flight turn untouched
    const second = beginTurn(view, "second");
    expect(second.mode).toBe("strict");
  });

  it("keeps the same session across turns", () => {
    const view = newConversation("fixed-session");
    beginTurn(view, "one");
    beginTurn(view, "two");
    expect(view.sessionId).toBe("fixed-session");
    expect(view.turns).toHaveLength(2);
  });
});
