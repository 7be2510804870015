// Browser bootstrap: wires the form, the mode toggle, and the stream into the
// pure view. One active stream per tab; the send button is disabled while a
// stream is in flight and whenever the input is empty.

import { renderConversation } from "./render.js";
import { applyEvent, beginTurn, newConversation, toggleMode, Turn } from "./state.js";
import { streamQuery } from "./sse.js";

function requireEl<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export function startApp(baseUrl = ""): void {
  const conversationEl = requireEl<HTMLDivElement>("conversation");
  const input = requireEl<HTMLInputElement>("query-input");
  const sendButton = requireEl<HTMLButtonElement>("send");
  const modeToggle = requireEl<HTMLInputElement>("mode-toggle");
  const reconnect = requireEl<HTMLButtonElement>("reconnect");

  const view = newConversation(`web-${Date.now().toString(36)}`);
  let activeTurn: Turn | null = null;
  let lastRequest: { query: string } | null = null;

  const repaint = () => {
    conversationEl.innerHTML = renderConversation(view);
    conversationEl.scrollTop = conversationEl.scrollHeight;
  };

  const refreshControls = () => {
    sendButton.disabled = input.value.trim() === "" || (activeTurn?.streaming ?? false);
  };

  const submit = (query: string) => {
    const turn = beginTurn(view, query);
    activeTurn = turn;
    lastRequest = { query };
    reconnect.hidden = true;
    repaint();
    refreshControls();
    streamQuery(
      baseUrl,
      { session_id: view.sessionId, query, mode: turn.mode },
      (event) => {
        applyEvent(turn, event);
        repaint();
        refreshControls();
      },
      () => {
        turn.streaming = false;
        reconnect.hidden = false;
        repaint();
        refreshControls();
      }
    );
  };

  sendButton.addEventListener("click", () => {
    const query = input.value.trim();
    if (!query || (activeTurn?.streaming ?? false)) return;
    input.value = "";
    submit(query);
  });
  input.addEventListener("input", refreshControls);
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter" && !sendButton.disabled) sendButton.click();
  });
  // Affects the next query only; an in-flight stream keeps its mode.
  modeToggle.addEventListener("change", () => {
    toggleMode(view, modeToggle.checked ? "strict" : "standard");
  });
  reconnect.addEventListener("click", () => {
    if (lastRequest && !(activeTurn?.streaming ?? false)) submit(lastRequest.query);
  });

  refreshControls();
}

declare global {
  interface Window {
    startApp: typeof startApp;
  }
}

if (typeof window !== "undefined") {
  window.startApp = startApp;
}
