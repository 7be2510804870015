import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { isSseEvent, SseEvent } from "../src/events.js";

const here = dirname(fileURLToPath(import.meta.url));

export function loadFixture(name: string): SseEvent[] {
  const raw = JSON.parse(readFileSync(join(here, "..", "fixtures", `${name}.json`), "utf-8"));
  if (!Array.isArray(raw) || !raw.every(isSseEvent)) {
    throw new Error(`fixture ${name} is not a valid event list`);
  }
  return raw;
}

export function loadRawStream(): string {
  return readFileSync(join(here, "..", "fixtures", "raw_stream.sse"), "utf-8");
}
