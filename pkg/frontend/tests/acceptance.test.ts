/**
 * Frontend acceptance: replayed transcript fidelity, schema-valid
 * rate-limited gestures, one-hot gauge rendering.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { Ajv } from "ajv";
import { afterEach, beforeEach, describe, expect, test, vi } from "vitest";

import WebSocket from "ws";

import { makeSetWeights, parseServerMessage } from "../src/messages.js";
import { renderEventPanel, renderWeightGauges } from "../src/render.js";
import { startReplayServer } from "../src/replay-server.js";
import { replayLog } from "../src/transport.js";
import { applyServer, initialState } from "../src/ui-state.js";
import { RateLimitedSender } from "../src/weights.js";

const here = dirname(fileURLToPath(import.meta.url));
const FIXTURES = join(here, "fixtures");
const REPO_ROOT = join(here, "..", "..");

const eventLog = readFileSync(join(FIXTURES, "events.jsonl"), "utf-8");
const transcript = readFileSync(join(FIXTURES, "transcript.txt"), "latin1");

const schema = JSON.parse(readFileSync(join(REPO_ROOT, "protocol.schema.json"), "utf-8"));
const ajv = new Ajv({ strict: false });
const validate = ajv.compile(schema);

function pass(n: string, text: string) {
  console.log(`[UI ACCEPTANCE ${n}] PASS - ${text}`);
}

describe("recorded replay", () => {
  test("transcript matches the event log byte for byte", () => {
    const state = initialState();
    const delivered = replayLog(eventLog, (line) => applyServer(state, parseServerMessage(line)));
    expect(delivered).toBe(160);
    expect(state.transcript.gapCount).toBe(0);
    expect(state.transcript.text).toBe(transcript);
    pass("11a", `replayed ${delivered} events; transcript byte-identical (${transcript.length} chars)`);
  });

  test("dropped frames surface as marked gaps, rest still byte-exact", () => {
    const state = initialState();
    replayLog(eventLog, (line) => applyServer(state, parseServerMessage(line)), new Set([40, 41, 42]));
    state.transcript.flush();
    expect(state.transcript.gapCount).toBe(1);
    expect(state.transcript.rendered()).toContain("[[3 events dropped]]");
    const expected = transcript.slice(0, 40) + transcript.slice(43);
    expect(state.transcript.text).toBe(expected);
  });

  test("every replayed event renders a panel with joint + active rows", () => {
    const state = initialState();
    replayLog(eventLog, (line) => {
      const msg = parseServerMessage(line);
      applyServer(state, msg);
      if (msg.type === "event") {
        const html = renderEventPanel(msg, ["verse", "kernel", "clauses"]);
        const rows = html.split('class="dist-row"').length - 1;
        expect(rows).toBe(1 + msg.rows.length);
        expect(html).not.toContain("bad row");
      }
    });
  });

  test("fixture log lines all validate against the shared schema", () => {
    for (const line of eventLog.split("\n")) {
      if (!line.trim()) continue;
      expect(validate(JSON.parse(line)), ajv.errorsText(validate.errors)).toBe(true);
    }
  });

  test("live replay server over WebSocket reproduces the transcript", async () => {
    const server = await startReplayServer(eventLog.split("\n"), 0, 2000);
    const state = initialState();
    try {
      await new Promise<void>((resolve, reject) => {
        const ws = new WebSocket(`ws://127.0.0.1:${server.port}`);
        const timer = setTimeout(() => reject(new Error("replay timed out")), 15000);
        ws.on("message", (data) => {
          const msg = parseServerMessage(String(data));
          applyServer(state, msg);
          if (msg.type === "status" && msg.detail === "replay finished") {
            clearTimeout(timer);
            ws.close();
            resolve();
          }
        });
        ws.on("error", reject);
      });
    } finally {
      server.close();
    }
    expect(state.models.length).toBe(3);
    expect(state.transcript.gapCount).toBe(0);
    expect(state.transcript.text).toBe(transcript);
    pass("11a-live", `WebSocket replay server delivered ${state.eventsSeen} events; transcript byte-identical`);
  });
});

describe("slider gestures", () => {
  let clock = 0;
  beforeEach(() => {
    vi.useFakeTimers();
    clock = 0;
  });
  afterEach(() => vi.useRealTimers());

  test("emissions are schema-valid and capped at 30 msg/sec", () => {
    const emitted: unknown[] = [];
    let seq = 0;
    const sender = new RateLimitedSender(
      (w) => {
        emitted.push(makeSetWeights(w, "conductor-ui", seq++));
        return true;
      },
      30,
      () => clock,
    );
    for (let i = 0; i < 200; i++) {
      sender.update([Math.random(), 1 - Math.random() / 2, 0.25]);
      clock += 5;
      vi.advanceTimersByTime(5); // 200 Hz wiggling for one second
    }
    expect(emitted.length).toBeLessThanOrEqual(31);
    expect(emitted.length).toBeGreaterThan(25);
    for (const msg of emitted) {
      expect(validate(msg), ajv.errorsText(validate.errors)).toBe(true);
    }
    pass("11b", `${emitted.length} schema-valid set_weights from 200 gestures in 1s (cap 30/s)`);
  });
});

describe("mixer rendering", () => {
  test("one-hot slider state renders a single full-weight bar", () => {
    const html = renderWeightGauges(["verse", "kernel", "clauses"], [0, 1, 0], false);
    expect(html.split("width:100.0%").length - 1).toBe(1);
    expect(html.split("width:0.0%").length - 1).toBe(2);
    pass("11c", "one-hot mixer state renders exactly one full-weight gauge");
  });
});
