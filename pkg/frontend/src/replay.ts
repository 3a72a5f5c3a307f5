/**
 * Event-log replay CLI: drive the UI without a live backend.
 *
 *   node dist/replay.js --log events.jsonl [--ws-port 8765] [--rate 15]
 *
 * The log format is what `conductor generate --event-log FILE` records:
 * one wire event message per line.
 */

import fs from "node:fs";
import process from "node:process";

import { startReplayServer } from "./replay-server.js";

function arg(name: string, fallback: string | null): string | null {
  const idx = process.argv.indexOf(`--${name}`);
  return idx >= 0 ? process.argv[idx + 1] : fallback;
}

const logPath = arg("log", null);
const wsPort = Number(arg("ws-port", "8765"));
const rate = Number(arg("rate", "15"));
if (!logPath) {
  console.error("usage: replay --log FILE [--ws-port PORT] [--rate EVENTS_PER_SEC]");
  process.exit(2);
}

const lines = fs.readFileSync(logPath, "utf-8").split("\n");
startReplayServer(lines, wsPort, rate).then((server) => {
  console.log(`replay: ${lines.filter((l) => l.trim()).length} events from ${logPath} on ws://localhost:${server.port}`);
});
