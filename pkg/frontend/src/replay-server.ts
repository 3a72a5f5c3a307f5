/**
 * WebSocket replay server: streams a recorded event log to each client.
 *
 * Prefixes the stream with a model_list synthesized from the first
 * event's weight vector, then delivers the recorded lines verbatim at a
 * fixed rate. Inbound messages are answered with a status reminder that
 * a recording cannot be steered.
 */

import { WebSocketServer, WebSocket } from "ws";

export interface ReplayServer {
  port: number;
  close: () => void;
}

export function startReplayServer(
  lines: string[],
  port: number = 0,
  rate: number = 15,
): Promise<ReplayServer> {
  const events = lines.filter((line) => line.trim());
  if (events.length === 0) throw new Error("empty event log");
  const first = JSON.parse(events[0]);
  const nModels = (first.pi as number[]).length;
  const session = first.session as string;

  const server = new WebSocketServer({ port });
  server.on("connection", (ws: WebSocket) => {
    let control = 0;
    const say = (body: Record<string, unknown>) =>
      ws.send(JSON.stringify({ v: 1, session, seq: control++, ...body }));
    say({
      type: "model_list",
      models: Array.from({ length: nModels }, (_, i) => ({ name: `model-${i}` })),
    });
    say({ type: "status", state: "running", detail: `replaying ${events.length} events`, stats: null });

    let cursor = 0;
    const timer = setInterval(() => {
      if (cursor >= events.length || ws.readyState !== WebSocket.OPEN) {
        clearInterval(timer);
        if (ws.readyState === WebSocket.OPEN)
          say({ type: "status", state: "paused", detail: "replay finished", stats: null });
        return;
      }
      ws.send(events[cursor++]);
    }, 1000 / rate);

    ws.on("message", () =>
      say({ type: "status", state: "running", detail: "replay ignores control", stats: null }),
    );
    ws.on("close", () => clearInterval(timer));
  });

  return new Promise((resolve) => {
    server.on("listening", () => {
      const addr = server.address();
      resolve({
        port: typeof addr === "object" && addr ? addr.port : port,
        close: () => server.close(),
      });
    });
  });
}
