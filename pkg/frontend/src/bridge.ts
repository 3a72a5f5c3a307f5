/**
 * WebSocket <-> TCP bridge.
 *
 * Browsers cannot open raw TCP sockets, so this small Node process
 * forwards WebSocket text messages to the generation server's
 * length-prefixed stream and streams frames back as text messages. The
 * JSON payloads pass through untouched; only the framing changes.
 *
 *   node dist/bridge.js --tcp-port 7860 [--tcp-host 127.0.0.1] [--ws-port 8765]
 */

import net from "node:net";
import process from "node:process";
import { WebSocketServer, WebSocket } from "ws";

import { encodeFrame, FrameDecoder, FrameError } from "./transport.js";

function arg(name: string, fallback: string | null): string | null {
  const idx = process.argv.indexOf(`--${name}`);
  return idx >= 0 ? process.argv[idx + 1] : fallback;
}

const tcpPort = Number(arg("tcp-port", null) ?? NaN);
const tcpHost = arg("tcp-host", "127.0.0.1")!;
const wsPort = Number(arg("ws-port", "8765"));
if (!Number.isFinite(tcpPort)) {
  console.error("usage: bridge --tcp-port PORT [--tcp-host HOST] [--ws-port PORT]");
  process.exit(2);
}

const server = new WebSocketServer({ port: wsPort });
console.log(`bridge: ws://localhost:${wsPort} <-> tcp ${tcpHost}:${tcpPort}`);

server.on("connection", (ws: WebSocket) => {
  const tcp = net.connect({ host: tcpHost, port: tcpPort });
  const decoder = new FrameDecoder();
  tcp.setNoDelay(true);

  ws.on("message", (data) => {
    tcp.write(encodeFrame(new TextEncoder().encode(String(data))));
  });
  tcp.on("data", (chunk: Buffer) => {
    try {
      for (const frame of decoder.feed(
        new Uint8Array(chunk.buffer, chunk.byteOffset, chunk.byteLength),
      )) {
        ws.send(new TextDecoder().decode(frame));
      }
    } catch (exc) {
      if (exc instanceof FrameError) {
        console.error(`bridge: ${exc.message}; closing`);
        ws.close();
        tcp.destroy();
      } else throw exc;
    }
  });
  const shutdown = () => {
    ws.close();
    tcp.destroy();
  };
  tcp.on("close", shutdown);
  tcp.on("error", shutdown);
  ws.on("close", () => tcp.destroy());
});
