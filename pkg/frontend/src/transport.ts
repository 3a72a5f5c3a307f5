/**
 * Stream framing (4-byte big-endian length + payload) and replay sources.
 *
 * The framing codec is shared by the Node bridge and the tests; it has
 * no DOM or Node dependencies. Browsers speak WebSocket to the bridge,
 * which owns the TCP leg.
 */

export const MAX_FRAME_BYTES = 1 << 24;

export class FrameError extends Error {}

export function encodeFrame(payload: Uint8Array): Uint8Array {
  if (payload.length > MAX_FRAME_BYTES) throw new FrameError("frame too large");
  const out = new Uint8Array(4 + payload.length);
  new DataView(out.buffer).setUint32(0, payload.length, false);
  out.set(payload, 4);
  return out;
}

export class FrameDecoder {
  private buf = new Uint8Array(0);

  constructor(readonly maxFrame: number = MAX_FRAME_BYTES) {}

  feed(chunk: Uint8Array): Uint8Array[] {
    const joined = new Uint8Array(this.buf.length + chunk.length);
    joined.set(this.buf, 0);
    joined.set(chunk, this.buf.length);
    this.buf = joined;
    const frames: Uint8Array[] = [];
    while (this.buf.length >= 4) {
      const length = new DataView(this.buf.buffer, this.buf.byteOffset).getUint32(0, false);
      if (length > this.maxFrame) throw new FrameError(`frame of ${length} bytes exceeds the limit`);
      if (this.buf.length < 4 + length) break;
      frames.push(this.buf.slice(4, 4 + length));
      this.buf = this.buf.slice(4 + length);
    }
    return frames;
  }
}

/**
 * Replays a recorded event log (one wire message JSON per line) through
 * the same handler a live socket would call. Used by the tests and the
 * offline demo mode; `dropSeqs` simulates frames lost to back-pressure.
 */
export function replayLog(
  logText: string,
  onMessage: (text: string) => void,
  dropSeqs: Set<number> = new Set(),
): number {
  let delivered = 0;
  for (const line of logText.split("\n")) {
    if (!line.trim()) continue;
    const seq = JSON.parse(line).seq as number;
    if (dropSeqs.has(seq)) continue;
    onMessage(line);
    delivered += 1;
  }
  return delivered;
}
