/**
 * Ordered transcript assembly from the event stream.
 *
 * Events carry gapless sequence numbers; frames may arrive out of order
 * (via relays) or never (dropped for a slow client). Out-of-order events
 * are buffered and reordered; once a hole is older than the reorder
 * window it is declared lost and rendered as an explicit gap marker,
 * never silently skipped or reordered across.
 */

export type Segment =
  | { kind: "text"; chars: number[] }
  | { kind: "gap"; from: number; to: number };

export class Transcript {
  private expected: number | null = null;
  private pending = new Map<number, number>();
  readonly segments: Segment[] = [];
  gapCount = 0;

  constructor(readonly maxReorder: number = 64) {}

  push(seq: number, char: number): void {
    if (this.expected === null) this.expected = seq;
    if (seq < this.expected || this.pending.has(seq)) return; // stale duplicate
    if (seq === this.expected) {
      this.append(char);
      this.drain();
      return;
    }
    this.pending.set(seq, char);
    const horizon = Math.min(...this.pending.keys());
    if (seq - this.expected > this.maxReorder) {
      this.declareGap(this.expected, horizon - 1);
      this.drain();
    }
  }

  /** Give up on any still-missing events (end of stream). */
  flush(): void {
    while (this.pending.size > 0) {
      const horizon = Math.min(...this.pending.keys());
      if (this.expected !== null && horizon > this.expected) {
        this.declareGap(this.expected, horizon - 1);
      }
      this.drain();
    }
  }

  private append(char: number): void {
    const last = this.segments[this.segments.length - 1];
    if (last && last.kind === "text") last.chars.push(char);
    else this.segments.push({ kind: "text", chars: [char] });
    this.expected! += 1;
  }

  private drain(): void {
    while (this.expected !== null && this.pending.has(this.expected)) {
      const char = this.pending.get(this.expected)!;
      this.pending.delete(this.expected);
      this.append(char);
    }
  }

  private declareGap(from: number, to: number): void {
    this.segments.push({ kind: "gap", from, to });
    this.gapCount += 1;
    this.expected = to + 1;
  }

  /** Exact received characters, gaps excluded: comparable byte-for-byte. */
  get text(): string {
    return this.segments
      .filter((s): s is Extract<Segment, { kind: "text" }> => s.kind === "text")
      .map((s) => String.fromCharCode(...s.chars))
      .join("");
  }

  /** Display form: control characters escaped, gaps visibly marked. */
  rendered(): string {
    return this.segments
      .map((s) =>
        s.kind === "gap"
          ? `[[${s.to - s.from + 1} events dropped]]`
          : s.chars.map(escapeChar).join(""),
      )
      .join("");
  }
}

/** Printable ASCII passes through; newlines stay; the rest becomes \xNN. */
export function escapeChar(code: number): string {
  if (code === 10) return "\n";
  if (code >= 32 && code < 127) return String.fromCharCode(code);
  return `\\x${code.toString(16).padStart(2, "0")}`;
}
