/**
 * Mixer gestures -> weight vectors, with outbound rate limiting.
 *
 * Slider and pad movements can fire far faster than the server needs;
 * the sender coalesces updates to the latest vector and emits at most
 * `maxPerSecond` messages. While disconnected, the latest gesture is
 * buffered locally and flushed on reconnect.
 */

export class RateLimitedSender {
  private latest: number[] | null = null;
  private lastSentAt = -Infinity;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private buffered = false;
  sentCount = 0;

  constructor(
    private readonly emit: (weights: number[]) => boolean,
    readonly maxPerSecond: number = 30,
    private readonly now: () => number = () => Date.now(),
  ) {}

  get minIntervalMs(): number {
    return 1000 / this.maxPerSecond;
  }

  /** Stage a gesture; it is sent now or when the rate budget allows. */
  update(weights: number[]): void {
    this.latest = weights.slice();
    if (this.timer !== null) return; // already scheduled: latest wins
    const wait = this.lastSentAt + this.minIntervalMs - this.now();
    if (wait <= 0) {
      this.fire();
    } else {
      this.timer = setTimeout(() => {
        this.timer = null;
        this.fire();
      }, wait);
    }
  }

  /** Re-send the buffered gesture after a reconnect. */
  flush(): void {
    if (this.buffered && this.latest) {
      this.buffered = false;
      this.update(this.latest);
    }
  }

  get hasBuffered(): boolean {
    return this.buffered;
  }

  private fire(): void {
    if (!this.latest) return;
    this.lastSentAt = this.now();
    if (this.emit(this.latest)) {
      this.sentCount += 1;
      this.buffered = false;
    } else {
      this.buffered = true; // offline: keep the gesture for flush()
    }
  }
}

export interface PadAnchor {
  x: number;
  y: number;
}

/**
 * 2D pad position -> weights by inverse-distance weighting.
 *
 * Each model sits at an anchor point; the weight of model i is
 * 1 / (distance_i ^ power), normalized. Standing exactly on an anchor
 * gives that model a one-hot vector.
 */
export function padWeights(
  x: number,
  y: number,
  anchors: PadAnchor[],
  power: number = 2,
): number[] {
  const raw = anchors.map((a) => {
    const d2 = (x - a.x) ** 2 + (y - a.y) ** 2;
    return d2 === 0 ? Infinity : 1 / d2 ** (power / 2);
  });
  const hot = raw.findIndex((w) => w === Infinity);
  if (hot >= 0) return anchors.map((_, i) => (i === hot ? 1 : 0));
  const total = raw.reduce((s, w) => s + w, 0);
  return raw.map((w) => w / total);
}

/** Evenly spaced anchors on a unit circle inside the [0,1]^2 pad. */
export function circleAnchors(n: number, radius: number = 0.42): PadAnchor[] {
  return Array.from({ length: n }, (_, i) => {
    const angle = (2 * Math.PI * i) / n - Math.PI / 2;
    return { x: 0.5 + radius * Math.cos(angle), y: 0.5 + radius * Math.sin(angle) };
  });
}

export function isAllZero(weights: number[]): boolean {
  return weights.every((w) => w === 0);
}

/** Compare normalized weight vectors (used to resolve "pending" state). */
export function sameDirection(a: number[] | null, b: number[] | null, tol = 1e-6): boolean {
  if (!a || !b || a.length !== b.length) return false;
  const sa = a.reduce((s, w) => s + w, 0);
  const sb = b.reduce((s, w) => s + w, 0);
  if (sa <= 0 || sb <= 0) return sa === sb;
  return a.every((w, i) => Math.abs(w / sa - b[i] / sb) <= tol);
}
