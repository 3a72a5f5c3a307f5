/**
 * HTML renderers for the distribution display and the weight gauges.
 *
 * Pure string-in/string-out so they are testable without a DOM. Color
 * scale (documented here since it is our choice): bar hue interpolates
 * from blue (hsl 220) at probability 0 to red (hsl 0) at probability 1,
 * so confident spikes read hot and flat noise reads cool.
 */

import { DistRow, EventMsg } from "./messages.js";
import { escapeChar } from "./transcript.js";

export function probColor(p: number): string {
  const clamped = Math.max(0, Math.min(1, p));
  return `hsl(${Math.round(220 * (1 - clamped))}, 85%, 55%)`;
}

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function charLabel(code: number): string {
  if (code === 32) return "space";
  if (code === 10) return "newline";
  return escapeHtml(escapeChar(code));
}

/** Top-k + residual of a full distribution (for the joint row). */
export function topK(dist: number[], k: number = 16): { top: [number, number][]; residual: number } {
  const order = dist
    .map((p, c) => [c, p] as [number, number])
    .sort((a, b) => b[1] - a[1] || a[0] - b[0])
    .slice(0, k);
  const residual = Math.max(0, 1 - order.reduce((s, [, p]) => s + p, 0));
  return { top: order, residual };
}

/** One row of vertical probability bars plus its horizontal weight gauge. */
export function renderDistRow(
  label: string,
  pairs: [number, number][],
  residual: number,
  weight: number | null,
): string {
  const bars = pairs
    .map(
      ([c, p]) =>
        `<div class="bar" title="${charLabel(c)}: ${p.toFixed(4)}"` +
        ` style="height:${Math.max(1, Math.round(100 * p))}%;background:${probColor(p)}">` +
        `<span class="bar-char">${charLabel(c)}</span></div>`,
    )
    .join("");
  const gauge =
    weight === null
      ? ""
      : `<div class="weight-gauge"><div class="weight-fill" style="width:${(100 * weight).toFixed(1)}%"></div></div>`;
  return (
    `<div class="dist-row">` +
    `<div class="row-label">${escapeHtml(label)}${gauge}</div>` +
    `<div class="bars">${bars}<div class="residual" title="residual mass">${(100 * residual).toFixed(1)}%</div></div>` +
    `</div>`
  );
}

/** Weight gauges only (the mixer readout); one-hot shows one full bar. */
export function renderWeightGauges(
  names: string[],
  weights: number[],
  pending: boolean,
): string {
  const total = weights.reduce((s, w) => s + w, 0);
  const rows = names
    .map((name, i) => {
      const frac = total > 0 ? weights[i] / total : 0;
      return (
        `<div class="gauge-row"><span class="gauge-label">${escapeHtml(name)}</span>` +
        `<div class="weight-gauge"><div class="weight-fill" style="width:${(100 * frac).toFixed(1)}%"></div></div>` +
        `<span class="gauge-value">${(100 * frac).toFixed(0)}%</span></div>`
      );
    })
    .join("");
  const badge = pending ? `<span class="badge pending">pending</span>` : "";
  return `<div class="gauges">${badge}${rows}</div>`;
}

function validRow(row: DistRow, nModels: number): boolean {
  return (
    Number.isInteger(row.model) &&
    row.model >= 0 &&
    row.model < nModels &&
    Array.isArray(row.top) &&
    typeof row.residual === "number" &&
    row.top.every((p) => Array.isArray(p) && p.length === 2)
  );
}

/**
 * The full per-step display: joint distribution on top, one row per
 * active model below it. Malformed rows are skipped with an error badge
 * rather than breaking the panel.
 */
export function renderEventPanel(ev: EventMsg, names: string[]): string {
  const piTotal = ev.pi.reduce((s, w) => s + w, 0);
  const joint = topK(ev.rho);
  const parts = [renderDistRow("joint", joint.top, joint.residual, null)];
  let badRows = 0;
  for (const row of ev.rows) {
    if (!validRow(row, names.length)) {
      badRows += 1;
      continue;
    }
    const weight = piTotal > 0 ? ev.pi[row.model] / piTotal : 0;
    parts.push(renderDistRow(names[row.model], row.top, row.residual, weight));
  }
  const badge = badRows > 0 ? `<span class="badge error">${badRows} bad row(s)</span>` : "";
  return `<div class="event-panel" data-step="${ev.step}">${badge}${parts.join("")}</div>`;
}
