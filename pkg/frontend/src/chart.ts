/** SVG chart builders.
 *
 * Pure string generation so the scripted flows can assert on the rendered
 * output without a DOM. Every number shown in a readout is the exact
 * String() of a value from the service payload; the client computes layout,
 * never results.
 */

import type { AnalysisResultPayload, PlateauPayload, QSweepResultPayload, SeriesPayload } from "./api.js";

const W = 640;
const PANEL_H = 200;
const MARGIN = { left: 64, right: 16, top: 14, bottom: 30 };

interface Scale {
  (v: number): number;
}

function linScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v) => r0 + ((v - d0) / span) * (r1 - r0);
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function polyline(xs: number[], ys: number[], color: string, cls: string): string {
  const pts = xs.map((x, i) => `${x.toFixed(2)},${ys[i].toFixed(2)}`).join(" ");
  return `<polyline class="${cls}" fill="none" stroke="${color}" stroke-width="1.5" points="${pts}"/>` +
    xs.map((x, i) => `<circle cx="${x.toFixed(2)}" cy="${ys[i].toFixed(2)}" r="2" fill="${color}"/>`).join("");
}

const SERIES_COLORS: Record<string, string> = {
  J: "#3a76c4",
  J_total: "#7b52ab",
  K_I: "#c43a3a",
  K_II: "#3aa05c",
  K_III: "#d98327",
};

function panel(series: SeriesPayload, names: string[], y0: number,
               plateau: PlateauPayload | null, yLabel: string): string {
  const x = series.contour;
  const active = names.filter((n) => (series as any)[n] != null);
  if (active.length === 0) return "";
  let lo = Infinity;
  let hi = -Infinity;
  for (const n of active) {
    for (const v of (series as any)[n] as number[]) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  const pad = 0.06 * (hi - lo || Math.abs(hi) || 1);
  const sx = linScale(x[0], x[x.length - 1], MARGIN.left, W - MARGIN.right);
  const sy = linScale(lo - pad, hi + pad, y0 + PANEL_H - MARGIN.bottom, y0 + MARGIN.top);
  const parts: string[] = [];
  if (plateau && !plateau.no_plateau) {
    const bx0 = sx(plateau.start_contour);
    const bx1 = sx(plateau.end_contour);
    parts.push(`<rect class="plateau-band" x="${bx0.toFixed(2)}" y="${(y0 + MARGIN.top).toFixed(2)}" ` +
      `width="${(bx1 - bx0).toFixed(2)}" height="${(PANEL_H - MARGIN.top - MARGIN.bottom).toFixed(2)}" ` +
      `fill="#f6b8c8" opacity="0.45"/>`);
  }
  // frame and integer x ticks straight from the payload contour list
  parts.push(`<rect x="${MARGIN.left}" y="${y0 + MARGIN.top}" width="${W - MARGIN.left - MARGIN.right}" ` +
    `height="${PANEL_H - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#999"/>`);
  const tickEvery = Math.max(1, Math.round(x.length / 8));
  for (let i = 0; i < x.length; i += tickEvery) {
    const px = sx(x[i]);
    parts.push(`<line x1="${px.toFixed(2)}" y1="${(y0 + PANEL_H - MARGIN.bottom).toFixed(2)}" ` +
      `x2="${px.toFixed(2)}" y2="${(y0 + PANEL_H - MARGIN.bottom + 4).toFixed(2)}" stroke="#999"/>`);
    parts.push(`<text x="${px.toFixed(2)}" y="${(y0 + PANEL_H - MARGIN.bottom + 16).toFixed(2)}" ` +
      `font-size="10" text-anchor="middle" fill="#444">${x[i]}</text>`);
  }
  for (const n of active) {
    const ys = ((series as any)[n] as number[]).map(sy);
    const xs = x.map(sx);
    parts.push(polyline(xs, ys, SERIES_COLORS[n] ?? "#666", `series-${n}`));
  }
  parts.push(`<text x="12" y="${(y0 + PANEL_H / 2).toFixed(2)}" font-size="11" fill="#444" ` +
    `transform="rotate(-90 12 ${(y0 + PANEL_H / 2).toFixed(2)})" text-anchor="middle">${esc(yLabel)}</text>`);
  let lx = MARGIN.left + 8;
  for (const n of active) {
    parts.push(`<rect x="${lx}" y="${y0 + MARGIN.top + 5}" width="10" height="3" fill="${SERIES_COLORS[n] ?? "#666"}"/>`);
    parts.push(`<text x="${lx + 14}" y="${y0 + MARGIN.top + 10}" font-size="10" fill="#444">${esc(n)}</text>`);
    lx += 22 + 8 * n.length;
  }
  return parts.join("");
}

/** One readout line per plateau quantity, values verbatim from the payload. */
export function plateauReadouts(plateau: PlateauPayload): string[] {
  const names = Object.keys(plateau.mean).sort();
  return names.map((n) => `${n} = ${String(plateau.mean[n])} ± ${String(plateau.std[n])}`);
}

export function convergenceChart(result: AnalysisResultPayload): string {
  const { series, plateau } = result;
  const body: string[] = [];
  body.push(panel(series, ["J", "J_total"], 0, plateau, "J (J/m^2)"));
  body.push(panel(series, ["K_I", "K_II", "K_III"], PANEL_H, plateau,
                  "K (Pa sqrt(m))"));
  const readouts = plateauReadouts(plateau);
  const extra: string[] = [];
  const windowLine = plateau.no_plateau
    ? "no convergence plateau detected"
    : `plateau: contours ${String(plateau.start_contour)}..${String(plateau.end_contour)}`;
  extra.push(`<text class="plateau-window" x="${MARGIN.left}" y="${2 * PANEL_H + 18}" font-size="11" ` +
    `fill="${plateau.no_plateau ? "#b00" : "#333"}">${esc(windowLine)}</text>`);
  readouts.forEach((line, i) => {
    extra.push(`<text class="readout" x="${MARGIN.left}" y="${2 * PANEL_H + 34 + 14 * i}" ` +
      `font-size="11" fill="#222">${esc(line)}</text>`);
  });
  const H = 2 * PANEL_H + 40 + 14 * readouts.length;
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
    `viewBox="0 0 ${W} ${H}" font-family="sans-serif">${body.join("")}${extra.join("")}</svg>`;
}

export function qsweepChart(result: QSweepResultPayload): string {
  const degs = result.study.angle_rel_deg;
  const J = result.study.mean.J;
  const lo = Math.min(...J);
  const hi = Math.max(...J);
  const pad = 0.06 * (hi - lo || 1);
  const H = PANEL_H + 46;
  const sx = linScale(degs[0], degs[degs.length - 1], MARGIN.left, W - MARGIN.right);
  const sy = linScale(lo - pad, hi + pad, PANEL_H - MARGIN.bottom, MARGIN.top);
  const parts: string[] = [];
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${W - MARGIN.left - MARGIN.right}" ` +
    `height="${PANEL_H - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#999"/>`);
  for (const d of degs) {
    const px = sx(d);
    parts.push(`<text x="${px.toFixed(2)}" y="${PANEL_H - MARGIN.bottom + 16}" font-size="10" ` +
      `text-anchor="middle" fill="#444">${d}</text>`);
  }
  parts.push(polyline(degs.map(sx), J.map(sy), SERIES_COLORS.J, "series-J"));
  const mx = sx(result.suggestion.angle_deg);
  parts.push(`<line class="suggestion-marker" x1="${mx.toFixed(2)}" y1="${MARGIN.top}" ` +
    `x2="${mx.toFixed(2)}" y2="${PANEL_H - MARGIN.bottom}" stroke="#111" stroke-dasharray="4 3"/>`);
  const line = `suggested q = ${String(result.suggestion.angle_deg)} deg (${result.suggestion.flag})`;
  parts.push(`<text class="readout" x="${MARGIN.left}" y="${PANEL_H + 16}" font-size="11" fill="#222">` +
    `${esc(line)}</text>`);
  parts.push(`<text x="${(W / 2).toFixed(2)}" y="${PANEL_H + 34}" font-size="11" fill="#444" ` +
    `text-anchor="middle">q angle offset (deg)</text>`);
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
    `viewBox="0 0 ${W} ${H}" font-family="sans-serif">${parts.join("")}</svg>`;
}
