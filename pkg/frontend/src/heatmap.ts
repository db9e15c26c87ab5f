/** Displacement-magnitude rendering: payload values to RGBA pixels.
 *
 * The palette is viridis (perceptually uniform); normalization uses the
 * min/max delivered in the payload, never client-side statistics.
 */

import type { MagnitudePayload } from "./api.js";

// viridis anchor colors, evenly spaced in [0, 1]
const VIRIDIS: [number, number, number][] = [
  [68, 1, 84], [71, 24, 106], [72, 40, 120], [71, 54, 130],
  [68, 68, 138], [63, 82, 141], [57, 94, 141], [51, 107, 141],
  [46, 118, 142], [41, 130, 142], [36, 141, 141], [32, 153, 139],
  [30, 164, 134], [37, 175, 127], [53, 186, 116], [76, 197, 102],
  [105, 206, 84], [137, 213, 63], [172, 219, 39], [208, 223, 27],
  [242, 226, 26], [253, 231, 37],
];

export function colorFor(t: number): [number, number, number] {
  const x = Math.min(Math.max(t, 0), 1) * (VIRIDIS.length - 1);
  const i = Math.min(Math.floor(x), VIRIDIS.length - 2);
  const f = x - i;
  const a = VIRIDIS[i];
  const b = VIRIDIS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

/** RGBA buffer in display order (top row first; data row 0 is the bottom). */
export function magnitudeImage(m: MagnitudePayload): Uint8ClampedArray<ArrayBuffer> {
  const { nx, ny, values, min, max } = m;
  const span = max > min ? max - min : 1;
  const out = new Uint8ClampedArray(new ArrayBuffer(nx * ny * 4));
  for (let j = 0; j < ny; j++) {
    const srcRow = ny - 1 - j; // flip: canvas y grows downward
    for (let i = 0; i < nx; i++) {
      const v = values[i + srcRow * nx];
      const [r, g, b] = colorFor((v - min) / span);
      const k = (i + j * nx) * 4;
      out[k] = r;
      out[k + 1] = g;
      out[k + 2] = b;
      out[k + 3] = 255;
    }
  }
  return out;
}

/** Gradient stops for a CSS/linear colorbar, bottom (min) to top (max). */
export function colorbarStops(n = 24): string[] {
  const stops: string[] = [];
  for (let k = 0; k < n; k++) {
    const [r, g, b] = colorFor(k / (n - 1));
    stops.push(`rgb(${r},${g},${b})`);
  }
  return stops;
}
