import { describe, expect, it } from "vitest";

import type { MagnitudePayload } from "../src/api.js";
import { colorFor, colorbarStops, magnitudeImage } from "../src/heatmap.js";

function payload(values: number[], nx: number, ny: number): MagnitudePayload {
  return {
    nx, ny,
    spacing_x: 1e-6, spacing_y: 1e-6,
    origin: [0, 0],
    values,
    min: Math.min(...values),
    max: Math.max(...values),
    stride: 1,
  };
}

describe("colormap", () => {
  it("spans dark violet to yellow", () => {
    const lo = colorFor(0);
    const hi = colorFor(1);
    expect(lo[2]).toBeGreaterThan(lo[1]);           // violet: blue over green
    expect(hi[0]).toBeGreaterThan(200);             // yellow: strong red+green
    expect(hi[1]).toBeGreaterThan(200);
    expect(hi[2]).toBeLessThan(80);
  });

  it("clamps out-of-range inputs", () => {
    expect(colorFor(-0.5)).toEqual(colorFor(0));
    expect(colorFor(1.5)).toEqual(colorFor(1));
  });

  it("colorbar stops run min to max", () => {
    const stops = colorbarStops(5);
    expect(stops).toHaveLength(5);
    expect(stops[0]).toBe(`rgb(${colorFor(0).join(",")})`);
    expect(stops[4]).toBe(`rgb(${colorFor(1).join(",")})`);
  });
});

describe("magnitude image", () => {
  it("flips rows so data row 0 renders at the bottom", () => {
    // 2x2: bottom row = [0, 0], top row = [1, 1]
    const img = magnitudeImage(payload([0, 0, 1, 1], 2, 2));
    const topLeft = [img[0], img[1], img[2]];
    const bottomLeft = [img[8], img[9], img[10]];
    expect(topLeft).toEqual([...colorFor(1)]);      // data j=1 on top
    expect(bottomLeft).toEqual([...colorFor(0)]);
  });

  it("normalizes with the payload min/max, alpha opaque", () => {
    const img = magnitudeImage(payload([2, 2, 4, 4], 2, 2));
    expect(img[3]).toBe(255);
    expect([img[8], img[9], img[10]]).toEqual([...colorFor(0)]);
  });

  it("handles a constant field without dividing by zero", () => {
    const img = magnitudeImage(payload([3, 3, 3, 3], 2, 2));
    expect([img[0], img[1], img[2]]).toEqual([...colorFor(0)]);
  });
});
