/** Scripted end-to-end flow against a running local service.
 *
 * Drives the same pure modules the browser uses: upload -> pick mouth/tip
 * through the pixel transform -> draw the mask -> run -> build the chart,
 * then asserts the chart readouts equal the service payload values exactly.
 * Set DICFRAC_URL (default http://127.0.0.1:8799); the suite skips when no
 * service is reachable.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import type { AnalysisResultPayload, QSweepResultPayload } from "../src/api.js";
import { convergenceChart, plateauReadouts, qsweepChart } from "../src/chart.js";
import {
  clickAt,
  crackRequest,
  dragMask,
  fieldExtent,
  initialState,
  makeTransform,
  setMode,
  withField,
} from "../src/state.js";

const BASE = process.env.DICFRAC_URL ?? "http://127.0.0.1:8799";
const DEMO_DIR = join(dirname(fileURLToPath(import.meta.url)), "..", "demo");
const VIEWPORT = { width: 600, height: 600, margin: 12 };

const MATERIAL = { model: "isotropic", E: 210e9, nu: 0.3,
                   plane_state: "plane strain" };

let serviceUp = false;

beforeAll(async () => {
  try {
    const res = await fetch(`${BASE}/api/jobs/probe`);
    serviceUp = res.status === 404; // the API answered
  } catch {
    serviceUp = false;
  }
  if (!serviceUp) {
    console.warn(`no service at ${BASE}; e2e flow skipped (run scripts/e2e.sh)`);
  }
});

/** Click at a data-space target the way a user does: through screen pixels. */
function clickThroughPixels(state: ReturnType<typeof initialState>,
                            t: ReturnType<typeof makeTransform>,
                            target: [number, number]) {
  const px = t.dataToPixel(target);
  const jittered: [number, number] = [px[0] + 0.4, px[1] - 0.4];
  return clickAt(state, t.pixelToData(jittered));
}

describe("scripted browser flow", () => {
  it("upload -> pick -> mask -> run renders the service numbers verbatim", async (ctx) => {
    if (!serviceUp) return ctx.skip();
    const client = new ServiceClient(BASE);
    const csv = readFileSync(join(DEMO_DIR, "mixed_mode_51.csv"), "utf-8");
    const created = await client.uploadField(csv, "m");
    expect(created.report.nx).toBe(51);
    expect(created.report.has_out_of_plane).toBe(true);

    let state = withField(initialState(), created);
    const t = makeTransform(fieldExtent(created), VIEWPORT);

    // mouth on the left edge, tip at the centre, both through pixel space
    let out = clickThroughPixels(state, t, [-1e-6, 0]);
    expect(out.accepted).toBe(true);
    state = setMode(out.state, "tip");
    out = clickThroughPixels(state, t, [0, 0]);
    expect(out.accepted).toBe(true);
    state = out.state;

    // a click outside the grid must be rejected locally (no request)
    expect(clickAt(state, [2e-6, 0]).accepted).toBe(false);

    // drag the mask around the tip
    out = dragMask(state, [-8.9e-8, -8.9e-8], [8.9e-8, 8.9e-8]);
    expect(out.accepted).toBe(true);
    state = out.state;

    const body = crackRequest(state)!;
    const echo = await client.putCrack(created.id, body);
    expect(echo.snapped_chain.length).toBe(26);
    expect(echo.n_seam_nodes).toBe(25);
    // the snapped tip is the exact lattice node the engine will use
    expect(echo.snapped_chain[echo.snapped_chain.length - 1]).toEqual([0, 0]);

    const jid = await client.postJob(created.id, "analysis", {
      material: MATERIAL,
      plateau: { rel_tol: 0.02, skip: 8 },
    });
    const job = await client.pollJob(jid);
    expect(job.status).toBe("done");
    const result = job.result as AnalysisResultPayload;

    const svg = convergenceChart(result);
    // plateau readouts equal the payload values exactly
    for (const [name, value] of Object.entries(result.plateau.mean)) {
      expect(svg).toContain(`${name} = ${String(value)} ± ` +
        `${String(result.plateau.std[name])}`);
    }
    expect(svg).toContain("plateau-band");
    for (const line of plateauReadouts(result.plateau)) {
      expect(svg).toContain(line.replace("±", "±"));
    }
    // physics sanity: plateau recovers the generating inputs
    expect(Math.abs(result.plateau.mean.K_I - 3e6)).toBeLessThan(0.15e6);
    expect(Math.abs(result.plateau.mean.K_II - 1e6)).toBeLessThan(0.10e6);
    expect(Math.abs(result.plateau.mean.K_III - 5e6)).toBeLessThan(0.25e6);
  }, 120000);

  it("q-sweep on the mode-I demo marks the suggestion at ~0 deg", async (ctx) => {
    if (!serviceUp) return ctx.skip();
    const client = new ServiceClient(BASE);
    const csv = readFileSync(join(DEMO_DIR, "mode_one_51.csv"), "utf-8");
    const created = await client.uploadField(csv, "m");

    let state = withField(initialState(), created);
    const t = makeTransform(fieldExtent(created), VIEWPORT);
    state = clickThroughPixels(state, t, [-1e-6, 0]).state;
    state = clickThroughPixels(setMode(state, "tip"), t, [0, 0]).state;
    state = dragMask(state, [-8.9e-8, -8.9e-8], [8.9e-8, 8.9e-8]).state;

    await client.putCrack(created.id, crackRequest(state)!);
    const jid = await client.postJob(created.id, "qsweep", {
      material: MATERIAL,
      angles_deg: [-30, -20, -10, 0, 10, 20, 30],
      n_contours: 16,
      plateau: { rel_tol: 0.02, skip: 4 },
    });
    const job = await client.pollJob(jid);
    expect(job.status).toBe("done");
    const result = job.result as QSweepResultPayload;
    expect(Math.abs(result.suggestion.angle_deg)).toBeLessThanOrEqual(5.0);

    const svg = qsweepChart(result);
    expect(svg).toContain("suggestion-marker");
    expect(svg).toContain(`suggested q = ${String(result.suggestion.angle_deg)} deg`);
  }, 120000);

  it("surfaces a 422 from an out-of-grid tip as a typed error", async (ctx) => {
    if (!serviceUp) return ctx.skip();
    const client = new ServiceClient(BASE);
    const csv = readFileSync(join(DEMO_DIR, "mode_one_51.csv"), "utf-8");
    const created = await client.uploadField(csv, "m");
    await expect(client.putCrack(created.id, {
      tip: [1.0, 0], mouth: [-1e-6, 0],
    })).rejects.toMatchObject({ status: 422, kind: "TipOutsideGrid" });
  }, 30000);
});
