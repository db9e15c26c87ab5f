/** DOM wiring: the only module that touches the document.
 *
 * Everything displayed comes from service payloads; this file moves pixels
 * and wires events into the pure state reducers.
 */

import { ServiceClient, ServiceError } from "./api.js";
import type { AnalysisResultPayload, MagnitudePayload, QSweepResultPayload } from "./api.js";
import { convergenceChart, qsweepChart } from "./chart.js";
import { colorbarStops, magnitudeImage } from "./heatmap.js";
import {
  Pt,
  Transform,
  ViewState,
  applyEcho,
  clearAnnotations,
  clickAt,
  crackRequest,
  dragMask,
  fieldExtent,
  initialState,
  makeTransform,
  setMode,
  withBanner,
  withField,
} from "./state.js";

const client = new ServiceClient("");
let state: ViewState = initialState();
let transform: Transform | null = null;
let magnitude: MagnitudePayload | null = null;
let dragStart: Pt | null = null;

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

const canvas = $("view") as unknown as HTMLCanvasElement;
const overlay = $("overlay");
const banner = $("banner");
const chartBox = $("chart");
const statusBox = $("status");

function showBanner(msg: string | null, error = false) {
  state = withBanner(state, msg);
  banner.textContent = msg ?? "";
  banner.className = msg ? (error ? "banner error" : "banner") : "banner hidden";
}

function setStatus(msg: string) {
  statusBox.textContent = msg;
}

function renderHeatmap() {
  if (!magnitude || !state.field) return;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const img = new ImageData(magnitudeImage(magnitude), magnitude.nx, magnitude.ny);
  const off = document.createElement("canvas");
  off.width = magnitude.nx;
  off.height = magnitude.ny;
  off.getContext("2d")!.putImageData(img, 0, 0);
  const e = fieldExtent(state.field);
  const t = transform!;
  const [px0, py1] = t.dataToPixel([e.x0, e.y0]);
  const [px1, py0] = t.dataToPixel([e.x1, e.y1]);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, px0, py0, px1 - px0, py1 - py0);
  const bar = $("colorbar");
  bar.style.background = `linear-gradient(to top, ${colorbarStops().join(",")})`;
  $("cb-max").textContent = String(magnitude.max);
  $("cb-min").textContent = String(magnitude.min);
}

function svgPoint(p: Pt, cls: string, label: string): string {
  const [x, y] = transform!.dataToPixel(p);
  return `<circle class="${cls}" cx="${x}" cy="${y}" r="4"/>` +
    `<text x="${x + 6}" y="${y - 6}" class="pt-label">${label}</text>`;
}

function renderOverlay() {
  if (!state.field || !transform) {
    overlay.innerHTML = "";
    return;
  }
  const parts: string[] = [];
  if (state.maskRect) {
    const [x0, y0] = transform.dataToPixel(state.maskRect.a);
    const [x1, y1] = transform.dataToPixel(state.maskRect.b);
    parts.push(`<rect class="mask" x="${Math.min(x0, x1)}" y="${Math.min(y0, y1)}" ` +
      `width="${Math.abs(x1 - x0)}" height="${Math.abs(y1 - y0)}"/>`);
  }
  const raw: Pt[] = [];
  if (state.mouth) raw.push(state.mouth);
  raw.push(...state.polyline);
  if (state.tip) raw.push(state.tip);
  if (raw.length > 1) {
    const pts = raw.map((p) => transform!.dataToPixel(p).map((v) => v.toFixed(1)).join(",")).join(" ");
    parts.push(`<polyline class="crack-raw" points="${pts}"/>`);
  }
  if (state.echo) {
    const pts = state.echo.snapped_chain
      .map((p) => transform!.dataToPixel(p as Pt).map((v) => v.toFixed(1)).join(","))
      .join(" ");
    parts.push(`<polyline class="crack-snapped" points="${pts}"/>`);
  }
  if (state.mouth) parts.push(svgPoint(state.mouth, "pt mouth", "mouth"));
  for (const p of state.polyline) parts.push(svgPoint(p, "pt vertex", ""));
  if (state.tip) parts.push(svgPoint(state.tip, "pt tip", "tip"));
  overlay.innerHTML = parts.join("");
}

async function syncCrack() {
  const body = crackRequest(state, currentQAngle());
  if (!body || !state.field) return;
  try {
    const echo = await client.putCrack(state.field.id, body);
    state = applyEcho(state, echo);
    showBanner(null);
    setStatus(`seam: ${echo.n_seam_nodes} duplicated nodes along the snapped chain`);
  } catch (err) {
    if (err instanceof ServiceError) {
      showBanner(`${err.kind}: ${err.message}`, true);
    } else {
      showBanner(String(err), true);
    }
  }
  renderOverlay();
}

function currentQAngle(): number | null {
  if (state.suggestedAngleRad !== null) return state.suggestedAngleRad;
  const raw = ($("q-angle") as HTMLInputElement).value.trim();
  if (raw === "") return null;
  return (Number(raw) * Math.PI) / 180;
}

function materialDoc() {
  return {
    model: "isotropic",
    E: Number(($("mat-e") as HTMLInputElement).value),
    nu: Number(($("mat-nu") as HTMLInputElement).value),
    plane_state: ($("plane-state") as HTMLSelectElement).value,
  };
}

function jobOptions() {
  const contours = ($("contours") as HTMLInputElement).value.trim();
  return {
    material: materialDoc(),
    model: ($("model") as HTMLSelectElement).value,
    n_contours: contours === "" ? null : Number(contours),
    plateau: { rel_tol: 0.02, skip: 4 },
  };
}

async function runJob(kind: "analysis" | "qsweep") {
  if (!state.field) return showBanner("load a field first", true);
  if (!state.echo) await syncCrack();
  if (!state.echo) return;
  try {
    setStatus(`${kind} job queued...`);
    const jid = await client.postJob(state.field.id, kind, jobOptions());
    const job = await client.pollJob(jid);
    if (job.status === "failed") {
      showBanner(`${job.error?.kind}: ${job.error?.message}`, true);
      setStatus("job failed");
      return;
    }
    setStatus(`job ${jid} done`);
    if (job.result?.kind === "analysis") {
      chartBox.innerHTML = convergenceChart(job.result as AnalysisResultPayload);
      const w = (job.result as AnalysisResultPayload).warnings;
      showBanner(w.length ? w.join("; ") : null);
    } else if (job.result?.kind === "qsweep") {
      const qr = job.result as QSweepResultPayload;
      chartBox.innerHTML = qsweepChart(qr);
      state = { ...state, suggestedAngleRad: qr.suggestion.angle_rad };
      const btn = $("rerun-suggested") as HTMLButtonElement;
      btn.disabled = false;
      btn.textContent = `re-run with suggested q (${qr.suggestion.angle_deg.toFixed(1)} deg)`;
    }
  } catch (err) {
    showBanner(err instanceof ServiceError ? `${err.kind}: ${err.message}` : String(err), true);
  }
}

function canvasPoint(ev: MouseEvent): Pt {
  const rect = canvas.getBoundingClientRect();
  return [ev.clientX - rect.left, ev.clientY - rect.top];
}

function wire() {
  $("upload").addEventListener("click", async () => {
    const input = $("file") as HTMLInputElement;
    const units = ($("units") as HTMLSelectElement).value;
    if (!input.files || input.files.length === 0) {
      return showBanner("choose a CSV file first", true);
    }
    try {
      const created = await client.uploadField(input.files[0], units);
      state = withField(state, created);
      transform = makeTransform(fieldExtent(created), {
        width: canvas.width, height: canvas.height, margin: 12,
      });
      magnitude = await client.getMagnitude(created.id);
      renderHeatmap();
      renderOverlay();
      chartBox.innerHTML = "";
      showBanner(null);
      setStatus(`field ${created.id}: ${created.report.nx} x ${created.report.ny} nodes` +
        (created.report.has_out_of_plane ? " (stereo)" : ""));
    } catch (err) {
      showBanner(err instanceof ServiceError ? `${err.kind}: ${err.message}` : String(err), true);
    }
  });

  for (const mode of ["mouth", "tip", "polyline", "mask"] as const) {
    $(`mode-${mode}`).addEventListener("click", () => {
      state = setMode(state, mode);
      document.querySelectorAll(".mode-btn").forEach((b) => b.classList.remove("active"));
      $(`mode-${mode}`).classList.add("active");
    });
  }

  $("clear").addEventListener("click", () => {
    state = clearAnnotations(state);
    renderOverlay();
  });

  canvas.addEventListener("mousedown", (ev) => {
    if (!transform) return;
    if (state.pickMode === "mask") dragStart = transform.pixelToData(canvasPoint(ev));
  });
  canvas.addEventListener("mouseup", async (ev) => {
    if (!transform) return;
    const p = transform.pixelToData(canvasPoint(ev));
    if (state.pickMode === "mask" && dragStart) {
      const out = dragMask(state, dragStart, p);
      dragStart = null;
      state = out.state;
      if (out.accepted) await syncCrack();
      renderOverlay();
      return;
    }
    const out = clickAt(state, p);
    state = out.state;
    if (!out.accepted) {
      if (out.reason !== "outside the field of view") showBanner(out.reason ?? null, true);
      return;
    }
    if (state.mouth && state.tip) await syncCrack();
    renderOverlay();
  });

  $("run").addEventListener("click", () => runJob("analysis"));
  $("qsweep").addEventListener("click", () => runJob("qsweep"));
  $("rerun-suggested").addEventListener("click", async () => {
    await syncCrack();          // re-snap with the suggested q direction
    await runJob("analysis");
  });
}

wire();
setStatus("upload a displacement CSV to begin");
