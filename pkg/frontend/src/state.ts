/** View state and the data<->pixel coordinate transform.
 *
 * Annotations live in data coordinates (meters); pixels exist only at the
 * edge, inside the transform. The state reducers are pure so the interaction
 * flow is scriptable without a DOM.
 */

import type { CrackEcho, CrackRequest, FieldCreated, MaskDoc } from "./api.js";

export type Pt = [number, number];

export type PickMode = "mouth" | "tip" | "polyline" | "mask";

export interface Extent {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface Viewport {
  width: number;   // pixels
  height: number;
  margin: number;
}

export interface Transform {
  dataToPixel(p: Pt): Pt;
  pixelToData(p: Pt): Pt;
  pixelsPerMeter: number;
}

export function fieldExtent(field: FieldCreated): Extent {
  const r = field.report;
  return {
    x0: r.origin[0],
    y0: r.origin[1],
    x1: r.origin[0] + (r.nx - 1) * r.spacing_x,
    y1: r.origin[1] + (r.ny - 1) * r.spacing_y,
  };
}

/** Uniform-scale fit of the data extent into the viewport; y points up. */
export function makeTransform(extent: Extent, vp: Viewport): Transform {
  const w = extent.x1 - extent.x0;
  const h = extent.y1 - extent.y0;
  const scale = Math.min(
    (vp.width - 2 * vp.margin) / w,
    (vp.height - 2 * vp.margin) / h,
  );
  const px0 = (vp.width - scale * w) / 2;
  const py0 = (vp.height - scale * h) / 2;
  return {
    pixelsPerMeter: scale,
    dataToPixel([x, y]) {
      return [px0 + (x - extent.x0) * scale,
              vp.height - py0 - (y - extent.y0) * scale];
    },
    pixelToData([px, py]) {
      return [extent.x0 + (px - px0) / scale,
              extent.y0 + (vp.height - py0 - py) / scale];
    },
  };
}

export interface JobView {
  id: string;
  kind: "analysis" | "qsweep";
  status: "queued" | "running" | "done" | "failed";
}

export interface ViewState {
  field: FieldCreated | null;
  pickMode: PickMode;
  mouth: Pt | null;
  tip: Pt | null;
  polyline: Pt[];          // interior vertices between mouth and tip
  maskRect: { a: Pt; b: Pt } | null;
  echo: CrackEcho | null;  // last snapped echo from the service
  banner: string | null;
  job: JobView | null;
  suggestedAngleRad: number | null;
}

export function initialState(): ViewState {
  return {
    field: null,
    pickMode: "mouth",
    mouth: null,
    tip: null,
    polyline: [],
    maskRect: null,
    echo: null,
    banner: null,
    job: null,
    suggestedAngleRad: null,
  };
}

export function withField(state: ViewState, field: FieldCreated): ViewState {
  return { ...initialState(), field };
}

export function setMode(state: ViewState, mode: PickMode): ViewState {
  return { ...state, pickMode: mode };
}

function inExtent(p: Pt, e: Extent): boolean {
  return p[0] >= e.x0 && p[0] <= e.x1 && p[1] >= e.y0 && p[1] <= e.y1;
}

export interface ClickOutcome {
  state: ViewState;
  accepted: boolean;
  reason?: string;
}

/** A click in data coordinates; clicks outside the grid never leave the client. */
export function clickAt(state: ViewState, p: Pt): ClickOutcome {
  if (!state.field) {
    return { state, accepted: false, reason: "no field loaded" };
  }
  if (!inExtent(p, fieldExtent(state.field))) {
    return { state, accepted: false, reason: "outside the field of view" };
  }
  switch (state.pickMode) {
    case "mouth":
      return { state: { ...state, mouth: p, echo: null }, accepted: true };
    case "tip":
      return { state: { ...state, tip: p, echo: null }, accepted: true };
    case "polyline":
      return {
        state: { ...state, polyline: [...state.polyline, p], echo: null },
        accepted: true,
      };
    default:
      return { state, accepted: false, reason: "mask mode uses a drag" };
  }
}

/** Mask drag in data coordinates; a degenerate rectangle is a no-op. */
export function dragMask(state: ViewState, a: Pt, b: Pt): ClickOutcome {
  if (a[0] === b[0] || a[1] === b[1]) {
    return { state, accepted: false, reason: "zero-area mask ignored" };
  }
  return { state: { ...state, maskRect: { a, b }, echo: null }, accepted: true };
}

export function clearAnnotations(state: ViewState): ViewState {
  return {
    ...state,
    mouth: null,
    tip: null,
    polyline: [],
    maskRect: null,
    echo: null,
  };
}

function maskDoc(state: ViewState): MaskDoc | null {
  if (!state.maskRect) return null;
  return { kind: "rect", vertices: [state.maskRect.a, state.maskRect.b] };
}

/** The crack document the service will snap; null until mouth and tip exist. */
export function crackRequest(state: ViewState,
                             qAngleRad: number | null = null): CrackRequest | null {
  if (!state.tip || !state.mouth) return null;
  const body: CrackRequest = { tip: state.tip, mask: maskDoc(state) };
  if (state.polyline.length > 0) {
    body.polyline = [state.mouth, ...state.polyline, state.tip];
  } else {
    body.mouth = state.mouth;
  }
  if (qAngleRad !== null) body.q_angle = qAngleRad;
  return body;
}

export function applyEcho(state: ViewState, echo: CrackEcho): ViewState {
  return { ...state, echo, banner: null };
}

export function withBanner(state: ViewState, message: string | null): ViewState {
  return { ...state, banner: message };
}
