/** Typed client for the fracture-analysis service. All lengths are meters. */

export interface GridReport {
  nx: number;
  ny: number;
  spacing_x: number;
  spacing_y: number;
  origin: [number, number];
  has_out_of_plane: boolean;
  n_masked: number;
  max_deviation: number;
}

export interface FieldCreated {
  id: string;
  report: GridReport;
}

export interface MagnitudePayload {
  nx: number;
  ny: number;
  spacing_x: number;
  spacing_y: number;
  origin: [number, number];
  values: number[];
  min: number;
  max: number;
  stride: number;
}

export interface MaskDoc {
  kind: "rect";
  vertices: [number, number][];
}

export interface CrackRequest {
  tip: [number, number];
  mouth?: [number, number];
  polyline?: [number, number][];
  q_angle?: number | null;
  mask?: MaskDoc | null;
}

export interface CrackEcho {
  tip: [number, number];
  polyline: [number, number][];
  q_angle: number;
  mask: MaskDoc | null;
  snapped_chain: [number, number][];
  n_seam_nodes: number;
}

export interface PlateauPayload {
  start_contour: number;
  end_contour: number;
  no_plateau: boolean;
  flags: string[];
  mean: Record<string, number>;
  std: Record<string, number>;
}

export interface SeriesPayload {
  contour: number[];
  radius_m: number[];
  J: number[];
  K_I?: number[];
  K_II?: number[];
  K_II_pseudo?: number[];
  K_III?: number[];
  J_III?: number[];
  J_total?: number[];
}

export interface AnalysisResultPayload {
  kind: "analysis";
  series: SeriesPayload;
  plateau: PlateauPayload;
  warnings: string[];
}

export interface QSweepResultPayload {
  kind: "qsweep";
  study: {
    angle_rad: number[];
    angle_rel_deg: number[];
    mean: Record<string, number[]>;
    std: Record<string, number[]>;
  };
  suggestion: { angle_rad: number; angle_deg: number; flag: string };
}

export interface JobPayload {
  id: string;
  field_id: string;
  kind: "analysis" | "qsweep";
  status: "queued" | "running" | "done" | "failed";
  result: AnalysisResultPayload | QSweepResultPayload | null;
  error: { kind: string; message: string } | null;
}

export interface JobOptions {
  material: Record<string, unknown>;
  model?: string;
  n_contours?: number | null;
  plateau?: { window_min?: number; rel_tol?: number; skip?: number };
  angles_deg?: number[];
}

export class ServiceError extends Error {
  status: number;
  kind: string;

  constructor(status: number, kind: string, message: string) {
    super(message);
    this.status = status;
    this.kind = kind;
  }
}

async function reject(res: Response): Promise<never> {
  let kind = "HttpError";
  let message = `${res.status} ${res.statusText}`;
  try {
    const doc = await res.json();
    if (doc && doc.error) {
      kind = doc.error.kind ?? kind;
      message = doc.error.message ?? message;
    }
  } catch {
    /* non-JSON body: keep the status text */
  }
  throw new ServiceError(res.status, kind, message);
}

export class ServiceClient {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async uploadField(data: Blob | string, units: string): Promise<FieldCreated> {
    const blob = typeof data === "string" ? new Blob([data], { type: "text/csv" }) : data;
    const form = new FormData();
    form.append("file", blob, "field.csv");
    const res = await fetch(this.url(`/api/fields?units=${encodeURIComponent(units)}`), {
      method: "POST",
      body: form,
    });
    if (!res.ok) await reject(res);
    return res.json();
  }

  async getMagnitude(fieldId: string): Promise<MagnitudePayload> {
    const res = await fetch(this.url(`/api/fields/${fieldId}/magnitude`));
    if (!res.ok) await reject(res);
    return res.json();
  }

  async putCrack(fieldId: string, body: CrackRequest): Promise<CrackEcho> {
    const res = await fetch(this.url(`/api/fields/${fieldId}/crack`), {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) await reject(res);
    const doc = await res.json();
    return doc.crack;
  }

  async postJob(fieldId: string, kind: "analysis" | "qsweep",
                options: JobOptions): Promise<string> {
    const res = await fetch(this.url(`/api/fields/${fieldId}/jobs`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ kind, options }),
    });
    if (!res.ok) await reject(res);
    const doc = await res.json();
    return doc.job_id;
  }

  async getJob(jobId: string): Promise<JobPayload> {
    const res = await fetch(this.url(`/api/jobs/${jobId}`));
    if (!res.ok) await reject(res);
    return res.json();
  }

  /** Poll until the job settles; one in-flight request at a time. */
  async pollJob(jobId: string, intervalMs = 250, timeoutMs = 120000): Promise<JobPayload> {
    const t0 = Date.now();
    for (;;) {
      const job = await this.getJob(jobId);
      if (job.status === "done" || job.status === "failed") return job;
      if (Date.now() - t0 > timeoutMs) {
        throw new ServiceError(0, "Timeout", `job ${jobId} did not settle in ${timeoutMs} ms`);
      }
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  }
}
