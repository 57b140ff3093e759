/** Typed client for the inspection service API. Only the documented
 * /api/* endpoints are ever touched. */

export interface Meta {
  direction_count: number;
  layer: string;
  parametrization: string;
  method: string;
  magnitude_range: number;
  t_limit: number;
}

export interface DirectionInfo {
  id: number;
  label: string;
  method: string;
  score: number | null;
  magnitude_range: number | null;
}

export interface AnnotationDraft {
  direction_id: number;
  label: string;
  interpretable: boolean;
  quality: number;
  t_min: number;
  t_max: number;
  annotator: string;
}

export type FieldErrors = Record<string, string>;

export type SubmitResult =
  | { ok: true }
  | { ok: false; fieldErrors: FieldErrors; status: number };

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Client-side mirror of the server-side schema; a draft failing here is
 * never sent. */
export function validateDraft(draft: AnnotationDraft): FieldErrors {
  const errors: FieldErrors = {};
  if (!Number.isInteger(draft.quality) || draft.quality < 1 || draft.quality > 5) {
    errors.quality = "quality must be an integer from 1 to 5";
  }
  if (!draft.label.trim()) {
    errors.label = "label must not be empty";
  }
  if (!draft.annotator.trim()) {
    errors.annotator = "annotator must not be empty";
  }
  if (!(draft.t_min <= draft.t_max)) {
    errors.t_max = "safe range must have t_min <= t_max";
  }
  if (!Number.isInteger(draft.direction_id) || draft.direction_id < 0) {
    errors.direction_id = "select a direction first";
  }
  return errors;
}

function extractFieldErrors(body: unknown): FieldErrors {
  const out: FieldErrors = {};
  const detail = (body as { detail?: unknown })?.detail;
  if (Array.isArray(detail)) {
    for (const item of detail) {
      const loc = Array.isArray(item?.loc) ? item.loc : [];
      const field = String(loc[loc.length - 1] ?? "request");
      out[field] = String(item?.msg ?? "invalid value");
    }
  } else if (detail !== undefined) {
    out.request = String(detail);
  }
  return out;
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike,
    private readonly base: string = "",
  ) {}

  async getMeta(): Promise<Meta> {
    const r = await this.fetchFn(`${this.base}/api/meta`);
    if (!r.ok) throw new Error(`meta request failed: ${r.status}`);
    return (await r.json()) as Meta;
  }

  async getDirections(): Promise<DirectionInfo[]> {
    const r = await this.fetchFn(`${this.base}/api/directions`);
    if (!r.ok) throw new Error(`directions request failed: ${r.status}`);
    return (await r.json()) as DirectionInfo[];
  }

  renderUrl(dir: number, t: number, seed: number): string {
    return `${this.base}/api/render?dir=${dir}&t=${t}&seed=${seed}`;
  }

  stripUrl(dir: number, seed: number, steps: number, tmax: number): string {
    return `${this.base}/api/strip?dir=${dir}&seed=${seed}&steps=${steps}&tmax=${tmax}`;
  }

  async fetchFrame(url: string): Promise<Blob> {
    const r = await this.fetchFn(url);
    if (!r.ok) {
      const body = await r.json().catch(() => ({}));
      const detail = (body as { detail?: unknown })?.detail;
      throw new Error(`render failed (${r.status}): ${detail ?? "unknown"}`);
    }
    return await r.blob();
  }

  async submitAnnotation(draft: AnnotationDraft): Promise<SubmitResult> {
    const r = await this.fetchFn(`${this.base}/api/annotations`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(draft),
    });
    if (r.ok) return { ok: true };
    const body = await r.json().catch(() => ({}));
    return { ok: false, fieldErrors: extractFieldErrors(body), status: r.status };
  }

  async listAnnotations(): Promise<Record<string, unknown>[]> {
    const r = await this.fetchFn(`${this.base}/api/annotations`);
    if (!r.ok) throw new Error(`annotations request failed: ${r.status}`);
    return (await r.json()) as Record<string, unknown>[];
  }

  /** The export is the server's CSV verbatim; no client-side reshaping. */
  async exportCsv(): Promise<Blob> {
    const r = await this.fetchFn(`${this.base}/api/annotations/export?format=csv`);
    if (!r.ok) throw new Error(`export failed: ${r.status}`);
    return await r.blob();
  }
}
