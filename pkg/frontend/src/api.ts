// Typed fetch wrapper around the model service. Every response body is
// appended to `log` before being handed to the caller, so anything the UI
// displays can be traced back to a logged server payload.

import type {
  CorrelationsResponse,
  InterveneRequestBody,
  InterveneResponse,
  ModelMeta,
  PatientDetail,
  PatientsResponse,
  PredictResponse,
} from "./types.js";

export interface MinimalResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  path: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<MinimalResponse>;

export interface LogEntry {
  seq: number;
  method: string;
  path: string;
  status: number;
  /** Request body as sent, if any. */
  request?: unknown;
  /** Parsed response body exactly as received. */
  body: unknown;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

export class ApiClient {
  readonly log: LogEntry[] = [];
  private seq = 0;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (p, init) => fetch(p, init),
  ) {}

  private async request<T>(method: string, path: string, payload?: unknown): Promise<T> {
    const init =
      payload === undefined
        ? { method }
        : {
            method,
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(payload),
          };
    const res = await this.fetchFn(this.baseUrl + path, init);
    const body = await res.json();
    this.log.push({
      seq: this.seq++,
      method,
      path,
      status: res.status,
      request: payload,
      body,
    });
    if (!res.ok) {
      const detail = (body as { detail?: string }).detail ?? `HTTP ${res.status}`;
      throw new ApiError(res.status, detail);
    }
    return body as T;
  }

  patients(): Promise<PatientsResponse> {
    return this.request("GET", "/patients");
  }

  patient(id: string): Promise<PatientDetail> {
    return this.request("GET", `/patients/${id}`);
  }

  predict(patientId: string, schemaHash?: string): Promise<PredictResponse> {
    return this.request("POST", "/predict", {
      patient_id: patientId,
      schema_hash: schemaHash,
    });
  }

  intervene(body: InterveneRequestBody): Promise<InterveneResponse> {
    return this.request("POST", "/intervene", body);
  }

  meta(): Promise<ModelMeta> {
    return this.request("GET", "/model/meta");
  }

  correlations(): Promise<CorrelationsResponse> {
    return this.request("GET", "/model/correlations");
  }

  latestReport(): Promise<unknown> {
    return this.request("GET", "/reports/latest");
  }
}
