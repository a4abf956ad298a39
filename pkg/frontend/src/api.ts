// Thin fetch client for the trial-conduct API. Errors carry the server's
// problem-details body verbatim.

import type { EnrollResponse, ObdReport, TrialState } from "./types.js";

export class ApiError extends Error {
  status: number;
  detail: string;

  constructor(status: number, title: string, detail: string) {
    super(`${title}: ${detail}`);
    this.status = status;
    this.detail = detail;
  }
}

export class TrialApi {
  base: string;
  token?: string;

  constructor(base = "", token?: string) {
    this.base = base.replace(/\/$/, "");
    this.token = token;
  }

  private headers(): Record<string, string> {
    const h: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) h["X-API-Token"] = this.token;
    return h;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.base + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(
        resp.status,
        (payload as { title?: string }).title ?? `HTTP ${resp.status}`,
        (payload as { detail?: string }).detail ?? ""
      );
    }
    return payload as T;
  }

  state(trialId: string): Promise<TrialState> {
    return this.request("GET", `/trials/${trialId}/state`);
  }

  report(trialId: string): Promise<ObdReport> {
    return this.request("GET", `/trials/${trialId}/report`);
  }

  enroll(trialId: string, covariates: number[], eligible = true): Promise<EnrollResponse> {
    return this.request("POST", `/trials/${trialId}/patients`, { covariates, eligible });
  }

  recordOutcome(
    trialId: string,
    patientId: string,
    dlt: boolean,
    response: boolean | null
  ): Promise<{ decision: unknown }> {
    return this.request("POST", `/trials/${trialId}/outcomes`, {
      patient_id: patientId,
      dlt,
      response,
    });
  }

  advance(trialId: string, dLow?: number, dHigh?: number): Promise<unknown> {
    return this.request("POST", `/trials/${trialId}/advance`, {
      d_low: dLow ?? null,
      d_high: dHigh ?? null,
    });
  }
}
