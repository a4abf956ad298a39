// Console wiring: fetch state, render, and re-fetch after every mutation.
// A hard refresh always reproduces the dashboard because nothing here
// holds authoritative state.

import { ApiError, TrialApi } from "./api.js";
import { renderAssignmentCard, renderDashboard, renderObdPanel } from "./render.js";
import type { TrialState } from "./types.js";

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

export class Console {
  api: TrialApi;
  trialId: string;

  constructor(api: TrialApi, trialId: string) {
    this.api = api;
    this.trialId = trialId;
  }

  async refresh(): Promise<TrialState> {
    const state = await this.api.state(this.trialId);
    $("dashboard").innerHTML = renderDashboard(state);
    const outcomeForm = $("outcome-form") as HTMLFormElement;
    const enrollForm = $("enroll-form") as HTMLFormElement;
    const enrollDisabled =
      state.stage === "completed" ||
      state.stage === "terminated" ||
      (state.stage === "stage2" && (state.stage2?.remaining_quota ?? 0) === 0);
    enrollForm
      .querySelectorAll<HTMLButtonElement>("button")
      .forEach((b) => (b.disabled = enrollDisabled));
    const quotaNote = $("quota-note");
    quotaNote.textContent =
      state.stage === "stage2" && (state.stage2?.remaining_quota ?? 0) === 0
        ? "stage-2 quota reached; enrollment closed"
        : "";
    outcomeForm.hidden = state.patients.length === 0;
    if (state.stage === "stage2" || state.stage === "completed") {
      try {
        const report = await this.api.report(this.trialId);
        $("obd-panel").innerHTML = renderObdPanel(report);
      } catch (err) {
        if (!(err instanceof ApiError && err.status === 409)) throw err;
      }
    }
    return state;
  }

  async submitOutcome(patientId: string, dlt: boolean, response: boolean | null) {
    try {
      await this.api.recordOutcome(this.trialId, patientId, dlt, response);
      this.setError("");
    } catch (err) {
      // surface the server's explanation and keep the dashboard as is
      this.setError(err instanceof Error ? err.message : String(err));
      return;
    }
    await this.refresh();
  }

  async enrollNext(covariates: number[]) {
    try {
      const res = await this.api.enroll(this.trialId, covariates);
      $("assignment-card").innerHTML = renderAssignmentCard(res);
      this.setError("");
    } catch (err) {
      this.setError(err instanceof Error ? err.message : String(err));
      return;
    }
    await this.refresh();
  }

  setError(message: string) {
    const box = $("error-box");
    box.textContent = message;
    box.hidden = !message;
  }
}

export function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const trialId = params.get("trial") ?? "demo";
  const console_ = new Console(new TrialApi(params.get("api") ?? ""), trialId);

  ($("outcome-form") as HTMLFormElement).addEventListener("submit", (ev) => {
    ev.preventDefault();
    const form = ev.target as HTMLFormElement;
    const data = new FormData(form);
    void console_.submitOutcome(
      String(data.get("patient_id")),
      data.get("dlt") === "1",
      data.get("response") === null ? null : data.get("response") === "1"
    );
  });

  ($("enroll-form") as HTMLFormElement).addEventListener("submit", (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    const covariates = ["x1", "x2", "x3"].map((k) => (data.get(k) === "1" ? 1 : 0));
    void console_.enrollNext(covariates);
  });

  void console_.refresh();
}

if (typeof document !== "undefined" && document.getElementById("dashboard")) {
  boot();
}
