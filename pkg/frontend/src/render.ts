// Pure HTML renderers: every value shown comes straight from an API
// response field; the console computes nothing statistical on its own.

import type {
  ArmReport,
  DecisionSummary,
  EnrollResponse,
  ObdReport,
  PatientRow,
  Stage2View,
  TrialState,
} from "./types.js";

const esc = (v: unknown): string =>
  String(v)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");

const pct = (v: number | null): string =>
  v === null || v === undefined ? "-" : `${(100 * v).toFixed(1)}%`;

export function renderDoseLadder(state: TrialState): string {
  const open = new Set(state.decision.open_backfill_doses);
  const current = state.decision.current_dose;
  const rows = state.doses
    .map((d) => {
      const badges: string[] = [];
      if (d.dose === current && state.stage === "stage1") badges.push("current");
      if (d.eliminated) badges.push("eliminated");
      else if (open.has(d.dose)) badges.push("open-for-backfill");
      const badgeHtml = badges
        .map((b) => `<span class="badge badge-${b}">${b}</span>`)
        .join(" ");
      return (
        `<tr class="${d.eliminated ? "dose-eliminated" : ""}">` +
        `<td>d${d.dose}</td><td>${d.enrolled}</td><td>${d.assessed}</td>` +
        `<td>${d.dlt}</td><td>${d.responses}</td><td>${d.backfilled}</td>` +
        `<td>${badgeHtml}</td></tr>`
      );
    })
    .join("\n");
  return (
    `<table class="dose-ladder"><thead><tr>` +
    `<th>dose</th><th>enrolled</th><th>assessed</th><th>DLTs</th>` +
    `<th>responses</th><th>backfilled</th><th>status</th>` +
    `</tr></thead><tbody>\n${rows}\n</tbody></table>`
  );
}

export function renderDecisionBanner(decision: DecisionSummary): string {
  const last = decision.last_decision;
  const headline = last?.decision
    ? `${esc(last.decision)} (dose d${decision.current_dose})`
    : `awaiting first cohort at dose d${decision.current_dose}`;
  const rule = last?.explanation ? `<div class="rule">${esc(last.explanation)}</div>` : "";
  const stop = decision.stage1_complete
    ? `<div class="stop">stage 1 complete${last?.stop_reason ? `: ${esc(last.stop_reason)}` : ""}</div>`
    : "";
  const pending = decision.cohort.awaiting_assessment
    ? `<div class="pending-note">${decision.cohort.awaiting_assessment} cohort assessment(s) outstanding</div>`
    : "";
  return `<div class="banner banner-${esc(last?.decision ?? "none")}">` +
    `<div class="headline">${headline}</div>${rule}${stop}${pending}</div>`;
}

export function renderPendingList(patients: PatientRow[]): string {
  const pending = patients.filter((p) => p.dlt === null);
  if (!pending.length) return `<p class="empty">no assessments outstanding</p>`;
  const items = pending
    .map(
      (p) =>
        `<li data-pid="${esc(p.pid)}">${esc(p.pid)} at d${p.dose} ` +
        `(${esc(p.kind)}, stage ${p.stage})</li>`
    )
    .join("\n");
  return `<ul class="pending">\n${items}\n</ul>`;
}

export function renderBalanceTable(stage2: Stage2View | undefined): string {
  if (!stage2 || !stage2.balance_table) {
    return `<p class="empty">randomization stage not started</p>`;
  }
  const rows = stage2.balance_table
    .map(
      (b) =>
        `<tr><td>${esc(b.factor)}</td><td>${b.level}</td>` +
        `<td>${b.low}</td><td>${b.high}</td></tr>`
    )
    .join("\n");
  const totals = stage2.arm_totals ?? ["-", "-"];
  return (
    `<table class="balance"><thead>` +
    `<tr><th>factor</th><th>level</th><th>d${stage2.d_low ?? "-"} (low)</th>` +
    `<th>d${stage2.d_high ?? "-"} (high)</th></tr></thead><tbody>\n${rows}\n` +
    `<tr class="totals"><td colspan="2">total</td><td>${totals[0]}</td><td>${totals[1]}</td></tr>` +
    `</tbody></table>` +
    `<p class="quota">stage-2 quota ${stage2.n2_star}, enrolled ${stage2.enrolled_stage2}, ` +
    `remaining ${stage2.remaining_quota}</p>`
  );
}

function renderArm(arm: ArmReport): string {
  return (
    `<tr><td>d${arm.dose}</td><td>${arm.n}</td>` +
    `<td>${arm.dlt} (${pct(arm.observed_dlt_rate)})</td>` +
    `<td>${arm.responses} (${pct(arm.observed_response_rate)})</td>` +
    `<td>${arm.safe ? "yes" : "no"}</td><td>${arm.effective ? "yes" : "no"}</td>` +
    `<td>${arm.pending}</td></tr>`
  );
}

export function renderObdPanel(report: ObdReport): string {
  const caveats = report.caveats.length
    ? `<ul class="caveats">${report.caveats.map((c) => `<li>${esc(c)}</li>`).join("")}</ul>`
    : "";
  const arms = report.arms.map(renderArm).join("\n");
  const sel = (v: number | null) => (v === null ? "none" : `d${v}`);
  return (
    `<div class="obd ${report.partial ? "obd-partial" : ""}">` +
    `<div class="selections">margin criterion: <b>${sel(report.obd_margin)}</b> | ` +
    `utility criterion: <b>${sel(report.obd_utility)}</b></div>` +
    (report.partial ? `<div class="partial-note">report is partial</div>` : "") +
    caveats +
    `<table class="arms"><thead><tr><th>arm</th><th>n</th><th>DLTs</th>` +
    `<th>responses</th><th>safe</th><th>effective</th><th>pending</th></tr></thead>` +
    `<tbody>\n${arms}\n</tbody></table></div>`
  );
}

export function renderAssignmentCard(res: EnrollResponse): string {
  const r = res.result;
  if (r.assignment === "not-enrolled") {
    return `<div class="card card-warn">not enrolled: ${esc(r.note ?? "")}</div>`;
  }
  return (
    `<div class="card card-ok">${esc(r.patient_id ?? "")} assigned to ` +
    `<b>d${r.dose}</b> (${esc(r.assignment)})</div>`
  );
}

export function renderDesignSummary(state: TrialState): string {
  const d = state.design as Record<string, unknown>;
  const core =
    d["engine"] === "boin"
      ? `target DLT rate ${d["phi"]}, n_stop ${d["n_stop"]}, stage-1 cap ${d["max_n1"]}`
      : `interval (${d["gamma1"]}, ${d["gamma2"]}), eta ${d["eta"]}, stage-1 cap ${d["max_n1"]}`;
  return (
    `<div class="design">trial <b>${esc(state.trial_id)}</b> | engine ${esc(d["engine"])} | ` +
    `${core} | backfill cap ${d["n_cap"]}/dose | stage-2 target ${d["n2"]} | stage: ` +
    `<b>${esc(state.stage)}</b></div>`
  );
}

export function renderDashboard(state: TrialState): string {
  return [
    renderDesignSummary(state),
    renderDecisionBanner(state.decision),
    `<h2>dose ladder</h2>`,
    renderDoseLadder(state),
    `<h2>assessments outstanding</h2>`,
    renderPendingList(state.patients),
    `<h2>stage-2 balance</h2>`,
    renderBalanceTable(state.stage2),
  ].join("\n");
}
