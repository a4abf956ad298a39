import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import {
  renderBalanceTable,
  renderDashboard,
  renderDecisionBanner,
  renderDoseLadder,
  renderObdPanel,
  renderPendingList,
} from "../src/render.js";
import type { ObdReport, TrialState } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixture = <T>(name: string): T =>
  JSON.parse(readFileSync(join(here, "..", "fixtures", name), "utf8")) as T;

const state = fixture<TrialState>("state.json");
const stage2 = fixture<TrialState>("state_stage2.json");
const report = fixture<ObdReport>("report.json");

describe("dose ladder", () => {
  it("renders one row per dose with tallies from the API", () => {
    const html = renderDoseLadder(state);
    for (const d of state.doses) {
      expect(html).toContain(`<td>d${d.dose}</td><td>${d.enrolled}</td><td>${d.assessed}</td>`);
    }
    expect(html).toMatchSnapshot();
  });

  it("badges the current dose and eliminated doses", () => {
    const html = renderDoseLadder(state);
    expect(html).toContain("badge-current");
    const withElimination = structuredClone(state);
    withElimination.doses[4].eliminated = true;
    expect(renderDoseLadder(withElimination)).toContain("badge-eliminated");
  });
});

describe("decision banner", () => {
  it("shows the fired rule with the boundary values", () => {
    const html = renderDecisionBanner(state.decision);
    expect(html).toContain("de-escalate");
    expect(html).toContain("p-hat = 1/3 = 0.333");
    expect(html).toContain("lambda_d = 0.298");
    expect(html).toMatchSnapshot();
  });

  it("marks stage-1 completion with the stop reason", () => {
    const html = renderDecisionBanner(stage2.decision);
    expect(html).toContain("stage 1 complete");
  });
});

describe("pending assessments", () => {
  it("lists exactly the patients without recorded outcomes", () => {
    const html = renderPendingList(state.patients);
    const pending = state.patients.filter((p) => p.dlt === null);
    for (const p of pending) expect(html).toContain(p.pid);
    const matches = html.match(/<li /g) ?? [];
    expect(matches.length).toBe(pending.length);
  });
});

describe("balance table", () => {
  it("row sums equal the arm totals reported by the API", () => {
    const s2 = stage2.stage2!;
    const html = renderBalanceTable(s2);
    for (const factor of ["X1", "X2"]) {
      const rows = s2.balance_table!.filter((b) => b.factor === factor);
      const low = rows.reduce((a, b) => a + b.low, 0);
      const high = rows.reduce((a, b) => a + b.high, 0);
      expect(low).toBe(s2.arm_totals![0]);
      expect(high).toBe(s2.arm_totals![1]);
    }
    expect(html).toMatchSnapshot();
  });
});

describe("optimal-dose panel", () => {
  it("shows both criteria selections and per-arm gates", () => {
    const html = renderObdPanel(report);
    expect(html).toContain("margin criterion");
    expect(html).toContain("utility criterion");
    for (const arm of report.arms) {
      expect(html).toContain(`<td>d${arm.dose}</td><td>${arm.n}</td>`);
    }
    expect(html).toMatchSnapshot();
  });
});

describe("dashboard", () => {
  it("is a pure function of the API state (hard refresh stability)", () => {
    const once = renderDashboard(state);
    const again = renderDashboard(fixture<TrialState>("state.json"));
    expect(again).toBe(once);
    expect(once).toMatchSnapshot();
  });

  it("renders the stage-2 fixture without client-side computation drift", () => {
    expect(renderDashboard(stage2)).toMatchSnapshot();
  });
});
