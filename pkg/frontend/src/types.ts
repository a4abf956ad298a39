// Shapes of the trial-conduct API responses the console consumes.

export interface DoseRow {
  dose: number;
  enrolled: number;
  assessed: number;
  dlt: number;
  responses: number;
  backfilled: number;
  eliminated: boolean;
}

export interface LastDecision {
  action?: string;
  decision?: string;
  at_dose?: number;
  target?: number;
  n?: number;
  dlt?: number;
  explanation?: string;
  stage1_complete?: boolean;
  stop_reason?: string;
  [key: string]: unknown;
}

export interface DecisionSummary {
  stage: string;
  current_dose: number;
  open_backfill_doses: number[];
  eliminated_doses: number[];
  stage1_complete: boolean;
  last_decision: LastDecision | null;
  cohort: { members: string[]; open: boolean; awaiting_assessment: number };
}

export interface PatientRow {
  pid: string;
  stage: number;
  kind: string;
  dose: number;
  covariates: number[];
  eligible: boolean;
  dlt: boolean | null;
  response: boolean | null;
}

export interface BalanceRow {
  factor: string;
  level: number;
  low: number;
  high: number;
}

export interface Stage2View {
  mtd: number | null;
  d_low: number | null;
  d_high: number | null;
  n1_low: number;
  n1_high: number;
  n2_star: number;
  enrolled_stage2: number;
  remaining_quota: number;
  arm_totals: number[] | null;
  balance_table: BalanceRow[] | null;
}

export interface TrialState {
  trial_id: string;
  stage: string;
  design: Record<string, unknown>;
  doses: DoseRow[];
  decision: DecisionSummary;
  patients: PatientRow[];
  events: number;
  stage2?: Stage2View;
}

export interface ArmReport {
  dose: number;
  n: number;
  dlt: number;
  responses: number;
  observed_dlt_rate: number | null;
  observed_response_rate: number | null;
  safe: boolean;
  effective: boolean;
  pending: number;
}

export interface ObdReport {
  obd_margin: number | null;
  obd_utility: number | null;
  arms: ArmReport[];
  balance: Stage2View;
  partial: boolean;
  caveats: string[];
}

export interface EnrollResponse {
  result: {
    assignment: string;
    dose: number | null;
    patient_id?: string;
    note?: string;
  };
  decision: DecisionSummary;
}
