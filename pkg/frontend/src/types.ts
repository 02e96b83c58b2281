// Shapes of the JSON bodies served by the analysis service. Everything the
// UI displays is read from these; the client never derives statistics.

export interface TablePayload {
  title: string;
  columns: string[];
  rows: (string | number)[][];
}

export interface RegimeArrows {
  short_run: string;
  long_run: string;
}

export interface NarrativeFlags {
  panel_model: boolean | null;
  fixed_effects: boolean | null;
  integration: Record<string, string> | null;
  cointegrated: boolean | null;
  n_thresholds: number | null;
  gamma: number | null;
  gamma_level: string | null;
  regime_slopes: { low: number; high: number } | null;
  short_run: string | null;
  long_run: string | null;
  low_regime: RegimeArrows | null;
  high_regime: RegimeArrows | null;
  stop_reason: string | null;
  skipped: string[];
  notes: string[];
}

export type Series = [number, number][];

export interface Report {
  tables: Record<string, TablePayload>;
  plots: { ssr_profile: Series; bootstrap_histogram: Series };
  narrative_flags: NarrativeFlags;
  warnings: string[];
}

export interface PipelineConfig {
  dependent: string;
  regime_dependent_regressor: string;
  threshold_var: string;
  causality_pair: [string, string];
  controls: string[];
  log_vars: string[];
  deterministic: string;
  unit_root_lags: number;
  vecm_lags: number;
  trim: number;
  grid_max: number;
  bootstrap_reps: number;
  alpha: number;
  max_levels: number;
  seed: number;
  threads: number;
}

export interface SessionStep {
  kind: string;
  params: Record<string, unknown>;
  result: unknown;
  timestamp: string;
  seed: number | null;
}

export interface SessionBody {
  v: number;
  id: string;
  dataset_ref: string;
  config: PipelineConfig;
  current_gamma: number | null;
  status: "running" | "complete" | "error";
  n_steps: number;
  offset: number;
  steps: SessionStep[];
  error?: { code: string; message: string };
}

export interface DatasetInfo {
  id: string;
  n_entities: number;
  n_periods: number;
  variables: string[];
  entities?: string[];
  periods?: number[];
}

export interface DatasetStats {
  id: string;
  descriptives: TablePayload;
  correlation: TablePayload;
}

/** One direction verdict as serialized by the causality classifier. */
export interface CausalityVerdict {
  horizon: string;
  direction: string;
  direction_at_10: string;
  arrow: string;
  arrow_at_10: string;
  significance_marks: Record<string, string>;
  wald_stats?: Record<string, Record<string, number>>;
  ect_stats?: Record<string, Record<string, number>>;
  notes: string[];
}

export interface RegimeCausality {
  gamma: number;
  regime_var: string;
  pair: string[];
  regime_sizes: [number, number];
  dropped_rows: number;
  low: { short_run: CausalityVerdict; long_run: CausalityVerdict; vecm: unknown };
  high: { short_run: CausalityVerdict; long_run: CausalityVerdict; vecm: unknown };
  warnings: string[];
}

export interface RegimeFlip {
  entity: string;
  period: number;
  from: "low" | "high";
  to: "low" | "high";
}

export interface DirectionChange {
  regime: string;
  horizon: string;
  from: string;
  to: string;
}

export interface WhatIfDelta {
  gamma_from: number;
  gamma_from_level: string;
  gamma_to: number;
  gamma_to_level: string;
  flips: RegimeFlip[];
  n_flips: number;
  direction_changes: DirectionChange[];
}

export interface WhatIfResponse {
  regime_causality: RegimeCausality;
  delta: WhatIfDelta;
}

/** Threshold-stage entry inside a session step: one fit/test pair per level. */
export interface ThresholdLevel {
  fit: {
    gamma_hat: number;
    gammas: number[];
    s1: number;
    ssr_profile: Series;
    regime_counts: number[];
  };
  test: {
    level: string;
    f_stat: number | string;
    bootstrap_p: number;
    critical_values: [number, number, number];
    reps_used: number;
    decision: string;
    warnings: string[];
  };
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details?: Record<string, unknown>;
}
