import { bootstrapHistogram, ssrProfileChart } from "../charts.js";
import { el } from "../dom.js";
import { tableOrSkipNote } from "../tables.js";
import type { Report, SessionBody, ThresholdLevel } from "../types.js";

/** Pulls the threshold stage payload out of the step history, if it ran. */
export function thresholdLevels(session: SessionBody): ThresholdLevel[] {
  const step = session.steps.find((s) => s.kind === "threshold");
  return step ? (step.result as ThresholdLevel[]) : [];
}

export interface ThresholdViewOptions {
  onDrag?: (gamma: number) => void;
  override?: number;
}

/**
 * Threshold explorer: SSR profile with the estimate anchored and a
 * draggable override marker, the bootstrap null histogram with critical
 * values from the first-level test, and the sequential test table.
 */
export function thresholdView(
  report: Report,
  session: SessionBody,
  options: ThresholdViewOptions = {},
): HTMLElement {
  const root = el("section", "view threshold-view");
  root.append(el("h2", undefined, "Threshold"));

  const flags = report.narrative_flags;
  const levels = thresholdLevels(session);
  if (flags.gamma === null || levels.length === 0) {
    root.append(el("p", "table-skip", "threshold stage did not run or found no effect"));
    root.append(tableOrSkipNote(report.tables.threshold_tests, true));
    return root;
  }

  const qvar = session.config.threshold_var;
  const inLogs = session.config.log_vars.includes(qvar);
  const unit = inLogs ? `ln ${qvar}` : qvar;
  root.append(
    el(
      "p",
      "gamma-line",
      `γ̂ = ${flags.gamma} (${unit}), level ${flags.gamma_level}` +
        ` — ${flags.n_thresholds} threshold${flags.n_thresholds === 1 ? "" : "s"} accepted`,
    ),
  );

  root.append(
    ssrProfileChart(report.plots.ssr_profile, {
      gammaHat: flags.gamma,
      override: options.override,
      onDrag: options.onDrag,
      xLabel: unit,
    }),
  );

  const first = levels[0];
  root.append(
    bootstrapHistogram(report.plots.bootstrap_histogram, {
      criticalValues: first.test.critical_values,
      observed: first.test.f_stat,
    }),
  );

  root.append(tableOrSkipNote(report.tables.threshold_tests, false));
  return root;
}
