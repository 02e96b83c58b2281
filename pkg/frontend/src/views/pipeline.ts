import { el } from "../dom.js";
import type { NarrativeFlags, SessionBody } from "../types.js";

const STAGE_TITLES: Record<string, string> = {
  descriptives: "Descriptive statistics",
  unit_root: "Unit roots",
  kao: "Cointegration",
  correlation: "Correlation",
  limer: "Poolability",
  hausman: "Fixed vs random effects",
  vecm: "Error-correction causality",
  threshold: "Threshold search",
  regression: "Regime regression",
  regime_causality: "Regime causality",
  report: "Report",
  what_if: "What-if",
  error: "Error",
};

function stageCard(kind: string, detail: string, state: "done" | "skipped" | "error"): HTMLElement {
  const card = el("li", `stage stage-${state}`);
  card.dataset.kind = kind;
  card.append(el("span", "stage-title", STAGE_TITLES[kind] ?? kind));
  if (detail) card.append(el("span", "stage-detail", detail));
  return card;
}

/**
 * Pipeline board: one card per executed step in order, then one per
 * skipped stage. What-if steps appear at the end of the executed list,
 * so applying an override visibly appends to the history.
 */
export function pipelineView(session: SessionBody, flags: NarrativeFlags | null): HTMLElement {
  const root = el("section", "view pipeline-view");
  root.append(el("h2", undefined, "Pipeline"));
  root.append(el("p", "session-line", `session ${session.id} — ${session.status}`));

  if (session.status === "error" && session.error) {
    root.append(el("p", "error-banner", `${session.error.code}: ${session.error.message}`));
  }
  if (flags?.stop_reason) {
    root.append(el("p", "stop-banner", flags.stop_reason));
  }

  const list = el("ol", "stage-list");
  for (const step of session.steps) {
    let detail = "";
    if (step.kind === "what_if") {
      detail = `γ = ${String((step.params as { gamma?: unknown }).gamma ?? "")}`;
    } else if (step.seed !== null) {
      detail = `seed ${step.seed}`;
    }
    list.append(stageCard(step.kind, detail, step.kind === "error" ? "error" : "done"));
  }
  for (const kind of flags?.skipped ?? []) {
    list.append(stageCard(kind, "skipped", "skipped"));
  }
  root.append(list);

  for (const note of flags?.notes ?? []) {
    root.append(el("p", "pipeline-note", note));
  }
  return root;
}
