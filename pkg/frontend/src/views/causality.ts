import { el } from "../dom.js";
import { tableOrSkipNote } from "../tables.js";
import type { NarrativeFlags, Report } from "../types.js";

function arrowCard(title: string, shortRun: string | null, longRun: string | null): HTMLElement {
  const card = el("div", "arrow-card");
  card.append(el("h3", undefined, title));
  const dl = el("dl");
  dl.append(el("dt", undefined, "Short run"));
  dl.append(el("dd", "arrow short-run-arrow", shortRun ?? "—"));
  dl.append(el("dt", undefined, "Long run"));
  dl.append(el("dd", "arrow long-run-arrow", longRun ?? "—"));
  card.append(dl);
  return card;
}

/**
 * Causality dashboard. Arrow strings and starred cells come verbatim from
 * the report payload; the cards summarize, the tables carry the marks.
 */
export function causalityView(report: Report): HTMLElement {
  const root = el("section", "view causality-view");
  root.append(el("h2", undefined, "Causality"));

  const flags: NarrativeFlags = report.narrative_flags;
  const cards = el("div", "arrow-cards");
  cards.append(arrowCard("Full sample", flags.short_run, flags.long_run));
  cards.append(
    arrowCard("Low regime", flags.low_regime?.short_run ?? null, flags.low_regime?.long_run ?? null),
  );
  cards.append(
    arrowCard("High regime", flags.high_regime?.short_run ?? null, flags.high_regime?.long_run ?? null),
  );
  root.append(cards);

  const skipped = flags.skipped;
  root.append(tableOrSkipNote(report.tables.vecm, skipped.includes("vecm")));
  root.append(tableOrSkipNote(report.tables.regime_causality, skipped.includes("regime_causality")));

  for (const warning of report.warnings) {
    root.append(el("p", "warning", warning));
  }
  return root;
}
