import { el } from "../dom.js";
import type { WhatIfResponse } from "../types.js";

/**
 * What-if drawer: the applied override in both units, every observation
 * whose regime flipped, and any verdict changes. All strings below are
 * fields of the what-if response; an empty flip list renders an explicit
 * "no flips" line so identity overrides are visibly inert.
 */
export function whatIfDrawer(response: WhatIfResponse): HTMLElement {
  const { delta, regime_causality: rc } = response;
  const root = el("aside", "whatif-drawer");
  root.append(el("h3", undefined, "What-if"));
  root.append(
    el(
      "p",
      "whatif-gamma",
      `γ ${delta.gamma_from} (level ${delta.gamma_from_level}) → ` +
        `${delta.gamma_to} (level ${delta.gamma_to_level})`,
    ),
  );
  root.append(
    el(
      "p",
      "whatif-sizes",
      `regimes ${rc.regime_sizes[0]} / ${rc.regime_sizes[1]} observations, ` +
        `${rc.dropped_rows} straddling rows dropped`,
    ),
  );

  root.append(el("h4", undefined, `Flips (${delta.n_flips})`));
  const flips = el("ul", "flip-list");
  for (const flip of delta.flips) {
    flips.append(
      el("li", "flip", `${flip.entity} ${flip.period}: ${flip.from} → ${flip.to}`),
    );
  }
  if (delta.flips.length === 0) {
    flips.append(el("li", "no-flips", "no observations change regime"));
  }
  root.append(flips);

  const changes = el("ul", "direction-changes");
  if (delta.direction_changes.length > 0) {
    root.append(el("h4", undefined, "Verdict changes"));
    for (const change of delta.direction_changes) {
      changes.append(
        el(
          "li",
          "direction-change",
          `${change.regime} / ${change.horizon}: ${change.from} → ${change.to}`,
        ),
      );
    }
    root.append(changes);
  }

  const verdicts = el("dl", "whatif-verdicts");
  for (const [name, regime] of [["low", rc.low], ["high", rc.high]] as const) {
    verdicts.append(el("dt", undefined, `${name} regime`));
    verdicts.append(
      el(
        "dd",
        "arrow",
        `short ${regime.short_run.arrow_at_10}, long ${regime.long_run.arrow_at_10}`,
      ),
    );
  }
  root.append(verdicts);

  for (const warning of rc.warnings) {
    root.append(el("p", "warning", warning));
  }
  return root;
}
