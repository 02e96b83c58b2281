import { el } from "../dom.js";
import { renderTable } from "../tables.js";
import type { DatasetInfo, DatasetStats } from "../types.js";

/** Dataset browser: shape line plus the two pre-analysis tables. */
export function datasetView(info: DatasetInfo, stats: DatasetStats): HTMLElement {
  const root = el("section", "view dataset-view");
  root.append(el("h2", undefined, "Dataset"));
  root.append(
    el(
      "p",
      "dataset-shape",
      `${info.n_entities} entities × ${info.n_periods} periods — ` +
        `${info.variables.length} variables (${info.variables.join(", ")})`,
    ),
  );
  root.append(el("p", "dataset-id", `content hash ${info.id}`));
  root.append(renderTable(stats.descriptives));
  root.append(renderTable(stats.correlation));
  return root;
}
