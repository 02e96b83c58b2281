import { el } from "./dom.js";
import type { TablePayload } from "./types.js";

/**
 * Renders a report table verbatim. Cells arrive display-ready from the
 * service (stars, brackets and rounding included), so this never touches
 * the values beyond string coercion.
 */
export function renderTable(table: TablePayload, className = "report-table"): HTMLTableElement {
  const root = el("table", className);
  root.append(el("caption", undefined, table.title));

  const head = el("thead");
  const headRow = el("tr");
  for (const column of table.columns) {
    headRow.append(el("th", undefined, column));
  }
  head.append(headRow);
  root.append(head);

  const body = el("tbody");
  for (const row of table.rows) {
    const tr = el("tr");
    for (const cell of row) {
      tr.append(el("td", undefined, String(cell)));
    }
    body.append(tr);
  }
  root.append(body);
  return root;
}

/** Table section that renders nothing when the stage did not run. */
export function tableOrSkipNote(table: TablePayload, stageSkipped: boolean): HTMLElement {
  if (table.rows.length === 0) {
    const note = stageSkipped ? "stage skipped" : "no rows";
    return el("p", "table-skip", `${table.title}: ${note}`);
  }
  return renderTable(table);
}
