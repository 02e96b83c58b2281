import { describe, expect, it } from "vitest";

import { renderTable, tableOrSkipNote } from "../src/tables.js";
import { datasetView } from "../src/views/dataset.js";
import type { DatasetInfo, DatasetStats, TablePayload } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const info = loadFixture<DatasetInfo>("dataset");
const stats = loadFixture<DatasetStats>("dataset_stats");

describe("dataset browser", () => {
  it("summarizes the panel shape", () => {
    const view = datasetView(info, stats);
    const line = view.querySelector(".dataset-shape")!.textContent!;
    expect(line).toContain(`${info.n_entities} entities`);
    expect(line).toContain(`${info.n_periods} periods`);
    for (const variable of info.variables) {
      expect(line).toContain(variable);
    }
    expect(view.querySelector(".dataset-id")!.textContent).toContain(info.id);
  });

  it("renders both pre-analysis tables from the stats payload", () => {
    const view = datasetView(info, stats);
    const tables = view.querySelectorAll("table");
    expect(tables.length).toBe(2);
    expect(tables[0].querySelector("caption")!.textContent).toBe(stats.descriptives.title);
    const headers = Array.from(tables[0].querySelectorAll("th")).map((th) => th.textContent);
    expect(headers).toEqual(stats.descriptives.columns);
  });
});

describe("table renderer", () => {
  const table: TablePayload = {
    title: "Example",
    columns: ["A", "B"],
    rows: [
      ["x", 1],
      ["y", "2.00** (0.0000)"],
    ],
  };

  it("round-trips columns and rows as text", () => {
    const node = renderTable(table);
    const cells = Array.from(node.querySelectorAll("td")).map((td) => td.textContent);
    expect(cells).toEqual(["x", "1", "y", "2.00** (0.0000)"]);
  });

  it("notes skipped stages instead of rendering empty tables", () => {
    const note = tableOrSkipNote({ ...table, rows: [] }, true);
    expect(note.tagName).toBe("P");
    expect(note.textContent).toBe("Example: stage skipped");
  });
});
