import { readFileSync } from "node:fs";
import { join } from "node:path";

/** Recorded service responses; regenerated from the bundled demo panel. */
export function loadFixture<T>(name: string): T {
  const path = join(process.cwd(), "tests", "fixtures", `${name}.json`);
  return JSON.parse(readFileSync(path, "utf-8")) as T;
}
