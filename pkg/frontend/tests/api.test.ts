import { describe, expect, it, vi } from "vitest";

import { ApiError, Client } from "../src/api.js";
import type { Report } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const report = loadFixture<Report>("report");

function fakeFetch(status: number, body: unknown) {
  return vi.fn(async () => ({
    ok: status >= 200 && status < 300,
    status,
    statusText: "",
    json: async () => body,
  })) as unknown as (input: string, init?: RequestInit) => Promise<Response>;
}

describe("service client", () => {
  it("fetches reports from the documented route", async () => {
    const fetchFn = fakeFetch(200, report);
    const client = new Client("", fetchFn);
    const got = await client.report("abc123");
    expect(got).toEqual(report);
    expect(fetchFn).toHaveBeenCalledWith("/sessions/abc123/report", undefined);
  });

  it("uploads datasets as raw CSV", async () => {
    const fetchFn = fakeFetch(201, { id: "deadbeef", n_entities: 10, n_periods: 50, variables: [] });
    const client = new Client("", fetchFn);
    await client.uploadDataset("entity,period,variable,value\n");
    const [path, init] = (fetchFn as ReturnType<typeof vi.fn>).mock.calls[0];
    expect(path).toBe("/datasets");
    expect(init.method).toBe("POST");
    expect(init.body).toBe("entity,period,variable,value\n");
  });

  it("posts what-if overrides as JSON", async () => {
    const fetchFn = fakeFetch(200, loadFixture("whatif_identity"));
    const client = new Client("", fetchFn);
    await client.whatIf("s1", 9.5158);
    const [path, init] = (fetchFn as ReturnType<typeof vi.fn>).mock.calls[0];
    expect(path).toBe("/sessions/s1/what-if");
    expect(JSON.parse(init.body)).toEqual({ gamma: 9.5158 });
  });

  it("paginates session steps through query parameters", async () => {
    const fetchFn = fakeFetch(200, loadFixture("session"));
    const client = new Client("", fetchFn);
    await client.session("s1", 2, 3);
    expect(fetchFn).toHaveBeenCalledWith("/sessions/s1?offset=2&limit=3", undefined);
  });

  it("turns error payloads into typed errors", async () => {
    const body = {
      code: "RegimeTooSmall",
      message: "low regime has 0 contributing entities; at least 3 required",
      details: { regime: "low", required: 3 },
    };
    const client = new Client("", fakeFetch(422, body));
    const err = await client.whatIf("s1", -1e9).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("RegimeTooSmall");
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).details).toEqual({ regime: "low", required: 3 });
  });

  it("prefixes an explicit base URL", async () => {
    const fetchFn = fakeFetch(200, { status: "ok", version: "0.1.0" });
    const client = new Client("http://127.0.0.1:8080", fetchFn);
    await client.health();
    expect(fetchFn).toHaveBeenCalledWith("http://127.0.0.1:8080/health", undefined);
  });
});
