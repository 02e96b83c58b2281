import type {
  ApiErrorBody,
  DatasetInfo,
  DatasetStats,
  PipelineConfig,
  Report,
  SessionBody,
  WhatIfResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
    public details?: Record<string, unknown>,
  ) {
    super(message);
  }
}

type Fetch = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin typed wrapper over the service routes. The fetch function is
 * injectable so contract tests can replay recorded responses.
 */
export class Client {
  constructor(
    private base = "",
    private fetchFn: Fetch = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.base + path, init);
    const body = await res.json();
    if (!res.ok) {
      const err = body as ApiErrorBody;
      throw new ApiError(err.code ?? "UnknownError", err.message ?? res.statusText, res.status, err.details);
    }
    return body as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("/health");
  }

  uploadDataset(csv: string): Promise<DatasetInfo> {
    return this.request("/datasets", {
      method: "POST",
      headers: { "Content-Type": "text/csv" },
      body: csv,
    });
  }

  dataset(id: string): Promise<DatasetInfo> {
    return this.request(`/datasets/${id}`);
  }

  datasetStats(id: string): Promise<DatasetStats> {
    return this.request(`/datasets/${id}/stats`);
  }

  createSession(dataset: string, config: Partial<PipelineConfig>): Promise<{ id: string; status: string; poll: string }> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ dataset, config }),
    });
  }

  listSessions(): Promise<{ sessions: { id: string; status: string }[] }> {
    return this.request("/sessions");
  }

  session(id: string, offset = 0, limit = 100): Promise<SessionBody> {
    return this.request(`/sessions/${id}?offset=${offset}&limit=${limit}`);
  }

  report(id: string): Promise<Report> {
    return this.request(`/sessions/${id}/report`);
  }

  whatIf(id: string, gamma: number): Promise<WhatIfResponse> {
    return this.request(`/sessions/${id}/what-if`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ gamma }),
    });
  }
}
