import { ApiError, Client } from "./api.js";
import { clear } from "./dom.js";
import { datasetView } from "./views/dataset.js";
import { pipelineView } from "./views/pipeline.js";
import { thresholdView } from "./views/threshold.js";
import { causalityView } from "./views/causality.js";
import { whatIfDrawer } from "./views/whatif.js";
import type { DatasetInfo, Report, SessionBody } from "./types.js";

const POLL_MS = 1000;

interface AppState {
  dataset: DatasetInfo | null;
  sessionId: string | null;
  session: SessionBody | null;
  report: Report | null;
  override: number | null;
  whatIfInFlight: boolean;
}

const state: AppState = {
  dataset: null,
  sessionId: null,
  session: null,
  report: null,
  override: null,
  whatIfInFlight: false,
};

const client = new Client("");

function statusLine(text: string, isError = false): void {
  const bar = document.getElementById("status")!;
  bar.textContent = text;
  bar.className = isError ? "status error" : "status";
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return String(err);
}

async function refreshViews(): Promise<void> {
  const tabs = document.getElementById("views")!;
  clear(tabs as HTMLElement);

  if (state.dataset) {
    try {
      const stats = await client.datasetStats(state.dataset.id);
      tabs.append(datasetView(state.dataset, stats));
    } catch (err) {
      statusLine(describeError(err), true);
    }
  }
  if (state.session) {
    tabs.append(pipelineView(state.session, state.report?.narrative_flags ?? null));
  }
  if (state.report && state.session) {
    tabs.append(
      thresholdView(state.report, state.session, {
        override: state.override ?? undefined,
        onDrag: (gamma) => void applyWhatIf(gamma),
      }),
    );
    tabs.append(causalityView(state.report));
  }
}

async function applyWhatIf(gamma: number): Promise<void> {
  // one in-flight override per session; drags during a request are dropped
  if (!state.sessionId || state.whatIfInFlight) return;
  state.whatIfInFlight = true;
  statusLine(`applying what-if at γ = ${gamma} …`);
  try {
    const response = await client.whatIf(state.sessionId, gamma);
    state.override = gamma;
    state.session = await client.session(state.sessionId);
    const old = document.querySelector(".whatif-drawer");
    old?.remove();
    document.getElementById("drawer-slot")!.append(whatIfDrawer(response));
    statusLine(`what-if applied: ${response.delta.n_flips} flips`);
    await refreshViews();
  } catch (err) {
    statusLine(describeError(err), true);
  } finally {
    state.whatIfInFlight = false;
  }
}

async function pollSession(id: string): Promise<void> {
  const body = await client.session(id);
  if (body.status === "running") {
    statusLine("pipeline running …");
    setTimeout(() => void pollSession(id), POLL_MS);
    return;
  }
  state.session = body;
  if (body.status === "error") {
    statusLine(body.error ? `${body.error.code}: ${body.error.message}` : "pipeline failed", true);
    await refreshViews();
    return;
  }
  state.report = await client.report(id);
  statusLine("pipeline complete");
  await refreshViews();
}

function configFromForm(form: HTMLFormElement): Record<string, unknown> {
  const data = new FormData(form);
  const text = (name: string) => String(data.get(name) ?? "").trim();
  const list = (name: string) =>
    text(name)
      .split(",")
      .map((s) => s.trim())
      .filter(Boolean);
  const config: Record<string, unknown> = {
    dependent: text("dependent"),
    regime_dependent_regressor: text("regressor"),
    threshold_var: text("threshold_var") || text("regressor"),
    causality_pair: list("pair"),
    seed: Number(text("seed") || "0"),
  };
  const logVars = list("log_vars");
  if (logVars.length) config.log_vars = logVars;
  const controls = list("controls");
  if (controls.length) config.controls = controls;
  return config;
}

function wireForms(): void {
  const uploadForm = document.getElementById("upload-form") as HTMLFormElement;
  uploadForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void (async () => {
      const csv = (document.getElementById("csv-input") as HTMLTextAreaElement).value;
      try {
        state.dataset = await client.uploadDataset(csv);
        statusLine(`dataset ${state.dataset.id.slice(0, 12)}… ready`);
        await refreshViews();
      } catch (err) {
        statusLine(describeError(err), true);
      }
    })();
  });

  const runForm = document.getElementById("run-form") as HTMLFormElement;
  runForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void (async () => {
      if (!state.dataset) {
        statusLine("upload a dataset first", true);
        return;
      }
      try {
        const created = await client.createSession(state.dataset.id, configFromForm(runForm));
        state.sessionId = created.id;
        state.report = null;
        state.override = null;
        statusLine("pipeline started");
        setTimeout(() => void pollSession(created.id), POLL_MS);
      } catch (err) {
        statusLine(describeError(err), true);
      }
    })();
  });
}

export function main(): void {
  wireForms();
  void client
    .health()
    .then((h) => statusLine(`service ${h.version} ready`))
    .catch((err) => statusLine(describeError(err), true));
}

if (typeof document !== "undefined" && document.getElementById("views")) {
  main();
}
