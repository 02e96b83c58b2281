"""HTTP facade: dataset upload, asynchronous pipeline runs, reports, what-ifs.

Handlers stay thin: every response body is the serialization of an engine
result, and every engine error maps onto a stable ApiError payload
(``{"code", "message", "details"}``) whose code is the engine error class
name. Long pipeline runs execute in the background; clients poll the session
status. Dataset ids are content hashes of the canonical CSV serialization, so
re-uploading the same panel is a no-op that returns the same id.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import BackgroundTasks, FastAPI, Request
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles

from . import __version__
from . import report as rpt
from .errors import InputError, InvalidSpec, NotFound, RegimescopeError
from .panel import PanelDataset, descriptive_stats, load_csv
from .regression import correlation_matrix
from .serialize import dumps, to_jsonable
from .session import (
    PipelineConfig,
    dataset_hash,
    load_report,
    load_session,
    panel_to_csv,
    run_full_pipeline,
    save_session,
    what_if_threshold,
)


def _json_response(payload, status_code: int = 200) -> Response:
    # serialize through the canonical encoder so non-finite floats follow
    # the same convention everywhere (Infinity strings, NaN -> null)
    return Response(dumps(payload, indent=2), status_code=status_code, media_type="application/json")


class _Store:
    """Filesystem layout plus the in-memory run registry."""

    def __init__(self, data_dir: Path):
        self.data_dir = data_dir
        self.datasets = data_dir / "datasets"
        self.sessions = data_dir / "sessions"
        self.datasets.mkdir(parents=True, exist_ok=True)
        self.sessions.mkdir(parents=True, exist_ok=True)
        self.jobs: dict[str, dict] = {}
        self.lock = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = {}

    def session_lock(self, session_id: str) -> threading.Lock:
        with self.lock:
            return self._session_locks.setdefault(session_id, threading.Lock())

    def dataset_path(self, dataset_id: str) -> Path:
        return self.datasets / f"{dataset_id}.csv"

    def put_dataset(self, panel: PanelDataset) -> tuple[str, bool]:
        text = panel_to_csv(panel)
        dataset_id = dataset_hash(text)
        path = self.dataset_path(dataset_id)
        created = not path.exists()
        if created:
            tmp = path.with_suffix(".csv.tmp")
            tmp.write_text(text, encoding="utf-8")
            tmp.replace(path)
        return dataset_id, created

    def get_dataset(self, dataset_id: str) -> PanelDataset:
        path = self.dataset_path(dataset_id)
        if not path.exists():
            raise NotFound(f"no dataset {dataset_id!r}")
        return load_csv(path, layout="long")

    def job_status(self, session_id: str) -> str | None:
        with self.lock:
            job = self.jobs.get(session_id)
            return job["status"] if job else None

    def set_job(self, session_id: str, status: str, error: dict | None = None) -> None:
        with self.lock:
            self.jobs[session_id] = {"status": status, "error": error}

    def list_sessions(self) -> list[dict]:
        seen: dict[str, str] = {}
        for directory in sorted(self.sessions.iterdir()) if self.sessions.exists() else []:
            if (directory / "session.json").exists():
                raw = json.loads((directory / "session.json").read_text(encoding="utf-8"))
                seen[directory.name] = raw.get("status", "draft")
        with self.lock:
            for sid, job in self.jobs.items():
                if job["status"] == "running" or sid not in seen:
                    seen[sid] = job["status"]
        return [{"id": sid, "status": status} for sid, status in sorted(seen.items())]


async def _body_json(request: Request) -> dict:
    try:
        payload = json.loads(await request.body())
    except json.JSONDecodeError as exc:
        raise InputError(f"request body is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise InputError("request body must be a JSON object")
    return payload


def _require(payload: dict, key: str):
    if key not in payload:
        raise InputError(f"missing required key {key!r}")
    return payload[key]


def create_app(
    data_dir: str | Path = "./data",
    default_seed: int | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    store = _Store(Path(data_dir))
    app = FastAPI(title="regimescope", version=__version__)

    @app.exception_handler(RegimescopeError)
    async def _engine_error(_request: Request, exc: RegimescopeError) -> Response:
        details = {
            k: to_jsonable(v)
            for k, v in vars(exc).items()
            if not k.startswith("_")
        }
        body = {"code": exc.code, "message": str(exc), "details": details}
        return _json_response(body, status_code=exc.http_status)

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.post("/datasets")
    async def upload_dataset(request: Request, layout: str = "long"):
        raw = await request.body()
        if not raw:
            raise InputError("empty dataset upload")
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"dataset must be UTF-8 text: {exc}") from None
        panel = load_csv(text, layout=layout)
        dataset_id, created = store.put_dataset(panel)
        body = {
            "id": dataset_id,
            "n_entities": panel.n_entities,
            "n_periods": panel.n_periods,
            "variables": list(panel.variables),
        }
        return _json_response(body, status_code=201 if created else 200)

    @app.get("/datasets/{dataset_id}")
    async def get_dataset(dataset_id: str):
        panel = store.get_dataset(dataset_id)
        return _json_response(
            {
                "id": dataset_id,
                "entities": list(panel.entities),
                "periods": list(panel.periods),
                "variables": list(panel.variables),
                "n_entities": panel.n_entities,
                "n_periods": panel.n_periods,
            }
        )

    @app.get("/datasets/{dataset_id}/stats")
    async def dataset_stats(dataset_id: str):
        panel = store.get_dataset(dataset_id)
        stats = [descriptive_stats(panel, v) for v in panel.variables]
        corr = correlation_matrix(panel, list(panel.variables))
        return _json_response(
            {
                "id": dataset_id,
                "descriptives": rpt.descriptives_table(stats),
                "correlation": rpt.correlation_table(corr),
            }
        )

    def _run_job(session_id: str, panel: PanelDataset, config: PipelineConfig) -> None:
        try:
            session, bundle = run_full_pipeline(panel, config, session_id=session_id)
            save_session(session, store.sessions, report=bundle)
            store.set_job(session_id, "complete")
        except RegimescopeError as exc:
            store.set_job(session_id, "error", {"code": exc.code, "message": str(exc)})
        except Exception as exc:  # keep the job table truthful on bugs too
            store.set_job(session_id, "error", {"code": "InternalError", "message": str(exc)})

    @app.post("/sessions")
    async def create_session(request: Request, background: BackgroundTasks):
        payload = await _body_json(request)
        dataset_id = _require(payload, "dataset")
        raw_config = _require(payload, "config")
        if not isinstance(raw_config, dict):
            raise InputError("config must be a JSON object")
        panel = store.get_dataset(dataset_id)
        if "seed" not in raw_config and default_seed is not None:
            raw_config = {**raw_config, "seed": default_seed}
        try:
            config = PipelineConfig.from_payload(raw_config)
        except KeyError as exc:
            raise InvalidSpec(f"config is missing required key {exc.args[0]!r}") from None
        import uuid

        session_id = uuid.uuid4().hex
        store.set_job(session_id, "running")
        background.add_task(_run_job, session_id, panel, config)
        return _json_response(
            {"id": session_id, "status": "running", "poll": f"/sessions/{session_id}"},
            status_code=202,
        )

    @app.get("/sessions")
    async def list_sessions():
        return _json_response({"sessions": store.list_sessions()})

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str, offset: int = 0, limit: int = 100):
        status = store.job_status(session_id)
        if status == "running":
            return _json_response({"id": session_id, "status": "running", "steps": [], "n_steps": 0})
        if status == "error":
            with store.lock:
                error = store.jobs[session_id]["error"]
            return _json_response({"id": session_id, "status": "error", "error": error})
        session = load_session(session_id, store.sessions)
        payload = session.to_payload()
        steps = payload.pop("steps")
        payload["n_steps"] = len(steps)
        payload["offset"] = offset
        payload["steps"] = steps[offset : offset + limit]
        return _json_response(payload)

    @app.get("/sessions/{session_id}/report")
    async def get_report(session_id: str):
        if store.job_status(session_id) == "running":
            raise NotFound(f"session {session_id!r} is still running; no report yet")
        return _json_response(load_report(session_id, store.sessions))

    @app.post("/sessions/{session_id}/what-if")
    async def what_if(session_id: str, request: Request):
        payload = await _body_json(request)
        gamma = _require(payload, "gamma")
        if not isinstance(gamma, (int, float)) or isinstance(gamma, bool):
            raise InvalidSpec(f"gamma must be a number, got {type(gamma).__name__}")
        with store.session_lock(session_id):
            session = load_session(session_id, store.sessions)
            rc, delta = what_if_threshold(session, float(gamma))
            save_session(session, store.sessions)
        pair = tuple(session.config.analysis_name(v) for v in session.config.causality_pair)
        labels = (rpt.display_label(pair[0]), rpt.display_label(pair[1]))
        return _json_response({"regime_causality": rc.to_payload(labels), "delta": delta})

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
