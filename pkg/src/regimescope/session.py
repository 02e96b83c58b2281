"""End-to-end pipeline orchestration with a persistent, append-only session log.

A run walks the decision sequence: descriptives and normality, panel unit
roots, residual cointegration, correlation screen, poolability and Hausman
tests, error-correction causality, sequential threshold tests, the regime
split regression at the accepted threshold, and regime-dependent causality.
Each gate that fails records why and skips exactly the stages that depend on
it: variables that are not I(1) stop the run after the unit-root stage, and a
failed cointegration test skips the error-correction stages while the
threshold search still runs.

Sessions persist as one directory holding ``session.json`` (schema version 1),
the dataset as CSV, and ``report.json``. Loading verifies the dataset content
hash. Steps are append-only; a what-if never rewrites history.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from . import report as rpt
from .errors import (
    HashMismatch,
    InvalidSpec,
    NotFound,
    RegimescopeError,
    RegimeTooSmall,
    SchemaVersionUnsupported,
    UnknownVariable,
)
from .panel import (
    PanelDataset,
    descriptive_stats,
    load_csv,
    log_transform,
    normality_test,
)
from .regression import correlation_matrix, f_limer, fixed_effects_fit, hausman, random_effects_fit
from .serialize import dumps, to_jsonable
from .stationarity import UnitRootSpec, kao_test, panel_unit_root
from .threshold import ThresholdSpec, estimate_empirical_model, fit_sequential_thresholds
from .vecm import VecmSpec, causality_from_fit, fit_panel_vecm, regime_dependent_causality

SESSION_SCHEMA_VERSION = 1

#: exact stop reason recorded when the unit-root gate fails
STOP_NOT_I1 = "variables not I(1); VECM skipped"


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs besides the data; serializes into session.json."""

    dependent: str
    regime_dependent_regressor: str
    threshold_var: str
    causality_pair: tuple[str, str]
    controls: tuple[str, ...] = ()
    log_vars: tuple[str, ...] = ()
    deterministic: str = "intercept"
    unit_root_lags: int = 1
    vecm_lags: int = 1
    trim: float = 0.05
    grid_max: int = 400
    bootstrap_reps: int = 199
    alpha: float = 0.05
    max_levels: int = 3
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "causality_pair", tuple(self.causality_pair))
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "log_vars", tuple(self.log_vars))
        if len(self.causality_pair) != 2:
            raise InvalidSpec(f"causality_pair must name two variables, got {self.causality_pair}")

    def analysis_name(self, variable: str) -> str:
        return f"ln_{variable}" if variable in self.log_vars else variable

    def to_payload(self) -> dict:
        return {
            "dependent": self.dependent,
            "regime_dependent_regressor": self.regime_dependent_regressor,
            "threshold_var": self.threshold_var,
            "causality_pair": list(self.causality_pair),
            "controls": list(self.controls),
            "log_vars": list(self.log_vars),
            "deterministic": self.deterministic,
            "unit_root_lags": self.unit_root_lags,
            "vecm_lags": self.vecm_lags,
            "trim": self.trim,
            "grid_max": self.grid_max,
            "bootstrap_reps": self.bootstrap_reps,
            "alpha": self.alpha,
            "max_levels": self.max_levels,
            "seed": self.seed,
            "threads": self.threads,
        }

    @classmethod
    def from_payload(cls, raw: dict) -> "PipelineConfig":
        return cls(
            dependent=raw["dependent"],
            regime_dependent_regressor=raw["regime_dependent_regressor"],
            threshold_var=raw["threshold_var"],
            causality_pair=tuple(raw["causality_pair"]),
            controls=tuple(raw.get("controls", ())),
            log_vars=tuple(raw.get("log_vars", ())),
            deterministic=raw.get("deterministic", "intercept"),
            unit_root_lags=int(raw.get("unit_root_lags", 1)),
            vecm_lags=int(raw.get("vecm_lags", 1)),
            trim=float(raw.get("trim", 0.05)),
            grid_max=int(raw.get("grid_max", 400)),
            bootstrap_reps=int(raw.get("bootstrap_reps", 199)),
            alpha=float(raw.get("alpha", 0.05)),
            max_levels=int(raw.get("max_levels", 3)),
            seed=int(raw.get("seed", 0)),
            threads=int(raw.get("threads", 1)),
        )


def _payloadize(obj):
    """Prefer an object's own payload shape before generic serialization."""
    if hasattr(obj, "to_payload"):
        return _payloadize(obj.to_payload())
    if isinstance(obj, dict):
        return {k: _payloadize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_payloadize(v) for v in obj]
    return obj


@dataclass
class PipelineStep:
    kind: str
    params: dict
    result: dict
    timestamp: float
    seed: int

    def to_payload(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params,
            "result": self.result,
            "timestamp": self.timestamp,
            "seed": self.seed,
        }


@dataclass
class AnalysisSession:
    id: str
    dataset_ref: str
    config: PipelineConfig
    panel: PanelDataset = field(repr=False, default=None)
    steps: list[PipelineStep] = field(default_factory=list)
    current_gamma: float | None = None
    status: str = "draft"

    def record(self, kind: str, params: dict, result) -> PipelineStep:
        step = PipelineStep(
            kind=kind,
            params=to_jsonable(_payloadize(params)),
            result=to_jsonable(_payloadize(result)),
            timestamp=time.time(),
            seed=self.config.seed,
        )
        self.steps.append(step)
        return step

    def last_step(self, kind: str) -> PipelineStep | None:
        for step in reversed(self.steps):
            if step.kind == kind:
                return step
        return None

    def to_payload(self) -> dict:
        return {
            "v": SESSION_SCHEMA_VERSION,
            "id": self.id,
            "dataset_ref": self.dataset_ref,
            "config": self.config.to_payload(),
            "steps": [s.to_payload() for s in self.steps],
            "current_gamma": self.current_gamma,
            "status": self.status,
        }


def panel_to_csv(panel: PanelDataset) -> str:
    """Canonical long-layout CSV; repr floats round-trip exactly."""
    lines = ["entity,period,variable,value"]
    for i, entity in enumerate(panel.entities):
        for j, period in enumerate(panel.periods):
            for k, variable in enumerate(panel.variables):
                lines.append(f"{entity},{period},{variable},{float(panel.values[i, j, k])!r}")
    return "\n".join(lines) + "\n"


def dataset_hash(csv_text: str) -> str:
    return hashlib.sha256(csv_text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def _analysis_variables(config: PipelineConfig) -> list[str]:
    seen: list[str] = []
    for v in (
        config.dependent,
        config.regime_dependent_regressor,
        *config.controls,
        *config.causality_pair,
        config.threshold_var,
    ):
        name = config.analysis_name(v)
        if name not in seen:
            seen.append(name)
    return seen


def _require_variables(panel: PanelDataset, config: PipelineConfig) -> None:
    for v in (
        config.dependent,
        config.regime_dependent_regressor,
        config.threshold_var,
        *config.controls,
        *config.causality_pair,
    ):
        if v not in panel.variables:
            raise UnknownVariable(f"variable {v!r} not in dataset")


def new_session(panel: PanelDataset, config: PipelineConfig, session_id: str | None = None) -> AnalysisSession:
    csv_text = panel_to_csv(panel)
    return AnalysisSession(
        id=session_id or uuid.uuid4().hex,
        dataset_ref=dataset_hash(csv_text),
        config=config,
        panel=panel,
    )


def run_full_pipeline(
    panel: PanelDataset,
    config: PipelineConfig,
    session_id: str | None = None,
) -> tuple[AnalysisSession, rpt.ReportBundle]:
    """Execute every stage in order, recording each into a fresh session.

    Returns the completed session plus the rendered report. Unexpected stage
    errors mark the session as failed and re-raise; gate failures are normal
    outcomes recorded in the report's narrative flags.
    """
    _require_variables(panel, config)
    session = new_session(panel, config, session_id)
    try:
        bundle = _run_stages(session, panel, config)
    except RegimescopeError as exc:
        session.record("error", {}, {"code": exc.code, "message": str(exc)})
        session.status = "error"
        raise
    session.status = "complete"
    return session, bundle


def _run_stages(session: AnalysisSession, panel: PanelDataset, config: PipelineConfig) -> rpt.ReportBundle:
    work = log_transform(panel, list(config.log_vars)) if config.log_vars else panel
    dep = config.analysis_name(config.dependent)
    reg = config.analysis_name(config.regime_dependent_regressor)
    qvar = config.analysis_name(config.threshold_var)
    controls = tuple(config.analysis_name(c) for c in config.controls)
    pair = tuple(config.analysis_name(v) for v in config.causality_pair)
    regressors = [reg, *controls]
    variables = _analysis_variables(config)

    tables = rpt.empty_tables()
    plots: dict[str, list] = {"ssr_profile": [], "bootstrap_histogram": []}
    flags: dict = {
        "panel_model": None,
        "fixed_effects": None,
        "integration": {},
        "cointegrated": None,
        "n_thresholds": None,
        "gamma": None,
        "gamma_level": None,
        "regime_slopes": None,
        "short_run": None,
        "long_run": None,
        "low_regime": None,
        "high_regime": None,
        "stop_reason": None,
        "skipped": [],
        "notes": [],
    }
    warnings: list[str] = []
    labels = (rpt.display_label(pair[0]), rpt.display_label(pair[1]))
    in_logs = qvar.startswith("ln_")

    stats = [descriptive_stats(work, v) for v in variables]
    normality = {v: normality_test(work.matrix(v).ravel()) for v in variables}
    session.record(
        "descriptives",
        {"variables": variables},
        {"stats": stats, "normality": normality},
    )
    tables["descriptives"] = rpt.descriptives_table(stats)

    ur_spec = UnitRootSpec(
        deterministic=config.deterministic, lags=config.unit_root_lags, alpha=config.alpha
    )
    unit_roots = {v: panel_unit_root(work, v, ur_spec) for v in variables}
    session.record(
        "unit_root",
        {"deterministic": ur_spec.deterministic, "lags": ur_spec.lags, "alpha": ur_spec.alpha},
        {v: r for v, r in unit_roots.items()},
    )
    tables["unit_root"] = rpt.unit_root_table(unit_roots)
    flags["integration"] = {v: r.integration_order_decision for v, r in unit_roots.items()}

    if any(r.integration_order_decision != "I1" for r in unit_roots.values()):
        flags["stop_reason"] = STOP_NOT_I1
        flags["skipped"] = [
            "kao", "correlation", "limer", "hausman", "vecm", "threshold", "regression", "regime_causality",
        ]
        bundle = rpt.ReportBundle(tables, plots, flags, warnings)
        session.record("report", {}, bundle)
        return bundle

    kao = kao_test(work, dep, regressors, alpha=config.alpha, i1_verified=True)
    session.record("kao", {"dependent": dep, "regressors": regressors}, kao)
    tables["kao"] = rpt.kao_table(kao)
    flags["cointegrated"] = kao.reject
    cointegrated = kao.reject
    if not cointegrated:
        flags["notes"].append("no cointegration; error-correction stages skipped")

    corr = correlation_matrix(work, regressors)
    session.record("correlation", {"variables": regressors}, corr)
    tables["correlation"] = rpt.correlation_table(corr)

    limer = f_limer(work, dep, regressors, alpha=config.alpha)
    session.record("limer", {"dependent": dep}, limer)
    tables["limer"] = rpt.limer_table(limer)
    flags["panel_model"] = limer.reject

    fe = fixed_effects_fit(work, dep, regressors)
    re = random_effects_fit(work, dep, regressors)
    haus = hausman(fe, re, alpha=config.alpha)
    session.record("hausman", {"dependent": dep}, haus)
    tables["hausman"] = rpt.hausman_table(haus)
    flags["fixed_effects"] = haus.reject

    vspec = VecmSpec(pair, lags=config.vecm_lags)
    if cointegrated:
        vecm = fit_panel_vecm(work, vspec, i1_verified=True)
        short, long = causality_from_fit(vecm)
        session.record(
            "vecm",
            {"pair": list(pair), "lags": config.vecm_lags},
            {"fit": vecm, "short_run": short.to_payload(labels), "long_run": long.to_payload(labels)},
        )
        tables["vecm"] = rpt.vecm_table(short, long, labels)
        flags["short_run"] = short.arrow(labels, flagged=True)
        flags["long_run"] = long.arrow(labels, flagged=True)
        warnings.extend(vecm.warnings)
    else:
        flags["skipped"].append("vecm")

    tspec = ThresholdSpec(
        dependent=dep,
        regime_dependent_regressor=reg,
        threshold_var=qvar,
        controls=controls,
        trim=config.trim,
        grid_max=config.grid_max,
        bootstrap_reps=config.bootstrap_reps,
        seed=config.seed,
    )
    seq = fit_sequential_thresholds(
        work, tspec, max_levels=config.max_levels, alpha=config.alpha, threads=config.threads
    )
    session.record(
        "threshold",
        {"spec": tspec, "max_levels": config.max_levels, "alpha": config.alpha},
        [{"fit": f, "test": t} for f, t in seq],
    )
    tables["threshold_tests"] = rpt.threshold_tests_table(seq)
    plots["ssr_profile"] = rpt.ssr_profile_series(seq[0][0])
    plots["bootstrap_histogram"] = rpt.bootstrap_histogram_series(seq[0][1])
    n_found = rpt.count_thresholds([t.decision for _, t in seq])
    flags["n_thresholds"] = n_found
    for _, t in seq:
        warnings.extend(t.warnings)

    if n_found >= 1:
        # the split for the regime stages is the single-threshold estimate;
        # deeper models refine slopes, not the two-regime causality story
        gamma = seq[0][0].gamma_hat
        session.current_gamma = gamma
        flags["gamma"] = gamma
        level = rpt.format_gamma_level(gamma, in_logs)
        flags["gamma_level"] = level

        model = estimate_empirical_model(work, tspec, gamma)
        within_r2, model_f = rpt.model_significance(work, dep, model)
        session.record("regression", {"gamma": gamma}, {"fit": model, "within_r2": within_r2, "model_f": model_f})
        tables["regression"] = rpt.regression_table(model, reg, within_r2, model_f)
        low_name, high_name = f"{reg}_low", f"{reg}_high"
        flags["regime_slopes"] = {
            "low": float(model.coefficients[model.names.index(low_name)]),
            "high": float(model.coefficients[model.names.index(high_name)]),
        }

        if cointegrated:
            try:
                rc = regime_dependent_causality(work, vspec, gamma, qvar, i1_verified=True)
            except RegimeTooSmall as exc:
                flags["skipped"].append("regime_causality")
                flags["notes"].append(f"regime causality skipped: {exc}")
            else:
                session.record("regime_causality", {"gamma": gamma, "regime_var": qvar}, rc.to_payload(labels))
                tables["regime_causality"] = rpt.regime_causality_table(rc, labels, in_logs)
                flags["low_regime"] = {
                    "short_run": rc.low[0].arrow(labels, flagged=True),
                    "long_run": rc.low[1].arrow(labels, flagged=True),
                }
                flags["high_regime"] = {
                    "short_run": rc.high[0].arrow(labels, flagged=True),
                    "long_run": rc.high[1].arrow(labels, flagged=True),
                }
                warnings.extend(rc.warnings)
        else:
            flags["skipped"].append("regime_causality")
    else:
        flags["notes"].append("no threshold effect; regime stages skipped")
        flags["skipped"].extend(["regression", "regime_causality"])

    bundle = rpt.ReportBundle(tables, plots, flags, warnings)
    rpt.validate_report(to_jsonable(bundle.to_payload()))
    session.record("report", {}, bundle)
    return bundle


# ---------------------------------------------------------------------------
# what-if
# ---------------------------------------------------------------------------


def what_if_threshold(session: AnalysisSession, gamma_override: float):
    """Regime causality at an alternative threshold, plus a delta summary.

    Appends a step; never touches prior results or ``current_gamma``. The
    delta lists every observation whose regime flips versus the session's
    current threshold and any direction-label changes per regime and horizon.
    """
    if session.last_step("vecm") is None:
        raise InvalidSpec("session has no completed VECM stage to compare against")
    if session.current_gamma is None:
        raise InvalidSpec("session has no accepted threshold; nothing to override")
    config = session.config
    work = (
        log_transform(session.panel, list(config.log_vars)) if config.log_vars else session.panel
    )
    qvar = config.analysis_name(config.threshold_var)
    pair = tuple(config.analysis_name(v) for v in config.causality_pair)
    labels = (rpt.display_label(pair[0]), rpt.display_label(pair[1]))
    vspec = VecmSpec(pair, lags=config.vecm_lags)
    gamma_override = float(gamma_override)

    rc = regime_dependent_causality(work, vspec, gamma_override, qvar, i1_verified=True)

    q = work.matrix(qvar)
    old_low = q <= session.current_gamma
    new_low = q <= gamma_override
    flips = []
    rows, cols = (old_low != new_low).nonzero()
    for i, j in zip(rows.tolist(), cols.tolist()):
        flips.append(
            {
                "entity": work.entities[i],
                "period": int(work.periods[j]),
                "from": "low" if old_low[i, j] else "high",
                "to": "low" if new_low[i, j] else "high",
            }
        )

    direction_changes = []
    base = session.last_step("regime_causality")
    if base is not None:
        for regime, results in (("low", rc.low), ("high", rc.high)):
            for res in results:
                before = base.result[regime][res.horizon]["arrow_at_10"]
                after = res.arrow(labels, flagged=True)
                if before != after:
                    direction_changes.append(
                        {"regime": regime, "horizon": res.horizon, "from": before, "to": after}
                    )

    in_logs = qvar.startswith("ln_")
    delta = {
        "gamma_from": session.current_gamma,
        "gamma_from_level": rpt.format_gamma_level(session.current_gamma, in_logs),
        "gamma_to": gamma_override,
        "gamma_to_level": rpt.format_gamma_level(gamma_override, in_logs),
        "flips": flips,
        "n_flips": len(flips),
        "direction_changes": direction_changes,
    }
    session.record("what_if", {"gamma": gamma_override}, {"regime_causality": rc.to_payload(labels), "delta": delta})
    return rc, delta


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def save_session(session: AnalysisSession, root: str | Path, report: rpt.ReportBundle | None = None) -> Path:
    """Persist one directory per session; every file lands via atomic rename."""
    root = Path(root)
    directory = root / session.id
    directory.mkdir(parents=True, exist_ok=True)
    _atomic_write(directory / "dataset.csv", panel_to_csv(session.panel))
    if report is not None:
        _atomic_write(directory / "report.json", dumps(report.to_payload(), indent=2) + "\n")
    _atomic_write(directory / "session.json", dumps(session.to_payload(), indent=2) + "\n")
    return directory


def load_session(session_id: str, root: str | Path) -> AnalysisSession:
    directory = Path(root) / session_id
    session_file = directory / "session.json"
    if not session_file.exists():
        raise NotFound(f"no session {session_id!r} under {root}")
    raw = json.loads(session_file.read_text(encoding="utf-8"))
    version = raw.get("v")
    if version != SESSION_SCHEMA_VERSION:
        raise SchemaVersionUnsupported(
            f"session schema v{version} not supported (expected v{SESSION_SCHEMA_VERSION})"
        )
    csv_path = directory / "dataset.csv"
    if not csv_path.exists():
        raise NotFound(f"session {session_id!r} has no dataset file")
    csv_text = csv_path.read_text(encoding="utf-8")
    if dataset_hash(csv_text) != raw["dataset_ref"]:
        raise HashMismatch(f"dataset file for session {session_id!r} does not match its recorded hash")
    panel = load_csv(csv_path, layout="long")
    session = AnalysisSession(
        id=raw["id"],
        dataset_ref=raw["dataset_ref"],
        config=PipelineConfig.from_payload(raw["config"]),
        panel=panel,
        steps=[
            PipelineStep(
                kind=s["kind"],
                params=s["params"],
                result=s["result"],
                timestamp=s["timestamp"],
                seed=s["seed"],
            )
            for s in raw["steps"]
        ],
        current_gamma=raw.get("current_gamma"),
        status=raw.get("status", "draft"),
    )
    return session


def load_report(session_id: str, root: str | Path) -> dict:
    path = Path(root) / session_id / "report.json"
    if not path.exists():
        raise NotFound(f"no report for session {session_id!r}")
    return json.loads(path.read_text(encoding="utf-8"))
