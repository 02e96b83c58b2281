"""Report rendering: named tables, plot series, and machine-readable flags.

Every pipeline run ends in a ReportBundle. Tables are display-ready (cells are
numbers or already-formatted strings) so clients never recompute statistics;
plots are plain [x, y] series for the same reason. The bundle always carries
all ten table keys; a stage that was skipped contributes an empty rows list
and an entry in ``narrative_flags["skipped"]``.

Table column layouts are frozen in TABLE_COLUMNS and enforced by
``validate_report`` against REPORT_SCHEMA; changing a layout is a deliberate
schema bump, not a drive-by edit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from jsonschema import validate as _js_validate

from .errors import InvalidSpec
from .panel import DescriptiveStats, PanelDataset, within_demean
from .regression import CorrelationMatrix, FitResult, TestResult
from .stationarity import CointegrationResult, UnitRootResult
from .threshold import ThresholdFit, ThresholdTest
from .vecm import CausalityResult, RegimeCausality

HISTOGRAM_BINS = 20

TABLE_COLUMNS: dict[str, tuple[str, ...]] = {
    "descriptives": ("Variable", "Mean", "Std. Dev.", "Min.", "Max."),
    "unit_root": ("Variable", "Statistic", "Probability", "Result"),
    "kao": ("Test", "Statistic", "Probability", "Result"),
    "correlation": (),  # variable-count dependent; fixed per bundle, not globally
    "limer": ("Test", "Statistic", "Probability", "Result"),
    "hausman": ("Test", "Statistic", "Probability", "Result"),
    "regression": ("Variable", "Coefficient", "Std. Error", "t-Statistic", "Probability"),
    "vecm": (),  # pair-label dependent
    "threshold_tests": ("Test", "Value"),
    "regime_causality": (),  # pair-label dependent
}

TABLE_TITLES: dict[str, str] = {
    "descriptives": "Descriptive statistics",
    "unit_root": "Panel unit root tests",
    "kao": "Residual cointegration test",
    "correlation": "Correlation matrix of explanatory variables",
    "limer": "Poolability test",
    "hausman": "Hausman specification test",
    "regression": "Regime-split regression model",
    "vecm": "Panel VECM Granger causality",
    "threshold_tests": "Threshold effect tests",
    "regime_causality": "Regime-dependent causality",
}


# ---------------------------------------------------------------------------
# labels and verdicts
# ---------------------------------------------------------------------------


def display_label(variable: str) -> str:
    """Human label for a variable name: ``ln_gdp`` -> ``Ln GDP``.

    Short names read as acronyms and are upper-cased; longer ones are
    capitalized words.
    """
    prefix = ""
    word = variable
    if word.startswith("ln_"):
        prefix = "Ln "
        word = word[3:]
    word = word.upper() if len(word) <= 5 else word.capitalize()
    return prefix + word


def significance_mark(p_value: float, alphas: tuple[float, float] = (0.05, 0.10)) -> str:
    if p_value < alphas[0]:
        return "**"
    if p_value < alphas[1]:
        return "*"
    return ""


def unit_root_verdict(reject: bool) -> str:
    return "Confirmation" if reject else "Not confirmed"


def kao_verdict(p_value: float, alpha: float = 0.05) -> str:
    if p_value < alpha:
        return "long-run link confirmed"
    return "no long-run link"


def limer_verdict(p_value: float, alpha: float = 0.05) -> str:
    if p_value < alpha:
        return "panel model (fixed or random effects)"
    return "pooled model"


def hausman_verdict(p_value: float, alpha: float = 0.05) -> str:
    if p_value < alpha:
        return "fixed effects"
    return "random effects"


def count_thresholds(decisions: list[str]) -> int:
    """Accepted threshold count from the sequential test decisions.

    The sequence stops at the first fail_to_reject; anything after it is
    ignored even if present.
    """
    n = 0
    for decision in decisions:
        if decision != "reject":
            break
        n += 1
    return n


def threshold_count_label(n: int) -> str:
    return {
        0: "no threshold effect",
        1: "single-threshold model",
        2: "double-threshold model",
        3: "triple-threshold model",
    }[n]


def format_gamma_level(gamma: float, in_logs: bool) -> str:
    level = math.exp(gamma) if in_logs else gamma
    if abs(level) >= 1000:
        return f"{level:,.0f}"
    return f"{level:,.2f}"


def _num(x: float, nd: int = 5) -> float:
    return round(float(x), nd)


def _p(x: float) -> float:
    return round(float(x), 4)


def _table(name: str, columns: tuple[str, ...], rows: list[list]) -> dict:
    for row in rows:
        if len(row) != len(columns):
            raise InvalidSpec(f"{name}: row width {len(row)} != {len(columns)} columns")
    return {"title": TABLE_TITLES[name], "columns": list(columns), "rows": rows}


# ---------------------------------------------------------------------------
# table builders
# ---------------------------------------------------------------------------


def descriptives_table(stats: list[DescriptiveStats]) -> dict:
    rows = [
        [display_label(s.variable), _num(s.mean), _num(s.std), _num(s.min), _num(s.max)]
        for s in stats
    ]
    return _table("descriptives", TABLE_COLUMNS["descriptives"], rows)


def unit_root_table(results: dict[str, UnitRootResult]) -> dict:
    """One row per variable, reporting the stage that settled the decision.

    I(1) variables show the first-difference statistics (the level stage did
    not reject), which is what a stationarity confirmation after one
    differencing looks like.
    """
    rows = []
    for variable, res in results.items():
        stage = res.level
        label = display_label(variable)
        if not res.level.reject and res.difference is not None:
            stage = res.difference
            label += " (first difference)"
        rows.append(
            [label, _num(stage.standardized_stat), _p(stage.p_value), unit_root_verdict(stage.reject)]
        )
    return _table("unit_root", TABLE_COLUMNS["unit_root"], rows)


def kao_table(res: CointegrationResult | None) -> dict:
    rows = []
    if res is not None:
        rows.append(
            ["Kao residual cointegration", _num(res.df_t), _p(res.p_value), kao_verdict(res.p_value, res.alpha)]
        )
    return _table("kao", TABLE_COLUMNS["kao"], rows)


def correlation_table(cm: CorrelationMatrix | None) -> dict:
    """Lower-triangle matrix: a coefficient row per variable, then its p row.

    The diagonal of the p row prints ``-----`` and the upper triangle stays
    blank, mirroring how such matrices are usually published.
    """
    if cm is None:
        return {"title": TABLE_TITLES["correlation"], "columns": [""], "rows": []}
    labels = [display_label(v) for v in cm.variables]
    r = np.atleast_2d(np.asarray(cm.r, dtype=float))
    p = np.atleast_2d(np.asarray(cm.p_values, dtype=float))
    columns = [""] + labels
    rows: list[list] = []
    for i, label in enumerate(labels):
        coef = [label] + [_num(r[i, j]) if j <= i else "" for j in range(len(labels))]
        rows.append(coef)
        if i == 0:
            continue
        pvals: list = [""]
        for j in range(len(labels)):
            if j < i:
                pvals.append(_p(p[i, j]))
            elif j == i:
                pvals.append("-----")
            else:
                pvals.append("")
        rows.append(pvals)
    return {"title": TABLE_TITLES["correlation"], "columns": columns, "rows": rows}


def limer_table(res: TestResult | None) -> dict:
    rows = []
    if res is not None:
        rows.append(["F-Limer", _num(res.statistic), _p(res.p_value), limer_verdict(res.p_value, res.alpha)])
    return _table("limer", TABLE_COLUMNS["limer"], rows)


def hausman_table(res: TestResult | None) -> dict:
    rows = []
    if res is not None:
        rows.append(["Hausman", _num(res.statistic), _p(res.p_value), hausman_verdict(res.p_value, res.alpha)])
    return _table("hausman", TABLE_COLUMNS["hausman"], rows)


def regression_table(
    fit: FitResult | None,
    regressor: str = "",
    within_r2: float | None = None,
    model_f: float | None = None,
) -> dict:
    """Regime-split model table.

    The regressor's printed row carries the below-threshold slope; the
    above-threshold slope travels in narrative_flags["regime_slopes"] so the
    single-row layout stays faithful without losing the second regime.
    """
    rows: list[list] = []
    if fit is not None:
        for k, name in enumerate(fit.names):
            if name == f"{regressor}_high":
                continue
            label = display_label(regressor) if name == f"{regressor}_low" else display_label(name)
            rows.append(
                [label, round(float(fit.coefficients[k]), 6), round(float(fit.standard_errors[k]), 6),
                 _num(fit.t_stats[k]), _p(fit.p_values[k])]
            )
        if within_r2 is not None:
            rows.append(["Coefficient of determination", _num(within_r2), "", "", ""])
        rows.append(["R-squared", _num(fit.r_squared), "", "", ""])
        rows.append(["Durbin-Watson", _num(fit.durbin_watson), "", "", ""])
        if model_f is not None:
            rows.append(["Model F statistic", _num(model_f), "", "", ""])
    return _table("regression", TABLE_COLUMNS["regression"], rows)


#: star rendering of the internal significance marks
_STARS = {"at_5": "**", "at_10": "*", "none": ""}


def _short_cell(stats: dict, mark: str) -> str:
    return f"{stats['f_form']:.2f}{_STARS[mark]} ({stats['p_value']:.4f})"


def _long_cell(stats: dict, mark: str) -> str:
    return f"{stats['lambda']:.4f}{_STARS[mark]} [F = {stats['f_stat']:.2f}] ({stats['p_value']:.4f})"


def vecm_table(
    short: CausalityResult | None,
    long: CausalityResult | None,
    labels: tuple[str, str] | None = None,
) -> dict:
    """Cross-equation causality grid: row = cause, column = dependent equation."""
    if short is None or long is None:
        return {"title": TABLE_TITLES["vecm"], "columns": [""], "rows": []}
    a, b = labels if labels is not None else short.pair
    columns = ["Horizon", "Independent", f"d({a})", f"d({b})", "Verdict"]
    m = short.significance_marks
    w = short.wald_stats
    rows = [
        ["Short-run", f"d({a})", "-", _short_cell(w["x_to_y"], m["x_to_y"]), short.arrow((a, b), flagged=True)],
        ["", f"d({b})", _short_cell(w["y_to_x"], m["y_to_x"]), "-", ""],
    ]
    lm, lw = long.significance_marks, long.wald_stats
    # the ECT cell under equation d(a) tests the b -> a long-run link
    rows.append(
        ["Long-run", "ECT(t-1)", _long_cell(lw["y_to_x"], lm["y_to_x"]),
         _long_cell(lw["x_to_y"], lm["x_to_y"]), long.arrow((a, b), flagged=True)]
    )
    return {"title": TABLE_TITLES["vecm"], "columns": columns, "rows": rows}


def threshold_tests_table(results: list[tuple[ThresholdFit, ThresholdTest]]) -> dict:
    names = {"single": "Single threshold test", "double": "Double threshold test", "triple": "Triple threshold test"}
    fstat = {"single": "F1", "double": "F2", "triple": "F3"}
    rows: list[list] = []
    for _, test in results:
        rows.append([names[test.level], ""])
        f_text = "Inf" if math.isinf(test.f_stat) else f"{test.f_stat:.2f}"
        rows.append([fstat[test.level], f_text])
        rows.append(["P-value", f"{test.bootstrap_p:.4f}"])
        cv = ", ".join(f"{v:.2f}" for v in test.critical_values)
        rows.append(["Critical values (10%, 5%, 1%)", cv])
        rows.append(["Decision", "reject" if test.reject else "fail to reject"])
    if results:
        n = count_thresholds([t.decision for _, t in results])
        rows.append(["Conclusion", threshold_count_label(n)])
    return _table("threshold_tests", TABLE_COLUMNS["threshold_tests"], rows)


def regime_causality_table(
    rc: RegimeCausality | None,
    labels: tuple[str, str] | None = None,
    threshold_in_logs: bool = False,
) -> dict:
    if rc is None:
        return {"title": TABLE_TITLES["regime_causality"], "columns": [""], "rows": []}
    a, b = labels if labels is not None else rc.pair
    q = display_label(rc.regime_var)
    level = format_gamma_level(rc.gamma, threshold_in_logs)
    columns = [q, "Horizon", "Independent", f"d({a})", f"d({b})", "Verdict"]
    rows: list[list] = []
    for heading, (short, long) in ((f"{q} <= {level}", rc.low), (f"{q} > {level}", rc.high)):
        m, w = short.significance_marks, short.wald_stats
        rows.append([heading, "Short-run", f"d({a})", "", _short_cell(w["x_to_y"], m["x_to_y"]),
                     short.arrow((a, b), flagged=True)])
        rows.append(["", "", f"d({b})", _short_cell(w["y_to_x"], m["y_to_x"]), "", ""])
        lm, lw = long.significance_marks, long.wald_stats
        rows.append(["", "Long-run", "ECT(t-1)", _long_cell(lw["y_to_x"], lm["y_to_x"]),
                     _long_cell(lw["x_to_y"], lm["x_to_y"]), long.arrow((a, b), flagged=True)])
    return {"title": TABLE_TITLES["regime_causality"], "columns": columns, "rows": rows}


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------


def ssr_profile_series(fit: ThresholdFit | None) -> list[list[float]]:
    if fit is None:
        return []
    return [[float(g), float(s)] for g, s in fit.ssr_profile]


def bootstrap_histogram_series(test: ThresholdTest | None, bins: int = HISTOGRAM_BINS) -> list[list[float]]:
    """Binned null F draws as [bin midpoint, count] pairs."""
    if test is None or not test.null_f_stats:
        return []
    draws = np.asarray(test.null_f_stats, dtype=float)
    draws = draws[np.isfinite(draws)]
    if draws.size == 0:
        return []
    counts, edges = np.histogram(draws, bins=bins)
    mids = (edges[:-1] + edges[1:]) / 2.0
    return [[float(x), int(c)] for x, c in zip(mids, counts)]


# ---------------------------------------------------------------------------
# bundle
# ---------------------------------------------------------------------------


@dataclass
class ReportBundle:
    tables: dict[str, dict]
    plots: dict[str, list]
    narrative_flags: dict
    warnings: list[str] = field(default_factory=list)

    def to_payload(self) -> dict:
        return {
            "tables": self.tables,
            "plots": self.plots,
            "narrative_flags": self.narrative_flags,
            "warnings": list(self.warnings),
        }


_SERIES_SCHEMA = {
    "type": "array",
    "items": {
        "type": "array",
        "minItems": 2,
        "maxItems": 2,
        "items": {"type": ["number", "string"]},
    },
}


def _table_schema(columns: tuple[str, ...] | None) -> dict:
    col_schema: dict = {"type": "array", "items": {"type": "string"}}
    row_items: dict = {"type": ["number", "string"]}
    row_schema: dict = {"type": "array", "items": row_items}
    if columns:
        col_schema = {"const": list(columns)}
        row_schema = {
            "type": "array",
            "minItems": len(columns),
            "maxItems": len(columns),
            "items": row_items,
        }
    return {
        "type": "object",
        "required": ["title", "columns", "rows"],
        "properties": {
            "title": {"type": "string"},
            "columns": col_schema,
            "rows": {"type": "array", "items": row_schema},
        },
        "additionalProperties": False,
    }


REPORT_SCHEMA: dict = {
    "type": "object",
    "required": ["tables", "plots", "narrative_flags", "warnings"],
    "properties": {
        "tables": {
            "type": "object",
            "required": list(TABLE_COLUMNS),
            "properties": {name: _table_schema(cols or None) for name, cols in TABLE_COLUMNS.items()},
            "additionalProperties": False,
        },
        "plots": {
            "type": "object",
            "required": ["ssr_profile", "bootstrap_histogram"],
            "properties": {
                "ssr_profile": _SERIES_SCHEMA,
                "bootstrap_histogram": _SERIES_SCHEMA,
            },
            "additionalProperties": False,
        },
        "narrative_flags": {
            "type": "object",
            "required": [
                "panel_model",
                "fixed_effects",
                "integration",
                "cointegrated",
                "n_thresholds",
                "gamma",
                "gamma_level",
                "short_run",
                "long_run",
                "low_regime",
                "high_regime",
                "stop_reason",
                "skipped",
            ],
            "properties": {
                "panel_model": {"type": ["boolean", "null"]},
                "fixed_effects": {"type": ["boolean", "null"]},
                "integration": {"type": "object"},
                "cointegrated": {"type": ["boolean", "null"]},
                "n_thresholds": {"type": ["integer", "null"]},
                "gamma": {"type": ["number", "null"]},
                "gamma_level": {"type": ["number", "string", "null"]},
                "regime_slopes": {"type": ["object", "null"]},
                "short_run": {"type": ["string", "null"]},
                "long_run": {"type": ["string", "null"]},
                "low_regime": {"type": ["object", "null"]},
                "high_regime": {"type": ["object", "null"]},
                "stop_reason": {"type": ["string", "null"]},
                "skipped": {"type": "array", "items": {"type": "string"}},
                "notes": {"type": "array", "items": {"type": "string"}},
            },
        },
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
    "additionalProperties": False,
}


def validate_report(payload: dict) -> None:
    """Schema check for a serialized ReportBundle; raises on any drift."""
    _js_validate(payload, REPORT_SCHEMA)


def empty_tables() -> dict[str, dict]:
    out = {}
    for name, cols in TABLE_COLUMNS.items():
        out[name] = {"title": TABLE_TITLES[name], "columns": list(cols) if cols else [""], "rows": []}
    return out


def model_significance(panel: PanelDataset, dependent: str, fit: FitResult) -> tuple[float, float]:
    """Within R-squared and the joint slope F statistic of a within-estimated fit."""
    demeaned = within_demean(panel, dependent)
    tss = float(np.sum(demeaned**2))
    if tss <= 0:
        return 0.0, 0.0
    k = len(fit.names)
    r2_within = 1.0 - fit.ssr / tss
    if fit.ssr <= 0:
        return r2_within, float("inf")
    f = ((tss - fit.ssr) / k) / (fit.ssr / fit.dof)
    return r2_within, float(f)
