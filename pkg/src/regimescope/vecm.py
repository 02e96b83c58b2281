"""Error-correction causality for a cointegrated panel pair.

The long-run residual is estimated once by a fixed-effects regression of the
first pair variable on the second; each equation then regresses the period
difference on K own lagged differences, K cross lagged differences, and the
lagged residual. Short-run direction comes from Wald tests on the cross-lag
block, long-run direction from the sign and significance of the adjustment
coefficient: only a negative loading counts as adjustment toward equilibrium.

Regime-split runs partition observations (entity-period cells, not whole
entities) with `classify_regime` and re-estimate everything inside each
partition. A difference-and-lag window that crosses the regime boundary is
dropped rather than mixed; the dropped count is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np
from scipy import stats

from .errors import InvalidSpec, RegimeTooSmall, UnknownEquation
from .panel import PanelDataset
from .regression import FitResult, within_fit

# below this many usable rows per regime, Wald inference is flagged as
# unreliable (the run still completes)
SMALL_REGIME_ROWS = 30

# a regime must draw usable rows from at least this many entities
MIN_REGIME_ENTITIES = 3

_DIRECTIONS = ("x_to_y", "y_to_x", "bidirectional", "none")


@dataclass(frozen=True)
class VecmSpec:
    """Pair, lag depth, and test levels for the error-correction system.

    ``var_pair`` is ordered: the long-run regression normalizes on the first
    variable, and direction labels are positional ("x_to_y" is first-slot to
    second-slot causality).
    """

    var_pair: tuple[str, str]
    lags: int = 1
    alpha_levels: tuple[float, float] = (0.05, 0.10)

    def __post_init__(self):
        if len(self.var_pair) != 2 or self.var_pair[0] == self.var_pair[1]:
            raise InvalidSpec(f"var_pair must name two distinct variables, got {self.var_pair}")
        if not 1 <= self.lags <= 4:
            raise InvalidSpec(f"lags must be between 1 and 4, got {self.lags}")
        a5, a10 = self.alpha_levels
        if not (0.0 < a5 < a10 < 1.0):
            raise InvalidSpec(f"alpha_levels must be increasing in (0, 1), got {self.alpha_levels}")
        object.__setattr__(self, "var_pair", tuple(self.var_pair))
        object.__setattr__(self, "alpha_levels", (float(a5), float(a10)))


class WaldTest(NamedTuple):
    statistic: float
    p_value: float
    f_form: float
    dof: int


class EctTest(NamedTuple):
    lambda_hat: float
    t_stat: float
    p_value: float
    f_stat: float


@dataclass
class EquationFit:
    """One difference equation of the system."""

    dependent: str
    fit: FitResult
    ect_coefficient: float
    ect_t_stat: float
    ect_p: float
    ect_f: float
    cross_lag_indices: tuple[int, ...]

    def to_payload(self) -> dict:
        return {
            "dependent": self.dependent,
            "ect_coefficient": self.ect_coefficient,
            "ect_t_stat": self.ect_t_stat,
            "ect_p": self.ect_p,
            "ect_f": self.ect_f,
            "fit": self.fit.to_payload(),
        }


@dataclass
class VecmFit:
    spec: VecmSpec
    equations: dict[str, EquationFit]
    ect_series: np.ndarray
    cointegrating_slope: float
    n_rows: int
    warnings: list[str] = field(default_factory=list)

    def to_payload(self) -> dict:
        return {
            "var_pair": list(self.spec.var_pair),
            "lags": self.spec.lags,
            "cointegrating_slope": self.cointegrating_slope,
            "n_rows": self.n_rows,
            "equations": {name: eq.to_payload() for name, eq in self.equations.items()},
            "warnings": list(self.warnings),
        }


_ARROW = "→"
_BOTH = "↔"


@dataclass(frozen=True)
class CausalityResult:
    """Direction verdict at one horizon, with per-link statistics and marks.

    ``direction`` is decided at the primary level alone; ``direction_at_10``
    additionally admits links that clear only the looser level, which is what
    a starred table row reports. Both are pure functions of the marks.
    """

    horizon: str
    direction: str
    direction_at_10: str
    pair: tuple[str, str]
    wald_stats: dict[str, dict]
    significance_marks: dict[str, str]
    notes: tuple[str, ...] = ()

    def arrow(self, labels: tuple[str, str] | None = None, flagged: bool = False) -> str:
        a, b = labels if labels is not None else self.pair
        direction = self.direction_at_10 if flagged else self.direction
        return {
            "x_to_y": f"{a} {_ARROW} {b}",
            "y_to_x": f"{b} {_ARROW} {a}",
            "bidirectional": f"{a} {_BOTH} {b}",
            "none": "none",
        }[direction]

    def to_payload(self, labels: tuple[str, str] | None = None) -> dict:
        return {
            "horizon": self.horizon,
            "direction": self.direction,
            "direction_at_10": self.direction_at_10,
            "arrow": self.arrow(labels),
            "arrow_at_10": self.arrow(labels, flagged=True),
            "pair": list(self.pair),
            "wald_stats": self.wald_stats,
            "significance_marks": self.significance_marks,
            "notes": list(self.notes),
        }


@dataclass
class RegimeCausality:
    gamma: float
    regime_var: str
    pair: tuple[str, str]
    low: tuple[CausalityResult, CausalityResult]
    high: tuple[CausalityResult, CausalityResult]
    low_fit: VecmFit
    high_fit: VecmFit
    regime_sizes: tuple[int, int]
    dropped_rows: int
    warnings: list[str] = field(default_factory=list)

    def to_payload(self, labels: tuple[str, str] | None = None) -> dict:
        return {
            "gamma": self.gamma,
            "regime_var": self.regime_var,
            "pair": list(self.pair),
            "regime_sizes": list(self.regime_sizes),
            "dropped_rows": self.dropped_rows,
            "low": {
                "short_run": self.low[0].to_payload(labels),
                "long_run": self.low[1].to_payload(labels),
                "vecm": self.low_fit.to_payload(),
            },
            "high": {
                "short_run": self.high[0].to_payload(labels),
                "long_run": self.high[1].to_payload(labels),
                "vecm": self.high_fit.to_payload(),
            },
            "warnings": list(self.warnings),
        }


def long_run_residuals(panel: PanelDataset, y: str, x: str) -> np.ndarray:
    """Residual matrix (entities by periods) of the cointegrating regression.

    Fixed-effects regression of ``y`` on ``x``; the caller lags the result so
    that row t of a difference equation sees the period t-1 residual.
    """
    e, _ = _masked_long_run(panel, y, x, None)
    return e


def _masked_long_run(
    panel: PanelDataset, y: str, x: str, mask: np.ndarray | None
) -> tuple[np.ndarray, float]:
    Y = panel.matrix(y)
    X = panel.matrix(x)
    n, t = Y.shape
    groups = np.repeat(np.arange(n), t)
    flat = mask.ravel() if mask is not None else np.ones(n * t, dtype=bool)
    fit = within_fit(
        Y.ravel()[flat],
        X.ravel()[flat][:, None],
        groups[flat],
        names=[x],
        group_labels=None,
    )
    out = np.full(n * t, np.nan)
    out[flat] = fit.residuals
    return out.reshape(n, t), float(fit.coefficients[0])


def _window_valid(mask: np.ndarray, lags: int) -> np.ndarray:
    """Rows (entity by equation-period) whose whole lag window stays in-regime.

    Row s corresponds to period t = s + lags + 1 and touches periods
    t-lags-1 .. t, a window of lags + 2 consecutive periods.
    """
    n, t = mask.shape
    rows = t - 1 - lags
    ok = np.ones((n, rows), dtype=bool)
    for j in range(lags + 2):
        ok &= mask[:, j : j + rows]
    return ok


def fit_panel_vecm(
    panel: PanelDataset,
    spec: VecmSpec,
    i1_verified: bool = False,
    row_mask: np.ndarray | None = None,
    obs_mask: np.ndarray | None = None,
) -> VecmFit:
    """Two-equation error-correction fit on the panel pair.

    ``obs_mask`` restricts the long-run regression to a subset of cells and
    ``row_mask`` (entities by T-1-lags) restricts the difference equations;
    both default to the full panel. Rows per entity: T - 1 - lags.
    """
    a, b = spec.var_pair
    n, t = panel.matrix(a).shape
    if spec.lags > (t - 2) / 2:
        raise InvalidSpec(f"lags={spec.lags} too deep for {t} periods; need lags <= (T-2)/2")
    K = spec.lags
    rows = t - 1 - K

    ect, slope = _masked_long_run(panel, a, b, obs_mask)
    if row_mask is None:
        row_mask = np.ones((n, rows), dtype=bool)
    flat = row_mask.ravel()
    groups = np.repeat(np.arange(n), rows)[flat]

    series = {name: panel.matrix(name) for name in (a, b)}
    diffs = {name: np.diff(v, axis=1) for name, v in series.items()}

    def lag_block(d: np.ndarray) -> list[np.ndarray]:
        # column j is the difference lagged j+1 periods, aligned to row s
        return [d[:, K - j : t - 1 - j].ravel()[flat] for j in range(1, K + 1)]

    ect_col = ect[:, K : t - 1].ravel()[flat]
    warnings = [] if i1_verified else ["IntegrationOrderUnverified"]

    equations: dict[str, EquationFit] = {}
    for dep, other in ((a, b), (b, a)):
        dep_col = diffs[dep][:, K:].ravel()[flat]
        own = lag_block(diffs[dep])
        cross = lag_block(diffs[other])
        X = np.column_stack(own + cross + [ect_col])
        names = (
            [f"d_{dep}_lag{j}" for j in range(1, K + 1)]
            + [f"d_{other}_lag{j}" for j in range(1, K + 1)]
            + ["ect_lag1"]
        )
        fit = within_fit(dep_col, X, groups, names=names)
        lam = float(fit.coefficients[2 * K])
        t_stat = float(fit.t_stats[2 * K])
        equations[dep] = EquationFit(
            dependent=dep,
            fit=fit,
            ect_coefficient=lam,
            ect_t_stat=t_stat,
            ect_p=float(fit.p_values[2 * K]),
            ect_f=t_stat * t_stat,
            cross_lag_indices=tuple(range(K, 2 * K)),
        )

    return VecmFit(
        spec=spec,
        equations=equations,
        ect_series=ect_col,
        cointegrating_slope=slope,
        n_rows=int(flat.sum()),
        warnings=warnings,
    )


def wald_short_run(vecm: VecmFit, cause: str, effect: str) -> WaldTest:
    """Joint nullity test of the cause's lagged differences in the effect equation."""
    a, b = vecm.spec.var_pair
    if effect not in vecm.equations:
        raise UnknownEquation(f"no equation for {effect!r}; pair is {vecm.spec.var_pair}")
    if cause not in (a, b) or cause == effect:
        raise UnknownEquation(f"cause {cause!r} is not the partner of {effect!r}")
    eq = vecm.equations[effect]
    idx = list(eq.cross_lag_indices)
    bvec = eq.fit.coefficients[idx]
    V = eq.fit.cov[np.ix_(idx, idx)]
    stat = float(bvec @ np.linalg.solve(V, bvec))
    k = len(idx)
    p = float(stats.chi2.sf(stat, k))
    return WaldTest(statistic=stat, p_value=p, f_form=stat / k, dof=k)


def _mark(p: float, alphas: tuple[float, float]) -> str:
    if p < alphas[0]:
        return "at_5"
    if p < alphas[1]:
        return "at_10"
    return "none"


def _direction(mark_xy: str, mark_yx: str, include_at_10: bool) -> str:
    hit = ("at_5", "at_10") if include_at_10 else ("at_5",)
    on_xy = mark_xy in hit
    on_yx = mark_yx in hit
    if on_xy and on_yx:
        return "bidirectional"
    if on_xy:
        return "x_to_y"
    if on_yx:
        return "y_to_x"
    return "none"


def classify_causality(
    short_tests: Mapping[tuple[str, str], WaldTest],
    long_tests: Mapping[tuple[str, str], EctTest],
    pair: tuple[str, str],
    alphas: tuple[float, float] = (0.05, 0.10),
) -> tuple[CausalityResult, CausalityResult]:
    """Direction verdicts at both horizons from per-link test records.

    Keys are (cause, effect). A long-run link counts only when its adjustment
    coefficient is negative; a significant positive loading is flagged as a
    divergent error-correction term and contributes no direction.
    """
    x, y = pair
    links = [(x, y, "x_to_y"), (y, x, "y_to_x")]
    for key in [(x, y), (y, x)]:
        if key not in short_tests or key not in long_tests:
            raise InvalidSpec(f"missing test record for link {key}")

    short_marks: dict[str, str] = {}
    short_stats: dict[str, dict] = {}
    for cause, effect, label in links:
        rec = short_tests[(cause, effect)]
        short_marks[label] = _mark(rec.p_value, alphas)
        short_stats[label] = {
            "statistic": rec.statistic,
            "p_value": rec.p_value,
            "f_form": rec.f_form,
            "dof": rec.dof,
        }
    short = CausalityResult(
        horizon="short_run",
        direction=_direction(short_marks["x_to_y"], short_marks["y_to_x"], False),
        direction_at_10=_direction(short_marks["x_to_y"], short_marks["y_to_x"], True),
        pair=pair,
        wald_stats=short_stats,
        significance_marks=short_marks,
    )

    long_marks: dict[str, str] = {}
    long_stats: dict[str, dict] = {}
    notes: list[str] = []
    for cause, effect, label in links:
        rec = long_tests[(cause, effect)]
        mark = _mark(rec.p_value, alphas)
        if rec.lambda_hat >= 0:
            if mark != "none":
                notes.append(f"divergent ECT in the {effect} equation")
            mark = "none"
        long_marks[label] = mark
        long_stats[label] = {
            "lambda": rec.lambda_hat,
            "statistic": rec.t_stat,
            "p_value": rec.p_value,
            "f_stat": rec.f_stat,
        }
    long = CausalityResult(
        horizon="long_run",
        direction=_direction(long_marks["x_to_y"], long_marks["y_to_x"], False),
        direction_at_10=_direction(long_marks["x_to_y"], long_marks["y_to_x"], True),
        pair=pair,
        wald_stats=long_stats,
        significance_marks=long_marks,
        notes=tuple(notes),
    )
    return short, long


def causality_from_fit(vecm: VecmFit) -> tuple[CausalityResult, CausalityResult]:
    """Wald both ways plus the two ECT records, classified."""
    x, y = vecm.spec.var_pair
    short = {
        (x, y): wald_short_run(vecm, x, y),
        (y, x): wald_short_run(vecm, y, x),
    }
    long = {}
    for cause, effect in ((x, y), (y, x)):
        eq = vecm.equations[effect]
        long[(cause, effect)] = EctTest(eq.ect_coefficient, eq.ect_t_stat, eq.ect_p, eq.ect_f)
    return classify_causality(short, long, vecm.spec.var_pair, vecm.spec.alpha_levels)


def regime_dependent_causality(
    panel: PanelDataset,
    spec: VecmSpec,
    gamma: float,
    regime_var: str,
    i1_verified: bool = False,
) -> RegimeCausality:
    """Re-run the whole error-correction pipeline inside each threshold regime.

    Observations are classified cell by cell; the long-run regression and both
    difference equations are re-estimated from scratch within each regime.
    """
    q = panel.matrix(regime_var)
    low_mask = q <= gamma
    sizes = (int(low_mask.sum()), int((~low_mask).sum()))
    K = spec.lags
    n, t = q.shape
    rows = t - 1 - K

    ok_low = _window_valid(low_mask, K)
    ok_high = _window_valid(~low_mask, K)
    dropped = int(n * rows - ok_low.sum() - ok_high.sum())

    warnings: list[str] = []
    results = {}
    fits = {}
    for label, mask, ok in (("low", low_mask, ok_low), ("high", ~low_mask, ok_high)):
        usable = int(ok.sum())
        contributing = int((ok.sum(axis=1) > 0).sum())
        if contributing < MIN_REGIME_ENTITIES:
            raise RegimeTooSmall(
                label, contributing, MIN_REGIME_ENTITIES, unit="contributing entities"
            )
        # enough rows for the slope block, the entity effects, and one dof
        needed = 2 * K + 1 + contributing + 1
        if usable < needed:
            raise RegimeTooSmall(label, usable, needed)
        if usable < SMALL_REGIME_ROWS:
            warnings.append(
                f"{label} regime has {usable} usable rows; "
                f"inference below {SMALL_REGIME_ROWS} is unreliable"
            )
        vecm = fit_panel_vecm(panel, spec, i1_verified=i1_verified, row_mask=ok, obs_mask=mask)
        fits[label] = vecm
        results[label] = causality_from_fit(vecm)

    return RegimeCausality(
        gamma=float(gamma),
        regime_var=regime_var,
        pair=spec.var_pair,
        low=results["low"],
        high=results["high"],
        low_fit=fits["low"],
        high_fit=fits["high"],
        regime_sizes=sizes,
        dropped_rows=dropped,
        warnings=warnings,
    )
