"""Unit-root tests (per series and panel-averaged) and panel cointegration.

The panel statistic averages per-entity Dickey-Fuller t values and standardizes
the average with Monte-Carlo null moments; the cointegration test runs a pooled
AR(1) on fixed-effects residuals. Null-distribution moments and simulated
critical values are cached, optionally in a versioned JSON sidecar.
"""

from __future__ import annotations

import json
import os
import tempfile
import warnings as _warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
from scipy import stats as _stats

from .errors import (
    DegenerateResiduals,
    InvalidSpec,
    SchemaVersionUnsupported,
    TooShort,
    UnsupportedLevel,
)
from .panel import PanelDataset, SeriesView
from .regression import FitResult, fixed_effects_fit, ols_fit

DETERMINISTICS = ("none", "intercept", "intercept_trend")

#: replications used for t-bar null moments unless the caller overrides
DEFAULT_MOMENT_REPS = 20_000
#: seed for every built-in null simulation; streams are split per cache key
DEFAULT_NULL_SEED = 101

CACHE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class UnitRootSpec:
    """Configuration shared by the series-level and panel-level tests."""

    deterministic: str = "intercept"
    lags: int = 1
    alpha: float = 0.05

    def __post_init__(self):
        if self.deterministic not in DETERMINISTICS:
            raise InvalidSpec(
                f"deterministic must be one of {DETERMINISTICS}, got {self.deterministic!r}"
            )
        if not isinstance(self.lags, int) or self.lags < 0:
            raise InvalidSpec(f"lags must be a non-negative integer, got {self.lags!r}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidSpec(f"alpha must be in (0, 1), got {self.alpha!r}")


class DfStat(NamedTuple):
    """Dickey-Fuller outcome: t on the lagged level and the estimated alpha."""

    t: float
    alpha_hat: float


@dataclass
class UnitRootStage:
    """One pass of the averaged test (level series or first differences)."""

    t_stats: tuple[float, ...]
    t_bar: float
    standardized_stat: float
    p_value: float
    reject: bool
    mu_sim: float
    sigma_sim: float
    n_periods: int

    def to_payload(self) -> dict:
        return {
            "t_stats": list(self.t_stats),
            "t_bar": self.t_bar,
            "standardized_stat": self.standardized_stat,
            "p_value": self.p_value,
            "reject": self.reject,
            "mu_sim": self.mu_sim,
            "sigma_sim": self.sigma_sim,
            "n_periods": self.n_periods,
        }


@dataclass
class UnitRootResult:
    """Panel-averaged unit-root verdict for one variable.

    The level-stage statistics are mirrored at the top level; ``difference``
    holds the second pass when the level stage fails to reject.
    """

    variable: str
    deterministic: str
    lags: int
    alpha: float
    level: UnitRootStage
    difference: UnitRootStage | None
    integration_order_decision: str  # I0 | I1 | inconclusive

    @property
    def t_stats(self) -> tuple[float, ...]:
        return self.level.t_stats

    @property
    def t_bar(self) -> float:
        return self.level.t_bar

    @property
    def standardized_stat(self) -> float:
        return self.level.standardized_stat

    @property
    def p_value(self) -> float:
        return self.level.p_value

    def to_payload(self) -> dict:
        return {
            "variable": self.variable,
            "deterministic": self.deterministic,
            "lags": self.lags,
            "alpha": self.alpha,
            "level": self.level.to_payload(),
            "difference": None if self.difference is None else self.difference.to_payload(),
            "integration_order_decision": self.integration_order_decision,
        }


@dataclass
class CointegrationResult:
    """Residual-based panel cointegration outcome."""

    rho_hat: float
    t_rho: float
    df_rho: float
    df_t: float
    p_value: float
    decision: str
    alpha: float
    variant: str
    n_entities: int
    n_periods: int
    first_stage: FitResult
    warnings: list[str] = field(default_factory=list)

    @property
    def reject(self) -> bool:
        return self.decision == "reject"

    def to_payload(self) -> dict:
        return {
            "rho_hat": self.rho_hat,
            "t_rho": self.t_rho,
            "df_rho": self.df_rho,
            "df_t": self.df_t,
            "p_value": self.p_value,
            "decision": self.decision,
            "alpha": self.alpha,
            "variant": self.variant,
            "n_entities": self.n_entities,
            "n_periods": self.n_periods,
            "warnings": list(self.warnings),
        }


@dataclass
class WeakStationarityScreen:
    """Split-half comparison of mean, variance, and lag-1 autocorrelation."""

    mean_z: float
    variance_z: float
    acf1_first: float
    acf1_second: float
    threshold: float
    stable: bool

    def to_payload(self) -> dict:
        return {
            "mean_z": self.mean_z,
            "variance_z": self.variance_z,
            "acf1_first": self.acf1_first,
            "acf1_second": self.acf1_second,
            "threshold": self.threshold,
            "stable": self.stable,
        }


# --------------------------------------------------------------------------
# null-distribution cache

class NullCache:
    """Keyed store for simulated null moments and critical values.

    Read-through: a miss triggers the supplied compute function and the result
    is written back. With a path the contents persist as a small JSON file
    (single writer, atomic replace); without one the cache is memory-only.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._mem: dict[str, dict] = {}
        if self.path is not None and self.path.exists():
            self._mem = self._load(self.path)

    @staticmethod
    def _load(path: Path) -> dict[str, dict]:
        payload = json.loads(path.read_text(encoding="utf-8"))
        version = payload.get("version")
        if version != CACHE_SCHEMA_VERSION:
            raise SchemaVersionUnsupported(
                f"cache schema version {version!r} unsupported (expected {CACHE_SCHEMA_VERSION})"
            )
        return dict(payload.get("entries", {}))

    def _flush(self) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        body = json.dumps(
            {"version": CACHE_SCHEMA_VERSION, "entries": self._mem},
            indent=1,
            sort_keys=True,
        )
        fd, tmp = tempfile.mkstemp(dir=str(self.path.parent), suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(body)
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def get_or_compute(self, key: str, compute: Callable[[], dict]) -> dict:
        if key in self._mem:
            return self._mem[key]
        value = compute()
        self._mem[key] = value
        self._flush()
        return value


_SHARED_CACHE = NullCache()


# --------------------------------------------------------------------------
# Dickey-Fuller machinery

def _series_values(series: SeriesView | np.ndarray) -> np.ndarray:
    values = series.values if isinstance(series, SeriesView) else series
    return np.asarray(values, dtype=float)


def _det_columns(deterministic: str, n_rows: int) -> list[np.ndarray]:
    if deterministic == "none":
        return []
    cols = [np.ones(n_rows)]
    if deterministic == "intercept_trend":
        cols.append(np.arange(1.0, n_rows + 1.0))
    return cols


def _adf_design(y: np.ndarray, deterministic: str, lags: int):
    """Rows for: diff(y)_t on y_{t-1}, deterministics, and lagged diffs."""
    T = y.shape[0]
    if lags > T / 3:
        raise InvalidSpec(f"lags={lags} exceeds T/3 for T={T}")
    n_rows = T - 1 - lags
    det_k = 0 if deterministic == "none" else (2 if deterministic == "intercept_trend" else 1)
    k = 1 + det_k + lags
    if n_rows <= k:
        raise TooShort(f"series of length {T} leaves {n_rows} rows for {k} regressors")
    det = _det_columns(deterministic, n_rows)
    d = np.diff(y)
    lhs = d[lags:]
    cols = [y[lags : T - 1]]
    cols.extend(det)
    cols.extend(d[lags - j : T - 1 - j] for j in range(1, lags + 1))
    names = ["level_lag1"]
    if deterministic != "none":
        names.append("const")
    if deterministic == "intercept_trend":
        names.append("trend")
    names.extend(f"dlag{j}" for j in range(1, lags + 1))
    return np.column_stack(cols), lhs, names


def df_test(series: SeriesView | np.ndarray, spec: UnitRootSpec) -> DfStat:
    """Augmented Dickey-Fuller regression for a single series.

    Returns the t statistic on the lagged level together with the estimated
    coefficient itself. Rejection region is the left tail: compare against
    :func:`df_critical_value`.
    """
    y = _series_values(series)
    X, lhs, names = _adf_design(y, spec.deterministic, spec.lags)
    fit = ols_fit(X, lhs, names=names)
    return DfStat(t=float(fit.t_stats[0]), alpha_hat=float(fit.coefficients[0]))


def select_lags_aic(
    series: SeriesView | np.ndarray, deterministic: str = "intercept", max_lags: int = 4
) -> int:
    """Pick the augmentation order by AIC over a common estimation sample."""
    y = _series_values(series)
    best_lags, best_aic = 0, np.inf
    for lags in range(0, max_lags + 1):
        X, lhs, names = _adf_design(y, deterministic, lags)
        # align on the shortest sample so likelihoods are comparable
        drop = max_lags - lags
        fit = ols_fit(X[drop:], lhs[drop:], names=names)
        n = len(lhs) - drop
        aic = n * np.log(max(fit.ssr, 1e-300) / n) + 2.0 * X.shape[1]
        if aic < best_aic:
            best_lags, best_aic = lags, aic
    return best_lags


def simulate_null_t_stats(
    T: int, deterministic: str, lags: int, reps: int, seed: int
) -> np.ndarray:
    """Dickey-Fuller t statistics for `reps` driftless random walks of length T.

    Vectorized: every replication's normal equations are solved in one batched
    call, chunked to bound memory.
    """
    if deterministic not in DETERMINISTICS:
        raise InvalidSpec(f"unknown deterministic case {deterministic!r}")
    det_code = DETERMINISTICS.index(deterministic)
    rng = np.random.default_rng(
        np.random.SeedSequence([seed & 0xFFFFFFFF, T, det_code, lags, reps])
    )
    n_rows = T - 1 - lags
    k = 1 + (0 if deterministic == "none" else (2 if deterministic == "intercept_trend" else 1)) + lags
    if n_rows <= k:
        raise TooShort(f"series of length {T} leaves {n_rows} rows for {k} regressors")
    det = _det_columns(deterministic, n_rows)

    out = np.empty(reps)
    chunk = max(1, min(reps, int(2e7 // max(1, n_rows * k))))
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        walks = np.cumsum(rng.standard_normal((m, T)), axis=1)
        d = np.diff(walks, axis=1)
        lhs = d[:, lags:]
        cols = [walks[:, lags : T - 1]]
        cols.extend(np.broadcast_to(c, (m, n_rows)) for c in det)
        cols.extend(d[:, lags - j : T - 1 - j] for j in range(1, lags + 1))
        X = np.stack(cols, axis=2)
        XtX = X.transpose(0, 2, 1) @ X
        Xty = np.einsum("rik,ri->rk", X, lhs)
        beta = np.linalg.solve(XtX, Xty[:, :, None])[:, :, 0]
        resid = lhs - np.einsum("rik,rk->ri", X, beta)
        sigma2 = np.einsum("ri,ri->r", resid, resid) / (n_rows - k)
        inv00 = np.linalg.inv(XtX)[:, 0, 0]
        out[done : done + m] = beta[:, 0] / np.sqrt(sigma2 * inv00)
        done += m
    return out


# Dickey-Fuller 1%/5%/10% critical values by deterministic case, piecewise in
# T (bands at 25, 50, 100, 250, 500, and beyond)
_T_BANDS = (25, 50, 100, 250, 500)

_DF_TABLE: dict[str, dict[float, tuple[float, ...]]] = {
    "none": {
        0.01: (-2.66, -2.62, -2.60, -2.58, -2.58, -2.58),
        0.05: (-1.95, -1.95, -1.95, -1.95, -1.95, -1.95),
        0.10: (-1.60, -1.61, -1.61, -1.62, -1.62, -1.62),
    },
    "intercept": {
        0.01: (-3.75, -3.58, -3.51, -3.46, -3.44, -3.43),
        0.05: (-3.00, -2.93, -2.89, -2.88, -2.87, -2.86),
        0.10: (-2.63, -2.60, -2.58, -2.57, -2.57, -2.57),
    },
    "intercept_trend": {
        0.01: (-4.38, -4.15, -4.04, -3.99, -3.98, -3.96),
        0.05: (-3.60, -3.50, -3.45, -3.43, -3.42, -3.41),
        0.10: (-3.24, -3.18, -3.15, -3.13, -3.13, -3.12),
    },
}


def _band_index(T: int) -> int:
    for i, bound in enumerate(_T_BANDS):
        if T <= bound:
            return i
    return len(_T_BANDS)


def df_critical_value(
    spec: UnitRootSpec,
    T: int,
    level: float,
    method: str = "table",
    reps: int = 50_000,
    seed: int = DEFAULT_NULL_SEED,
    cache: NullCache | None = None,
) -> float:
    """Left-tail Dickey-Fuller critical value.

    ``method="table"`` reads the embedded finite-sample table (indexed by the
    deterministic case and a T band; augmentation order is ignored, as is
    standard). ``method="mc"`` simulates the null with `reps` seeded
    replications and returns the empirical quantile, cached by its full key.
    """
    lvl = round(float(level), 2)
    if lvl not in (0.01, 0.05, 0.10):
        raise UnsupportedLevel(f"level must be one of 0.01, 0.05, 0.10; got {level}")
    if method == "table":
        return _DF_TABLE[spec.deterministic][lvl][_band_index(T)]
    if method != "mc":
        raise InvalidSpec(f"method must be 'table' or 'mc', got {method!r}")
    store = cache if cache is not None else _SHARED_CACHE
    key = (
        f"df_cv|{spec.deterministic}|T={T}|lags={spec.lags}"
        f"|seed={seed}|reps={reps}|level={lvl:.2f}"
    )

    def compute() -> dict:
        t_stats = simulate_null_t_stats(T, spec.deterministic, spec.lags, reps, seed)
        return {"value": float(np.quantile(t_stats, lvl))}

    return float(store.get_or_compute(key, compute)["value"])


def _null_moments(
    T: int, deterministic: str, lags: int, reps: int, seed: int, cache: NullCache
) -> tuple[float, float]:
    key = f"ips_moments|{deterministic}|T={T}|lags={lags}|seed={seed}|reps={reps}"

    def compute() -> dict:
        t_stats = simulate_null_t_stats(T, deterministic, lags, reps, seed)
        return {"mu": float(np.mean(t_stats)), "sigma": float(np.std(t_stats, ddof=1))}

    entry = cache.get_or_compute(key, compute)
    return entry["mu"], entry["sigma"]


def _stage(
    matrix: np.ndarray,
    spec: UnitRootSpec,
    reps: int,
    seed: int,
    cache: NullCache,
) -> UnitRootStage:
    N, T = matrix.shape
    t_stats = []
    for i in range(N):
        X, lhs, names = _adf_design(matrix[i], spec.deterministic, spec.lags)
        fit = ols_fit(X, lhs, names=names)
        t_stats.append(float(fit.t_stats[0]))
    t_bar = float(np.mean(t_stats))
    mu, sigma = _null_moments(T, spec.deterministic, spec.lags, reps, seed, cache)
    standardized = float(np.sqrt(N) * (t_bar - mu) / sigma)
    p_value = float(_stats.norm.cdf(standardized))
    return UnitRootStage(
        t_stats=tuple(t_stats),
        t_bar=t_bar,
        standardized_stat=standardized,
        p_value=p_value,
        reject=bool(p_value < spec.alpha),
        mu_sim=mu,
        sigma_sim=sigma,
        n_periods=T,
    )


def panel_unit_root(
    panel: PanelDataset,
    var: str,
    spec: UnitRootSpec | None = None,
    reps: int = DEFAULT_MOMENT_REPS,
    seed: int = DEFAULT_NULL_SEED,
    cache: NullCache | None = None,
) -> UnitRootResult:
    """Averaged per-entity Dickey-Fuller test with an integration verdict.

    Each entity is tested separately; the mean t statistic is standardized by
    sqrt(N) against simulated null moments and compared to the standard
    normal. When the level series fails to reject, the first differences are
    tested (with moments re-keyed to the shorter sample) and the variable is
    declared I1 on rejection, inconclusive otherwise.
    """
    spec = spec or UnitRootSpec()
    if panel.n_entities < 2:
        raise TooShort(f"panel test needs at least 2 entities, got {panel.n_entities}")
    store = cache if cache is not None else _SHARED_CACHE
    matrix = panel.matrix(var)
    level = _stage(matrix, spec, reps, seed, store)
    if level.reject:
        return UnitRootResult(
            variable=var,
            deterministic=spec.deterministic,
            lags=spec.lags,
            alpha=spec.alpha,
            level=level,
            difference=None,
            integration_order_decision="I0",
        )
    diff_stage = _stage(np.diff(matrix, axis=1), spec, reps, seed, store)
    decision = "I1" if diff_stage.reject else "inconclusive"
    return UnitRootResult(
        variable=var,
        deterministic=spec.deterministic,
        lags=spec.lags,
        alpha=spec.alpha,
        level=level,
        difference=diff_stage,
        integration_order_decision=decision,
    )


# --------------------------------------------------------------------------
# panel cointegration

def kao_statistics(
    rho_hat: float, t_rho: float, N: int, T: int, variant: str = "printed"
) -> tuple[float, float]:
    """DF_rho and DF_t from the stage-2 estimates.

    The published DF_rho scales (rho_hat - 1) by sqrt(NT); "canonical"
    restores the sqrt(N)*T scaling found elsewhere in the literature. DF_t is
    identical under both readings.
    """
    if variant not in ("printed", "canonical"):
        raise InvalidSpec(f"variant must be 'printed' or 'canonical', got {variant!r}")
    root_n = np.sqrt(N)
    scale = np.sqrt(N * T) if variant == "printed" else root_n * T
    df_rho = (scale * (rho_hat - 1.0) + 3.0 * root_n) / np.sqrt(10.2)
    df_t = np.sqrt(1.25) * t_rho + np.sqrt(1.875 * N)
    return float(df_rho), float(df_t)


def kao_test(
    panel: PanelDataset,
    y: str,
    xs: list[str],
    alpha: float = 0.05,
    variant: str = "printed",
    i1_verified: bool = False,
) -> CointegrationResult:
    """Residual-based panel cointegration test.

    Stage 1 regresses `y` on `xs` with fixed effects; stage 2 fits a pooled
    AR(1) through the origin on the stacked residuals. The DF statistics use
    the coefficients exactly as published: DF_rho scales (rho_hat - 1) by
    sqrt(NT) (``variant="canonical"`` restores the sqrt(N)*T scaling) and
    DF_t = sqrt(1.25) * t_rho + sqrt(1.875 N), where t_rho tests rho = 1.
    The decision comes from DF_t against the standard normal left tail.
    """
    first_stage = fixed_effects_fit(panel, y, xs)
    resid_rms = float(np.sqrt(np.mean(np.square(first_stage.residuals))))
    y_rms = float(np.sqrt(np.mean(np.square(panel.matrix(y)))))
    if resid_rms <= 1e-12 * (1.0 + y_rms):
        raise DegenerateResiduals("first-stage residuals are numerically zero")
    N, T = panel.n_entities, panel.n_periods
    resid = first_stage.residuals.reshape(N, T)
    lagged = resid[:, :-1].ravel()
    current = resid[:, 1:].ravel()
    ar_fit = ols_fit(lagged[:, None], current, names=["rho"])
    rho_hat = float(ar_fit.coefficients[0])
    se_rho = float(ar_fit.standard_errors[0])
    t_rho = (rho_hat - 1.0) / se_rho
    df_rho, df_t = kao_statistics(rho_hat, t_rho, N, T, variant)
    p_value = float(_stats.norm.cdf(df_t))

    result_warnings = []
    if not i1_verified:
        result_warnings.append("IntegrationOrderUnverified")
    return CointegrationResult(
        rho_hat=rho_hat,
        t_rho=float(t_rho),
        df_rho=float(df_rho),
        df_t=float(df_t),
        p_value=p_value,
        decision="reject" if p_value < alpha else "fail_to_reject",
        alpha=alpha,
        variant=variant,
        n_entities=N,
        n_periods=T,
        first_stage=first_stage,
        warnings=result_warnings,
    )


def weak_stationarity_screen(
    series: SeriesView | np.ndarray, threshold: float = 4.0
) -> WeakStationarityScreen:
    """Split-half check that mean and variance are stable over time.

    The halves' means and variances are compared in standard-error units;
    the lag-1 autocorrelations of each half are reported for inspection but
    do not enter the verdict.
    """
    values = _series_values(series)
    n = values.shape[0]
    if n < 8:
        raise TooShort(f"screen needs at least 8 observations, got {n}")
    first, second = values[: n // 2], values[n // 2 :]
    n1, n2 = len(first), len(second)
    v1, v2 = float(np.var(first, ddof=1)), float(np.var(second, ddof=1))
    mean_se = np.sqrt(v1 / n1 + v2 / n2)
    mean_z = float((np.mean(second) - np.mean(first)) / mean_se) if mean_se > 0 else 0.0
    var_se = np.sqrt(2.0 * v1 * v1 / (n1 - 1) + 2.0 * v2 * v2 / (n2 - 1))
    variance_z = float((v2 - v1) / var_se) if var_se > 0 else 0.0

    def _acf1(x: np.ndarray) -> float:
        centered = x - x.mean()
        denom = float(centered @ centered)
        if denom == 0.0:
            return 0.0
        return float(centered[1:] @ centered[:-1] / denom)

    stable = abs(mean_z) < threshold and abs(variance_z) < threshold
    return WeakStationarityScreen(
        mean_z=mean_z,
        variance_z=variance_z,
        acf1_first=_acf1(first),
        acf1_second=_acf1(second),
        threshold=threshold,
        stable=stable,
    )
