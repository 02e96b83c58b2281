"""Balanced-panel container and per-series descriptive statistics.

A :class:`PanelDataset` is a dense, immutable block of observations indexed by
(entity, period, variable). Ingestion accepts long and wide CSV layouts and
enforces balance, numeric values, unique keys and consecutive periods up front
so the estimators never have to re-validate.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import (
    DuplicateKey,
    MalformedCsv,
    NonNumericValue,
    NonPositiveValue,
    TooShort,
    UnbalancedPanel,
    UnknownVariable,
    ZeroVariance,
)

LONG_HEADER = ["entity", "period", "variable", "value"]


@dataclass(frozen=True)
class SeriesView:
    """One entity's trajectory for one variable."""

    entity: str
    variable: str
    periods: tuple[int, ...]
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.periods)


@dataclass
class DescriptiveStats:
    variable: str
    mean: float
    std: float
    min: float
    max: float
    n: int

    def validate(self) -> None:
        """Reject impossible shapes (a printed table with min > max fails here)."""
        if self.n < 1:
            raise ValueError(f"{self.variable}: empty sample")
        if self.min > self.max:
            raise ValueError(f"{self.variable}: min {self.min} exceeds max {self.max}")
        if not (self.min <= self.mean <= self.max):
            raise ValueError(f"{self.variable}: mean {self.mean} outside [min, max]")
        if self.std < 0:
            raise ValueError(f"{self.variable}: negative standard deviation")


@dataclass
class NormalityResult:
    statistic: float
    p_value: float
    skewness: float
    kurtosis: float
    n: int


@dataclass
class StationaritySummary:
    """First and second moments used by the weak-stationarity screen."""

    mean: float
    variance: float
    autocovariances: tuple[float, ...]
    autocorrelations: tuple[float, ...]


class PanelDataset:
    """Immutable balanced panel: N entities x T periods x V variables."""

    __slots__ = ("entities", "periods", "variables", "values", "meta", "_eidx", "_vidx")

    def __init__(
        self,
        entities: tuple[str, ...],
        periods: tuple[int, ...],
        variables: tuple[str, ...],
        values: np.ndarray,
        meta: dict | None = None,
    ):
        values = np.asarray(values, dtype=float)
        if values.shape != (len(entities), len(periods), len(variables)):
            raise MalformedCsv(
                f"value block shape {values.shape} does not match "
                f"({len(entities)}, {len(periods)}, {len(variables)})"
            )
        _check_periods(periods)
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "entities", tuple(entities))
        object.__setattr__(self, "periods", tuple(int(p) for p in periods))
        object.__setattr__(self, "variables", tuple(variables))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "meta", dict(meta or {}))
        object.__setattr__(self, "_eidx", {e: i for i, e in enumerate(entities)})
        object.__setattr__(self, "_vidx", {v: i for i, v in enumerate(variables)})

    def __setattr__(self, name, value):
        raise AttributeError("PanelDataset is immutable")

    # -- shape -----------------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    @property
    def n_obs(self) -> int:
        return len(self.entities) * len(self.periods)

    # -- lookup ----------------------------------------------------------

    def entity_index(self, entity: str) -> int:
        try:
            return self._eidx[entity]
        except KeyError:
            raise UnknownVariable(f"unknown entity {entity!r}") from None

    def var_index(self, variable: str) -> int:
        try:
            return self._vidx[variable]
        except KeyError:
            raise UnknownVariable(f"unknown variable {variable!r}") from None

    def value(self, entity: str, period: int, variable: str) -> float:
        t = self.periods.index(period)
        return float(self.values[self.entity_index(entity), t, self.var_index(variable)])

    def series(self, entity: str, variable: str) -> SeriesView:
        vals = self.values[self.entity_index(entity), :, self.var_index(variable)]
        return SeriesView(entity, variable, self.periods, vals)

    def matrix(self, variable: str) -> np.ndarray:
        """(N, T) block for one variable (read-only view)."""
        return self.values[:, :, self.var_index(variable)]

    # -- derived panels ----------------------------------------------------

    def with_variables(self, names: list[str], blocks: list[np.ndarray]) -> "PanelDataset":
        """New panel with extra variables appended (each block is (N, T))."""
        for name in names:
            if name in self._vidx:
                raise DuplicateKey(f"variable {name!r} already present")
        stacked = np.concatenate([self.values, np.stack(blocks, axis=2)], axis=2)
        return PanelDataset(self.entities, self.periods, self.variables + tuple(names), stacked, self.meta)

    def select(self, variables: list[str]) -> "PanelDataset":
        idx = [self.var_index(v) for v in variables]
        return PanelDataset(self.entities, self.periods, tuple(variables), self.values[:, :, idx], self.meta)

    # -- serialization -----------------------------------------------------

    def to_long_csv(self) -> str:
        """Canonical long-layout serialization (stable ordering, repr floats)."""
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(LONG_HEADER)
        for i, entity in enumerate(self.entities):
            for t, period in enumerate(self.periods):
                for j, variable in enumerate(self.variables):
                    writer.writerow([entity, period, variable, repr(float(self.values[i, t, j]))])
        return out.getvalue()

    def to_wide_csv(self) -> str:
        """Wide-layout serialization: entity, period, one column per variable."""
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["entity", "period", *self.variables])
        for i, entity in enumerate(self.entities):
            for t, period in enumerate(self.periods):
                writer.writerow([entity, period, *(repr(float(v)) for v in self.values[i, t, :])])
        return out.getvalue()

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_long_csv().encode("utf-8")).hexdigest()


def _check_periods(periods) -> None:
    if len(periods) < 2:
        raise TooShort(f"panel needs at least 2 periods, got {len(periods)}")
    for a, b in zip(periods, periods[1:]):
        if int(b) != int(a) + 1:
            raise MalformedCsv(f"periods must be consecutive integers; saw {a} then {b}")


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def load_csv(source: str | Path, layout: str = "long", meta: dict | None = None) -> PanelDataset:
    """Parse a long (entity,period,variable,value) or wide (entity,period,v1..) CSV.

    ``source`` may be raw CSV text or a filesystem path.
    """
    text = _read_source(source)
    if layout == "long":
        rows = _parse_long(text)
    elif layout == "wide":
        rows = _parse_wide(text)
    else:
        raise MalformedCsv(f"unknown layout {layout!r}; expected 'long' or 'wide'")
    return _assemble(rows, meta)


def _read_source(source: str | Path) -> str:
    if isinstance(source, Path):
        return source.read_text()
    text = str(source)
    if "\n" not in text and "," not in text:
        path = Path(text)
        if path.exists():
            return path.read_text()
        raise MalformedCsv(f"not CSV content and no such file: {text!r}")
    return text


def _parse_float(raw: str, where: str) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise NonNumericValue(f"non-numeric value {raw!r} at {where}") from None
    if math.isnan(value) or math.isinf(value):
        raise NonNumericValue(f"non-finite value {raw!r} at {where}")
    return value


def _parse_period(raw: str, where: str) -> int:
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise NonNumericValue(f"non-integer period {raw!r} at {where}") from None


def _csv_rows(text: str) -> list[list[str]]:
    rows = [row for row in csv.reader(io.StringIO(text)) if row and any(f.strip() for f in row)]
    if len(rows) < 2:
        raise MalformedCsv("CSV needs a header and at least one data row")
    return rows


def _parse_long(text: str) -> list[tuple[str, int, str, float]]:
    rows = _csv_rows(text)
    header = [h.strip().lower() for h in rows[0]]
    if header != LONG_HEADER:
        raise MalformedCsv(f"long layout header must be {LONG_HEADER}, got {rows[0]}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise MalformedCsv(f"line {lineno}: expected 4 fields, got {len(row)}")
        entity, period, variable, value = (f.strip() for f in row)
        where = f"line {lineno}"
        out.append((entity, _parse_period(period, where), variable, _parse_float(value, where)))
    return out


def _parse_wide(text: str) -> list[tuple[str, int, str, float]]:
    rows = _csv_rows(text)
    header = [h.strip() for h in rows[0]]
    if len(header) < 3 or [h.lower() for h in header[:2]] != ["entity", "period"]:
        raise MalformedCsv(f"wide layout header must start with entity,period; got {rows[0]}")
    variables = header[2:]
    if len(set(variables)) != len(variables):
        raise DuplicateKey(f"duplicate variable column in header: {rows[0]}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise MalformedCsv(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        entity = row[0].strip()
        period = _parse_period(row[1].strip(), f"line {lineno}")
        for variable, raw in zip(variables, row[2:]):
            out.append((entity, period, variable, _parse_float(raw.strip(), f"line {lineno} column {variable}")))
    return out


def _assemble(rows: list[tuple[str, int, str, float]], meta: dict | None) -> PanelDataset:
    entities: list[str] = []
    periods_seen: list[int] = []
    variables: list[str] = []
    cells: dict[tuple[str, int, str], float] = {}
    for entity, period, variable, value in rows:
        key = (entity, period, variable)
        if key in cells:
            raise DuplicateKey(f"duplicate observation for {key}")
        cells[key] = value
        if entity not in entities:
            entities.append(entity)
        if period not in periods_seen:
            periods_seen.append(period)
        if variable not in variables:
            variables.append(variable)

    periods = sorted(periods_seen)
    missing = [
        (e, p, v)
        for e in entities
        for p in periods
        for v in variables
        if (e, p, v) not in cells
    ]
    if missing:
        raise UnbalancedPanel(missing)
    _check_periods(periods)

    values = np.empty((len(entities), len(periods), len(variables)))
    for i, e in enumerate(entities):
        for t, p in enumerate(periods):
            for j, v in enumerate(variables):
                values[i, t, j] = cells[(e, p, v)]
    return PanelDataset(tuple(entities), tuple(periods), tuple(variables), values, meta)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def log_transform(panel: PanelDataset, variables: list[str]) -> PanelDataset:
    """Append natural-log variables named ``ln_<var>``.

    Every transformed value must be strictly positive; the first offending cell
    is named in the error.
    """
    blocks = []
    for var in variables:
        block = panel.matrix(var)
        if np.any(block <= 0):
            i, t = map(int, np.argwhere(block <= 0)[0])
            raise NonPositiveValue(
                f"cannot log {var!r}: value {block[i, t]!r} at "
                f"(entity {panel.entities[i]!r}, period {panel.periods[t]}) is not positive"
            )
        blocks.append(np.log(block))
    return panel.with_variables([f"ln_{v}" for v in variables], blocks)


def first_difference(panel: PanelDataset, variable: str) -> np.ndarray:
    """(N, T-1) block of first differences for one variable."""
    block = panel.matrix(variable)
    if block.shape[1] < 2:
        raise TooShort("need at least 2 periods to difference")
    return np.diff(block, axis=1)


def within_demean(panel: PanelDataset, variable: str) -> np.ndarray:
    """(N, T) block with each entity's own mean removed (fixed-effects transform)."""
    block = panel.matrix(variable)
    return block - block.mean(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# descriptive statistics
# ---------------------------------------------------------------------------


def descriptive_stats(panel: PanelDataset, variable: str) -> DescriptiveStats:
    """Pooled mean / sample std / min / max over all N*T observations."""
    block = panel.matrix(variable)
    flat = block.ravel()
    stats_row = DescriptiveStats(
        variable=variable,
        mean=float(flat.mean()),
        std=float(flat.std(ddof=1)),
        min=float(flat.min()),
        max=float(flat.max()),
        n=flat.size,
    )
    stats_row.validate()
    return stats_row


def normality_test(values: np.ndarray | SeriesView) -> NormalityResult:
    """Jarque-Bera test: n/6 * (S^2 + (K-3)^2 / 4) against chi-square(2).

    Skewness and kurtosis use the biased (moment) estimators, matching the
    classical statistic.
    """
    if isinstance(values, SeriesView):
        values = values.values
    x = np.asarray(values, dtype=float).ravel()
    n = x.size
    if n < 8:
        raise TooShort(f"normality test needs at least 8 observations, got {n}")
    centered = x - x.mean()
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        raise ZeroVariance("normality test undefined for a constant series")
    skew = float(np.mean(centered**3) / m2**1.5)
    kurt = float(np.mean(centered**4) / m2**2)
    jb = n / 6.0 * (skew**2 + 0.25 * (kurt - 3.0) ** 2)
    p = float(stats.chi2.sf(jb, df=2))
    return NormalityResult(statistic=float(jb), p_value=p, skewness=skew, kurtosis=kurt, n=n)


def stationarity_summary(values: np.ndarray | SeriesView, max_lag: int = 4) -> StationaritySummary:
    """Sample mean, variance and autocovariances up to ``max_lag``."""
    if isinstance(values, SeriesView):
        values = values.values
    x = np.asarray(values, dtype=float).ravel()
    if x.size < max_lag + 2:
        raise TooShort(f"need at least {max_lag + 2} observations for {max_lag} lags")
    centered = x - x.mean()
    var = float(np.mean(centered**2))
    autocov = [float(np.mean(centered[k:] * centered[: len(x) - k])) for k in range(1, max_lag + 1)]
    if var == 0.0:
        raise ZeroVariance("autocorrelation undefined for a constant series")
    return StationaritySummary(
        mean=float(x.mean()),
        variance=var,
        autocovariances=tuple(autocov),
        autocorrelations=tuple(c / var for c in autocov),
    )
