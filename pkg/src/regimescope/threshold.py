"""Panel threshold regression.

Grid search for the threshold location, within-transform estimation of the
regime slopes, bootstrap threshold-effect tests, and sequential single/double/
triple threshold selection. The search exploits the fact that for a fixed set
of base regressors only one design column varies with the candidate threshold,
so each candidate costs a rank-one update and a whole bootstrap replication
set reduces to a single matrix product.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import (
    EmptyRegime,
    InvalidSpec,
    NonNestedSSR,
    RankDeficient,
    TooFewDistinctValues,
    TooShort,
)
from .panel import PanelDataset
from .regression import FitResult, within_fit

#: below this SSR the threshold fit is treated as exact and F reported as +inf
EXACT_FIT_SSR = 1e-18

_LEVELS = ("single", "double", "triple")


@dataclass(frozen=True)
class ThresholdSpec:
    """Configuration of the threshold search."""

    dependent: str
    regime_dependent_regressor: str
    threshold_var: str
    controls: tuple[str, ...] = ()
    trim: float = 0.05
    grid_max: int = 400
    bootstrap_reps: int = 299
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.trim < 0.25:
            raise InvalidSpec(f"trim must be in (0, 0.25), got {self.trim}")
        if self.grid_max < 1:
            raise InvalidSpec(f"grid_max must be positive, got {self.grid_max}")
        if self.bootstrap_reps < 1:
            raise InvalidSpec(f"bootstrap_reps must be positive, got {self.bootstrap_reps}")
        if self.seed < 0:
            raise InvalidSpec(f"seed must be non-negative, got {self.seed}")
        object.__setattr__(self, "controls", tuple(self.controls))


@dataclass
class ThresholdFit:
    """Estimated threshold model at one level of the sequential procedure.

    ``gammas`` holds every threshold of the model (sorted); ``gamma_hat`` is
    the one added at this level. The profile entry at the winning candidate is
    recomputed from explicit residuals, so an exact split reports an SSR at
    the numerical floor rather than the cancellation error of the fast
    rank-one formula.
    """

    gamma_hat: float
    gammas: tuple[float, ...]
    regime_coefficients: dict[str, dict]
    control_coefficients: dict[str, dict]
    ssr_profile: list[tuple[float, float]]
    s1: float
    fit: FitResult
    regime_counts: tuple[int, ...]

    def to_payload(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "gammas": list(self.gammas),
            "regime_coefficients": self.regime_coefficients,
            "control_coefficients": self.control_coefficients,
            "ssr_profile": [[g, s] for g, s in self.ssr_profile],
            "s1": self.s1,
            "regime_counts": list(self.regime_counts),
            "fit": self.fit.to_payload(),
        }


@dataclass
class ThresholdTest:
    """Bootstrap threshold-effect test at one level.

    ``null_f_stats`` keeps the sorted bootstrap draws so reports can bin the
    null distribution without rerunning the resampler.
    """

    level: str
    f_stat: float
    bootstrap_p: float
    critical_values: tuple[float, float, float]  # 10%, 5%, 1%
    reps_used: int
    decision: str
    alpha: float
    warnings: list[str] = field(default_factory=list)
    null_f_stats: tuple[float, ...] = ()

    @property
    def reject(self) -> bool:
        return self.decision == "reject"

    def to_payload(self) -> dict:
        return {
            "level": self.level,
            "f_stat": self.f_stat,
            "bootstrap_p": self.bootstrap_p,
            "critical_values": list(self.critical_values),
            "reps_used": self.reps_used,
            "decision": self.decision,
            "alpha": self.alpha,
            "warnings": list(self.warnings),
            "null_f_stats": list(self.null_f_stats),
        }


def classify_regime(value: float, gamma: float) -> str:
    """The boundary observation belongs to the low regime."""
    return "low" if value <= gamma else "high"


def grid_candidates(panel: PanelDataset, spec: ThresholdSpec) -> np.ndarray:
    """Distinct threshold-variable values, rank-trimmed and thinned.

    The lowest and highest ``trim`` shares of the distinct values are removed
    and the survivors are thinned to at most ``grid_max`` candidates evenly
    spaced by rank (endpoints kept).
    """
    q = panel.matrix(spec.threshold_var).ravel()
    distinct = np.unique(q)
    if distinct.size < 10:
        raise TooFewDistinctValues(
            f"threshold variable {spec.threshold_var!r} has {distinct.size} distinct values; need 10"
        )
    cut = int(math.floor(spec.trim * distinct.size))
    trimmed = distinct[cut : distinct.size - cut]
    if trimmed.size == 0:
        raise TooFewDistinctValues("trimming removed every candidate")
    if trimmed.size > spec.grid_max:
        ranks = np.unique(np.round(np.linspace(0, trimmed.size - 1, spec.grid_max)).astype(int))
        trimmed = trimmed[ranks]
    return trimmed


def _segment_masks(q: np.ndarray, gammas: tuple[float, ...]) -> list[np.ndarray]:
    """Observation masks for the len(gammas)+1 regimes, lowest first."""
    bounds = sorted(gammas)
    masks = []
    lower = None
    for g in bounds:
        upper = q <= g
        masks.append(upper if lower is None else (upper & ~lower))
        lower = upper
    masks.append(~lower)
    return masks


def _regime_labels(n_regimes: int) -> list[str]:
    if n_regimes == 2:
        return ["low", "high"]
    if n_regimes == 3:
        return ["low", "mid", "high"]
    return [f"r{i + 1}" for i in range(n_regimes)]


@dataclass
class _Stacked:
    """Entity-major stacked arrays for one threshold specification."""

    y: np.ndarray
    x: np.ndarray
    q: np.ndarray
    C: np.ndarray
    groups: np.ndarray
    entities: list[str]
    N: int
    T: int
    n: int
    m: int


def _stack(panel: PanelDataset, spec: ThresholdSpec) -> _Stacked:
    N, T = panel.n_entities, panel.n_periods
    n = N * T
    m = int(math.floor(spec.trim * n))
    if m < 1:
        raise InvalidSpec(
            f"trim {spec.trim} leaves no minimum regime size at {n} observations"
        )
    C = (
        np.column_stack([panel.matrix(c).ravel() for c in spec.controls])
        if spec.controls
        else np.empty((n, 0))
    )
    return _Stacked(
        y=panel.matrix(spec.dependent).ravel(),
        x=panel.matrix(spec.regime_dependent_regressor).ravel(),
        q=panel.matrix(spec.threshold_var).ravel(),
        C=C,
        groups=np.repeat(np.arange(N), T),
        entities=list(panel.entities),
        N=N,
        T=T,
        n=n,
        m=m,
    )


class _Workspace:
    """Stacked, demeaned panel with the candidate grid and projections.

    W holds the always-present design columns (the regime regressor itself
    plus controls, demeaned); U is the candidate split-column matrix projected
    off W. Every profile SSR and every bootstrap statistic is a function of
    U, U'U, and inner products with the (projected) response.
    """

    def __init__(self, panel: PanelDataset, spec: ThresholdSpec):
        self.spec = spec
        self.st = _stack(panel, spec)
        st = self.st
        self.N, self.T, self.n, self.m = st.N, st.T, st.n, st.m
        self.y, self.x, self.q, self.C = st.y, st.x, st.q, st.C
        self.groups = st.groups
        self.entities = st.entities

        self.candidates = grid_candidates(panel, spec)
        q_sorted = np.sort(self.q)
        self.counts = np.searchsorted(q_sorted, self.candidates, side="right")

        y_t = self._demean(self.y)
        base = np.column_stack([self._demean(self.x), self._demean(self.C)])
        base_names = [spec.regime_dependent_regressor, *spec.controls]
        Qmat, Rmat, piv = linalg.qr(base, mode="economic", pivoting=True)
        diag = np.abs(np.diag(Rmat))
        tol = diag[0] * max(base.shape) * np.finfo(float).eps if diag.size else 0.0
        if diag.size and diag[-1] <= tol:
            dropped = [base_names[piv[i]] for i in range(diag.size) if diag[i] <= tol]
            raise RankDeficient(dropped)
        self.Q = Qmat

        Z = self.x[:, None] * (self.q[:, None] <= self.candidates[None, :])
        U = self._demean(Z)
        U -= self.Q @ (self.Q.T @ U)
        self.U = U
        self.r = y_t - self.Q @ (self.Q.T @ y_t)
        self.ssr0 = float(self.r @ self.r)
        self.d = np.einsum("ij,ij->j", U, U)
        self.a = U.T @ self.r
        self._UtU: np.ndarray | None = None

        self.valid_single = (self.counts >= self.m) & (self.n - self.counts >= self.m)
        if not self.valid_single.any():
            raise TooFewDistinctValues("no candidate satisfies the trim share on both sides")
        # columns whose projection is numerically zero cannot define a regime
        self._d_floor = 1e-12 * (1.0 + float(self.d.max()))

    def _demean(self, arr: np.ndarray) -> np.ndarray:
        shaped = arr.reshape(self.N, self.T, -1)
        out = shaped - shaped.mean(axis=1, keepdims=True)
        return out.reshape(arr.shape).astype(float)

    @property
    def UtU(self) -> np.ndarray:
        if self._UtU is None:
            self._UtU = self.U.T @ self.U
        return self._UtU

    def dof(self, n_regimes: int) -> int:
        k = n_regimes + self.C.shape[1]
        value = self.n - self.N - k
        if value <= 0:
            raise TooShort(f"{self.n} observations cannot support {k} regressors with entity effects")
        return value

    # ---- profile machinery -------------------------------------------------

    def _adjusted(self, fixed: list[int], A: np.ndarray, ssr0: np.ndarray):
        """Project the candidate columns off the already-chosen ones.

        A is (G, B) of inner products U'r per replication; returns the
        adjusted inner products, adjusted squared norms (G,) or (G, B), and
        the SSR of the model containing only the fixed columns.
        """
        if not fixed:
            return A, np.broadcast_to(self.d[:, None], A.shape), np.asarray(ssr0, dtype=float)
        UtU = self.UtU
        idx = list(fixed)
        S = UtU[np.ix_(idx, idx)]
        W = UtU[idx, :]  # (k, G)
        a_f = A[idx, :]  # (k, B)
        coef = np.linalg.solve(S, a_f)  # (k, B)
        adj_a = A - W.T @ coef
        SinvW = np.linalg.solve(S, W)  # (k, G)
        adj_d = self.d - np.einsum("kg,kg->g", W, SinvW)
        base_ssr = np.asarray(ssr0, dtype=float) - np.einsum("kb,kb->b", a_f, coef)
        return adj_a, np.broadcast_to(adj_d[:, None], adj_a.shape), base_ssr

    def _valid_for(self, fixed: list[int]) -> np.ndarray:
        if not fixed:
            return self.valid_single
        rows = [np.full(self.counts.size, self.counts[i]) for i in fixed] + [self.counts]
        bounds = np.sort(np.vstack(rows), axis=0)
        segments = np.diff(
            np.vstack(
                [np.zeros(bounds.shape[1], dtype=int), bounds, np.full(bounds.shape[1], self.n)]
            ),
            axis=0,
        )
        valid = (segments >= self.m).all(axis=0)
        valid[list(fixed)] = False
        return valid

    def search(self, fixed: list[int], r: np.ndarray | None = None):
        """Grid search for one more threshold given already-fixed ones.

        Returns (best_index, ssr_values_on_full_grid, base_ssr) for the real
        response (or a supplied projected residual vector).
        """
        r_vec = self.r if r is None else r
        a_vec = (self.U.T @ r_vec) if r is not None else self.a
        ssr0 = float(r_vec @ r_vec)
        adj_a, adj_d, base = self._adjusted(fixed, a_vec[:, None], np.array([ssr0]))
        gain = np.where(adj_d[:, 0] > self._d_floor, adj_a[:, 0] ** 2 / np.maximum(adj_d[:, 0], self._d_floor), 0.0)
        ssr_values = float(base[0]) - gain
        valid = self._valid_for(fixed)
        masked = np.where(valid, ssr_values, np.inf)
        best = int(np.argmin(masked))
        if not np.isfinite(masked[best]):
            raise TooFewDistinctValues("no admissible candidate for an additional threshold")
        return best, ssr_values, float(base[0])


def _make_fit(st: _Stacked, spec: ThresholdSpec, gammas: tuple[float, ...]) -> ThresholdFit:
    masks = _segment_masks(st.q, gammas)
    labels = _regime_labels(len(masks))
    x_name = spec.regime_dependent_regressor
    X = np.column_stack([st.x * m for m in masks] + [st.C[:, j] for j in range(st.C.shape[1])])
    names = [f"{x_name}_{lab}" for lab in labels] + list(spec.controls)
    counts = tuple(int(m.sum()) for m in masks)
    if min(counts) == 0:
        raise EmptyRegime(f"thresholds {sorted(gammas)} leave an empty regime (counts {counts})")
    if min(counts) < st.m:
        raise EmptyRegime(
            f"regime counts {counts} fall below the trim share minimum of {st.m} observations"
        )
    fit = within_fit(st.y, X, st.groups, names=names, group_labels=st.entities)

    def record(i: int) -> dict:
        return {
            "coefficient": float(fit.coefficients[i]),
            "standard_error": float(fit.standard_errors[i]),
            "t_stat": float(fit.t_stats[i]),
            "p_value": float(fit.p_values[i]),
        }

    regime = {labels[i]: record(i) for i in range(len(labels))}
    controls = {c: record(len(labels) + j) for j, c in enumerate(spec.controls)}
    return ThresholdFit(
        gamma_hat=float(gammas[-1]),
        gammas=tuple(sorted(float(g) for g in gammas)),
        regime_coefficients=regime,
        control_coefficients=controls,
        ssr_profile=[],
        s1=float(fit.ssr),
        fit=fit,
        regime_counts=counts,
    )


def fit_at_gamma(panel: PanelDataset, spec: ThresholdSpec, gamma: float) -> FitResult:
    """Within fit of the two-regime design at a caller-chosen threshold."""
    st = _stack(panel, spec)
    low = st.q <= gamma
    n_low = int(low.sum())
    if n_low == 0 or n_low == st.n:
        raise EmptyRegime(f"gamma {gamma} puts every observation in one regime")
    return _make_fit(st, spec, (float(gamma),)).fit


def estimate_empirical_model(panel: PanelDataset, spec: ThresholdSpec, gamma: float) -> FitResult:
    """Regime-split fixed-effects regression, columns ordered for reporting.

    The regime-dependent regressor's low and high slopes come first, followed
    by the controls in the order given by the spec.
    """
    return fit_at_gamma(panel, spec, gamma)


def fit_single_threshold(panel: PanelDataset, spec: ThresholdSpec) -> ThresholdFit:
    ws = _Workspace(panel, spec)
    return _single_from_workspace(ws)


def _single_from_workspace(ws: _Workspace) -> ThresholdFit:
    best, ssr_values, _ = ws.search([])
    gamma = float(ws.candidates[best])
    result = _make_fit(ws.st, ws.spec, (gamma,))
    profile = [(float(g), float(s)) for g, s in zip(ws.candidates, ssr_values)]
    # the winner's profile entry is replaced by the exactly-computed SSR
    profile[best] = (gamma, result.s1)
    result.ssr_profile = profile
    return result


def threshold_f_stat(s0: float, s1: float, fit1: FitResult) -> float:
    """F = (s0 - s1) / (s1 / dof); +inf when the alternative fit is exact."""
    if s0 < 0 or s1 < 0:
        raise NonNestedSSR(f"negative SSR (s0={s0}, s1={s1})")
    if s1 - s0 > 1e-10 * max(s1, 1.0):
        raise NonNestedSSR(f"restricted SSR {s0} below unrestricted SSR {s1}")
    if fit1.dof <= 0:
        raise InvalidSpec("alternative fit has no residual degrees of freedom")
    if s1 <= EXACT_FIT_SSR or s1 <= 1e-14 * s0:
        return math.inf
    return max(s0 - s1, 0.0) / (s1 / fit1.dof)


def _bootstrap_f(
    ws: _Workspace,
    level: int,
    resid_null: np.ndarray,
    reps: int,
    seed: int,
    threads: int = 1,
) -> np.ndarray:
    """Null-bootstrap F statistics for the given level (1, 2, or 3).

    Residuals of the null model are resampled i.i.d. per observation with a
    per-replication stream keyed (seed, level, rep), re-demeaned by entity,
    and pushed through the same projection algebra as the real search. The
    null fitted values lie in the projected-out span, so they cancel from
    every SSR difference and are omitted.
    """
    n, m = ws.n, ws.m

    def run_chunk(lo: int, hi: int) -> np.ndarray:
        B = hi - lo
        E = np.empty((n, B))
        for j, rep in enumerate(range(lo, hi)):
            rng = np.random.default_rng(
                np.random.SeedSequence([seed & 0xFFFFFFFF, level, rep])
            )
            E[:, j] = resid_null[rng.integers(0, n, size=n)]
        E = E.reshape(ws.N, ws.T, B)
        E = E - E.mean(axis=1, keepdims=True)
        E = E.reshape(n, B)
        R = E - ws.Q @ (ws.Q.T @ E)
        ssr0 = np.einsum("ij,ij->j", R, R)
        A = ws.U.T @ R  # (G, B)

        d_col = np.maximum(ws.d, ws._d_floor)[:, None]
        ssr_single = ssr0[None, :] - np.where(
            ws.d[:, None] > ws._d_floor, A * A / d_col, 0.0
        )
        masked1 = np.where(ws.valid_single[:, None], ssr_single, np.inf)
        i1 = np.argmin(masked1, axis=0)
        s1 = np.take_along_axis(masked1, i1[None, :], axis=0)[0]
        if level == 1:
            s1 = np.maximum(s1, EXACT_FIT_SSR)
            return (ssr0 - s1) * ws.dof(2) / s1

        UtU = ws.UtU
        counts = ws.counts

        def second_stage(A2, ssr2_base, i_fixed):
            # rank-one update off one fixed candidate column per replication
            w = UtU[:, i_fixed]  # (G, B)
            den = np.maximum(ws.d[i_fixed], ws._d_floor)[None, :]
            af = np.take_along_axis(A2, i_fixed[None, :], axis=0)
            adj_a = A2 - w * (af / den)
            adj_d = ws.d[:, None] - w * w / den
            base = ssr2_base - (af * af / den)[0]
            gain = np.where(adj_d > ws._d_floor, adj_a * adj_a / np.maximum(adj_d, ws._d_floor), 0.0)
            ssr = base[None, :] - gain
            cf = counts[i_fixed][None, :]
            low = np.minimum(counts[:, None], cf)
            high = np.maximum(counts[:, None], cf)
            ok = (low >= m) & (high - low >= m) & (n - high >= m) & (adj_d > ws._d_floor)
            return np.where(ok, ssr, np.inf)

        ssr_double = second_stage(A, ssr0, i1)
        i2 = np.argmin(ssr_double, axis=0)
        s2 = np.take_along_axis(ssr_double, i2[None, :], axis=0)[0]
        # a replication with no admissible second split contributes F = 0
        s2 = np.where(np.isfinite(s2), s2, s1)
        if level == 2:
            s2 = np.maximum(s2, EXACT_FIT_SSR)
            return (s1 - s2) * ws.dof(3) / s2

        # level 3: rank-two update off (i1, i2) per replication
        d1 = ws.d[i1]
        d2 = ws.d[i2]
        c12 = UtU[i1, i2]
        det = np.maximum(d1 * d2 - c12 * c12, ws._d_floor**2)
        a1 = np.take_along_axis(A, i1[None, :], axis=0)[0]
        a2 = np.take_along_axis(A, i2[None, :], axis=0)[0]
        # solve the 2x2 system for the fixed-column coefficients
        alpha1 = (d2 * a1 - c12 * a2) / det
        alpha2 = (d1 * a2 - c12 * a1) / det
        w1 = UtU[:, i1]
        w2 = UtU[:, i2]
        adj_a = A - w1 * alpha1[None, :] - w2 * alpha2[None, :]
        quad = (
            d2[None, :] * w1 * w1 - 2.0 * c12[None, :] * w1 * w2 + d1[None, :] * w2 * w2
        ) / det[None, :]
        adj_d = ws.d[:, None] - quad
        base = ssr0 - (a1 * alpha1 + a2 * alpha2)
        gain = np.where(adj_d > ws._d_floor, adj_a * adj_a / np.maximum(adj_d, ws._d_floor), 0.0)
        ssr_triple = base[None, :] - gain
        cf1 = counts[i1][None, :]
        cf2 = counts[i2][None, :]
        stackc = np.stack(
            [np.broadcast_to(counts[:, None], ssr_triple.shape),
             np.broadcast_to(cf1, ssr_triple.shape),
             np.broadcast_to(cf2, ssr_triple.shape)],
            axis=0,
        )
        bounds = np.sort(stackc, axis=0)
        seg_ok = (
            (bounds[0] >= m)
            & (bounds[1] - bounds[0] >= m)
            & (bounds[2] - bounds[1] >= m)
            & (n - bounds[2] >= m)
            & (adj_d > ws._d_floor)
        )
        ssr_triple = np.where(seg_ok, ssr_triple, np.inf)
        s3 = np.take_along_axis(ssr_triple, np.argmin(ssr_triple, axis=0)[None, :], axis=0)[0]
        s3 = np.where(np.isfinite(s3), s3, s2)
        s3 = np.maximum(s3, EXACT_FIT_SSR)
        return (s2 - s3) * ws.dof(4) / s3

    # fixed block size regardless of thread count: the BLAS kernels pick
    # shape-dependent blocking, so identical block shapes are what make the
    # serial and threaded paths bit-identical
    block = 64
    ranges = [(lo, min(lo + block, reps)) for lo in range(0, reps, block)]
    if threads <= 1 or len(ranges) == 1:
        parts = [run_chunk(*rg) for rg in ranges]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda rg: run_chunk(*rg), ranges))
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


def _null_residuals(ws: _Workspace, fixed: list[int]) -> np.ndarray:
    """Within residuals of the model containing the fixed split columns."""
    if not fixed:
        return ws.r
    cols = ws.U[:, fixed]
    coef = np.linalg.solve(cols.T @ cols, cols.T @ ws.r)
    return ws.r - cols @ coef


def _test_from_f(
    level: str, f_stat: float, f_null: np.ndarray, alpha: float
) -> ThresholdTest:
    reps = int(f_null.size)
    p = float(np.mean(f_null >= f_stat)) if math.isfinite(f_stat) else 0.0
    cvs = tuple(float(v) for v in np.percentile(f_null, [90.0, 95.0, 99.0]))
    warnings = [] if reps >= 100 else ["FewBootstrapReps"]
    return ThresholdTest(
        level=level,
        f_stat=float(f_stat),
        bootstrap_p=p,
        critical_values=cvs,
        reps_used=reps,
        decision="reject" if p < alpha else "fail_to_reject",
        alpha=alpha,
        warnings=warnings,
        null_f_stats=tuple(float(v) for v in np.sort(f_null)),
    )


def bootstrap_threshold_test(
    panel: PanelDataset,
    spec: ThresholdSpec,
    level: str = "single",
    alpha: float = 0.05,
    threads: int = 1,
) -> ThresholdTest:
    """Bootstrap test for a threshold effect at the requested level.

    The null model has one fewer threshold than the alternative; its within
    residuals are resampled to build the null F distribution. Deterministic
    given (data, spec.seed).
    """
    if level not in _LEVELS:
        raise InvalidSpec(f"level must be one of {_LEVELS}, got {level!r}")
    results = fit_sequential_thresholds(
        panel, spec, max_levels=_LEVELS.index(level) + 1, alpha=alpha, threads=threads
    )
    if len(results) < _LEVELS.index(level) + 1:
        raise InvalidSpec(
            f"the {level} test requires the previous level to reject; it did not"
        )
    return results[_LEVELS.index(level)][1]


def fit_sequential_thresholds(
    panel: PanelDataset,
    spec: ThresholdSpec,
    max_levels: int = 3,
    alpha: float = 0.05,
    threads: int = 1,
) -> list[tuple[ThresholdFit, ThresholdTest]]:
    """Single, then double, then triple threshold estimation and testing.

    Each level's F statistic compares the previous level's SSR to the new
    fit's; testing stops at the first fail_to_reject (or at max_levels). After
    a second threshold is found, the first is re-estimated once with the
    second held fixed. The bootstrap for level L resamples residuals of the
    accepted (L-1)-threshold model and re-runs the full sequential search per
    replication.
    """
    if not 1 <= max_levels <= 3:
        raise InvalidSpec(f"max_levels must be 1, 2, or 3, got {max_levels}")
    ws = _Workspace(panel, spec)
    out: list[tuple[ThresholdFit, ThresholdTest]] = []

    single = _single_from_workspace(ws)
    f1 = threshold_f_stat(ws.ssr0, single.s1, single.fit)
    f1_null = _bootstrap_f(ws, 1, ws.r, spec.bootstrap_reps, spec.seed, threads)
    test1 = _test_from_f("single", f1, f1_null, alpha)
    out.append((single, test1))
    if not test1.reject or max_levels == 1:
        return out

    i1 = int(np.searchsorted(ws.candidates, single.gamma_hat))
    try:
        i2, ssr2_values, _ = ws.search([i1])
    except TooFewDistinctValues:
        # no admissible second split: the single model stands
        return out
    # one refinement pass: re-estimate the first threshold given the second
    i1r, _, _ = ws.search([i2])
    double = _make_fit(ws.st, ws.spec, (float(ws.candidates[i1r]), float(ws.candidates[i2])))
    double.gamma_hat = float(ws.candidates[i2])
    double.ssr_profile = [(float(g), float(s)) for g, s in zip(ws.candidates, ssr2_values)]
    f2 = threshold_f_stat(single.s1, double.s1, double.fit)
    resid1 = _null_residuals(ws, [i1])
    f2_null = _bootstrap_f(ws, 2, resid1, spec.bootstrap_reps, spec.seed, threads)
    test2 = _test_from_f("double", f2, f2_null, alpha)
    out.append((double, test2))
    if not test2.reject or max_levels == 2:
        return out

    pair = [int(np.searchsorted(ws.candidates, g)) for g in double.gammas]
    try:
        i3, ssr3_values, _ = ws.search(pair)
    except TooFewDistinctValues:
        return out
    triple = _make_fit(
        ws.st, ws.spec, tuple(float(ws.candidates[i]) for i in (*pair, i3))
    )
    triple.gamma_hat = float(ws.candidates[i3])
    triple.ssr_profile = [(float(g), float(s)) for g, s in zip(ws.candidates, ssr3_values)]
    f3 = threshold_f_stat(double.s1, triple.s1, triple.fit)
    resid2 = _null_residuals(ws, pair)
    f3_null = _bootstrap_f(ws, 3, resid2, spec.bootstrap_reps, spec.seed, threads)
    test3 = _test_from_f("triple", f3, f3_null, alpha)
    out.append((triple, test3))
    return out
