"""Least-squares machinery for pooled, fixed-effects and random-effects fits.

The production solver is QR with column pivoting (rank-revealing); the
normal-equations route exists only as an independent oracle in :mod:`.dgp`.
Model-selection tests (F-Limer, Hausman) and descriptive regression outputs
(Durbin-Watson, correlation matrix) live here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .errors import (
    AllZeroResiduals,
    DimensionMismatch,
    RankDeficient,
    TooShort,
    ZeroVariance,
)
from .panel import PanelDataset

#: ratio of extreme R diagonals above which a fit is flagged; set low enough
#: to fire well before double precision actually degrades
COND_WARN = 1e5


@dataclass
class FitResult:
    """One estimated linear model.

    ``dof`` is the residual degrees of freedom actually used for inference
    (within fits absorb one mean per entity). ``cov`` and ``entity_intercepts``
    are carried for downstream tests but excluded from JSON payloads.
    """

    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    residuals: np.ndarray
    durbin_watson: float
    dof: int
    estimator: str
    ssr: float
    names: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    cov: np.ndarray | None = None
    entity_intercepts: dict[str, float] | None = None

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def to_payload(self) -> dict:
        return {
            "coefficients": [float(c) for c in self.coefficients],
            "standard_errors": [float(s) for s in self.standard_errors],
            "t_stats": [float(t) for t in self.t_stats],
            "p_values": [float(p) for p in self.p_values],
            "r_squared": float(self.r_squared),
            "residuals": [float(r) for r in self.residuals],
            "durbin_watson": float(self.durbin_watson),
            "dof": int(self.dof),
            "estimator": self.estimator,
            "ssr": float(self.ssr),
            "names": list(self.names),
            "warnings": list(self.warnings),
        }


@dataclass
class TestResult:
    __test__ = False  # not a pytest class, despite the name

    name: str
    statistic: float
    p_value: float
    dof: tuple[int, ...]
    alpha: float
    decision: str
    warnings: list[str] = field(default_factory=list)

    @property
    def reject(self) -> bool:
        return self.decision == "reject"


@dataclass
class CorrelationMatrix:
    variables: list[str]
    r: np.ndarray
    p_values: np.ndarray
    n: int


def _as_design(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionMismatch(f"design must be 2-D, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    return X, y


def _solve_qr(X: np.ndarray, y: np.ndarray, names: list[str]):
    """Pivoted-QR solve returning (beta, xtx_inv, cond_flag)."""
    n, k = X.shape
    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, k) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < k:
        dropped = [names[j] for j in piv[rank:]]
        raise RankDeficient(dropped)
    beta_piv = linalg.solve_triangular(R, Q.T @ y)
    r_inv = linalg.solve_triangular(R, np.eye(k))
    xtx_inv_piv = r_inv @ r_inv.T
    beta = np.empty(k)
    beta[piv] = beta_piv
    xtx_inv = np.empty((k, k))
    xtx_inv[np.ix_(piv, piv)] = xtx_inv_piv
    ill = bool(diag[-1] > 0 and diag[0] / diag[-1] > COND_WARN)
    return beta, xtx_inv, ill


def _durbin_watson_stat(residuals: np.ndarray) -> float:
    denom = float(residuals @ residuals)
    if denom == 0.0:
        # perfect fit: no autocorrelation evidence either way
        return 2.0
    return float(np.sum(np.diff(residuals) ** 2) / denom)


def durbin_watson(residuals: np.ndarray) -> float:
    """Durbin-Watson statistic; always inside [0, 4]."""
    residuals = np.asarray(residuals, dtype=float).ravel()
    if residuals.size < 2:
        raise TooShort("Durbin-Watson needs at least 2 residuals")
    if np.all(residuals == 0.0):
        raise AllZeroResiduals("Durbin-Watson undefined for an all-zero residual vector")
    return _durbin_watson_stat(residuals)


def ols_fit(
    X: np.ndarray,
    y: np.ndarray,
    names: list[str] | None = None,
    dof: int | None = None,
    estimator: str = "ols",
) -> FitResult:
    """Ordinary least squares via rank-revealing QR.

    R-squared is centered when the design contains a constant column and
    uncentered otherwise. ``dof`` overrides the residual degrees of freedom
    (used by within-transformed fits, which absorb one mean per entity).
    """
    X, y = _as_design(X, y)
    n, k = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    if len(names) != k:
        raise DimensionMismatch(f"{k} columns but {len(names)} names")
    if n <= k:
        raise TooShort(f"need more rows ({n}) than columns ({k})")
    dof = int(dof) if dof is not None else n - k
    if dof < 1:
        raise TooShort(f"residual degrees of freedom must be positive, got {dof}")

    beta, xtx_inv, ill = _solve_qr(X, y, names)
    residuals = y - X @ beta
    ssr = float(residuals @ residuals)
    sigma2 = ssr / dof
    se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    p_values = 2.0 * stats.t.sf(np.abs(t_stats), dof)

    has_const = any(np.ptp(X[:, j]) == 0.0 and X[0, j] != 0.0 for j in range(k))
    tss = float(np.sum((y - y.mean()) ** 2)) if has_const else float(y @ y)
    if tss == 0.0:
        raise ZeroVariance("dependent variable has no variation")
    r_squared = min(max(1.0 - ssr / tss, 0.0), 1.0)

    warnings = ["ill_conditioned"] if ill else []
    return FitResult(
        coefficients=beta,
        standard_errors=se,
        t_stats=t_stats,
        p_values=p_values,
        r_squared=r_squared,
        residuals=residuals,
        durbin_watson=_durbin_watson_stat(residuals),
        dof=dof,
        estimator=estimator,
        ssr=ssr,
        names=names,
        warnings=warnings,
        cov=sigma2 * xtx_inv,
    )


def within_fit(
    y: np.ndarray,
    X: np.ndarray,
    groups: np.ndarray,
    names: list[str],
    group_labels: list[str] | None = None,
    estimator: str = "fixed_effects",
) -> FitResult:
    """Fixed-effects (within) fit on stacked rows with arbitrary group sizes.

    Rows are demeaned per group; residual dof = n - G - k with G the number of
    groups present. R-squared is the LSDV value (computed against the overall
    centered total sum of squares of the raw ``y``), which keeps pooled and
    fixed-effects fits nested for the F-Limer statistic.
    """
    X, y = _as_design(X, y)
    groups = np.asarray(groups)
    if groups.shape[0] != y.shape[0]:
        raise DimensionMismatch("groups must align with rows")
    uniq, inv = np.unique(groups, return_inverse=True)
    counts = np.bincount(inv)
    n, k = X.shape
    G = uniq.size
    dof = n - G - k
    if dof < 1:
        raise TooShort(f"within fit needs n - G - k >= 1, got {dof}")

    y_means = np.bincount(inv, weights=y) / counts
    x_means = np.vstack([np.bincount(inv, weights=X[:, j]) / counts for j in range(k)]).T
    y_dm = y - y_means[inv]
    X_dm = X - x_means[inv]

    fit = ols_fit(X_dm, y_dm, names=names, dof=dof, estimator=estimator)

    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0.0:
        raise ZeroVariance("dependent variable has no variation")
    fit.r_squared = min(max(1.0 - fit.ssr / tss, 0.0), 1.0)

    alphas = y_means - x_means @ fit.coefficients
    if group_labels is None:
        group_labels = [str(u) for u in uniq]
    fit.entity_intercepts = {lbl: float(a) for lbl, a in zip(group_labels, alphas)}
    return fit


def _stack_panel(panel: PanelDataset, y_var: str, x_vars: list[str]):
    """Stack (entity-major) rows: returns y (n,), X (n,k), groups (n,)."""
    N, T = panel.n_entities, panel.n_periods
    y = panel.matrix(y_var).ravel()
    X = np.column_stack([panel.matrix(v).ravel() for v in x_vars])
    groups = np.repeat(np.arange(N), T)
    return y, X, groups


def pooled_ols(panel: PanelDataset, y_var: str, x_vars: list[str]) -> FitResult:
    """Pooled OLS with a common intercept."""
    y, X, _ = _stack_panel(panel, y_var, x_vars)
    design = np.column_stack([np.ones(len(y)), X])
    return ols_fit(design, y, names=["const"] + list(x_vars), estimator="pooled_ols")


def fixed_effects_fit(panel: PanelDataset, y_var: str, x_vars: list[str]) -> FitResult:
    """Within estimator with recovered per-entity intercepts."""
    y, X, groups = _stack_panel(panel, y_var, x_vars)
    return within_fit(y, X, groups, names=list(x_vars), group_labels=list(panel.entities))


def random_effects_fit(panel: PanelDataset, y_var: str, x_vars: list[str]) -> FitResult:
    """Swamy-Arora feasible GLS.

    theta = 1 - sqrt(sigma_e^2 / (sigma_e^2 + T * sigma_u^2)); a negative
    entity-variance estimate is clamped to zero (flagged), which collapses the
    fit to pooled OLS.
    """
    N, T = panel.n_entities, panel.n_periods
    y, X, groups = _stack_panel(panel, y_var, x_vars)
    k = X.shape[1]
    if N <= k + 1:
        raise TooShort(f"between regression needs N > k + 1 (N={N}, k={k})")

    fe = within_fit(y, X, groups, names=list(x_vars))
    sigma_e2 = fe.ssr / fe.dof

    y_bar = y.reshape(N, T).mean(axis=1)
    x_bar = X.reshape(N, T, k).mean(axis=1)
    between = ols_fit(np.column_stack([np.ones(N), x_bar]), y_bar, names=["const"] + list(x_vars))
    sigma_between2 = between.ssr / (N - k - 1)

    warnings: list[str] = []
    sigma_u2 = sigma_between2 - sigma_e2 / T
    if sigma_u2 < 0.0:
        warnings.append("NegativeVarianceComponent: entity variance clamped to 0")
        sigma_u2 = 0.0
    theta = 1.0 - np.sqrt(sigma_e2 / (sigma_e2 + T * sigma_u2))

    y_bar_rows = np.repeat(y_bar, T)
    x_bar_rows = np.repeat(x_bar, T, axis=0)
    y_star = y - theta * y_bar_rows
    X_star = np.column_stack([np.full(len(y), 1.0 - theta), X - theta * x_bar_rows])
    fit = ols_fit(X_star, y_star, names=["const"] + list(x_vars), estimator="random_effects")
    fit.warnings.extend(warnings)
    # diagnostics beyond the fixed result schema
    fit.theta = float(theta)
    fit.sigma_e2 = float(sigma_e2)
    fit.sigma_u2 = float(sigma_u2)
    return fit


def f_limer(panel: PanelDataset, y_var: str, x_vars: list[str], alpha: float = 0.05) -> TestResult:
    """Poolability F test: pooled OLS against the fixed-effects (LSDV) model.

    F = ((R2_fe - R2_pool) / (N - 1)) / ((1 - R2_fe) / (NT - N - k)).
    Rejection says the panel structure is real (fixed or random effects).
    """
    N, T = panel.n_entities, panel.n_periods
    k = len(x_vars)
    fe = fixed_effects_fit(panel, y_var, x_vars)
    pooled = pooled_ols(panel, y_var, x_vars)
    dof1, dof2 = N - 1, N * T - N - k
    num = max(fe.r_squared - pooled.r_squared, 0.0) / dof1
    den = (1.0 - fe.r_squared) / dof2
    statistic = float("inf") if den == 0.0 else num / den
    p_value = float(stats.f.sf(statistic, dof1, dof2)) if np.isfinite(statistic) else 0.0
    decision = "reject" if p_value < alpha else "fail_to_reject"
    return TestResult("f_limer", float(statistic), p_value, (dof1, dof2), alpha, decision)


def hausman(fe: FitResult, re: FitResult, alpha: float = 0.05) -> TestResult:
    """Hausman specification test on the FE/RE coefficient contrast.

    The intercept is excluded. When the covariance contrast is not positive
    definite the Moore-Penrose inverse is used and the result is flagged.
    """
    common = [name for name in fe.names if name in re.names and name != "const"]
    if not common:
        raise DimensionMismatch("no common slope coefficients between FE and RE fits")
    fe_idx = [fe.names.index(name) for name in common]
    re_idx = [re.names.index(name) for name in common]
    q = fe.coefficients[fe_idx] - re.coefficients[re_idx]
    V = fe.cov[np.ix_(fe_idx, fe_idx)] - re.cov[np.ix_(re_idx, re_idx)]

    warnings: list[str] = []
    try:
        c, low = linalg.cho_factor(V)
        stat = float(q @ linalg.cho_solve((c, low), q))
    except np.linalg.LinAlgError:
        warnings.append("NonPositiveDefiniteContrast: pseudo-inverse used")
        stat = float(q @ np.linalg.pinv(V) @ q)
    except linalg.LinAlgError:
        warnings.append("NonPositiveDefiniteContrast: pseudo-inverse used")
        stat = float(q @ np.linalg.pinv(V) @ q)
    if stat < 0.0:
        warnings.append("statistic clamped to 0")
        stat = 0.0
    dof = len(common)
    p_value = float(stats.chi2.sf(stat, dof))
    decision = "reject" if p_value < alpha else "fail_to_reject"
    return TestResult("hausman", stat, p_value, (dof,), alpha, decision, warnings)


def correlation_matrix(panel: PanelDataset, variables: list[str]) -> CorrelationMatrix:
    """Pairwise Pearson correlations with two-sided t-based p-values."""
    data = np.column_stack([panel.matrix(v).ravel() for v in variables])
    n, m = data.shape
    if n < 3:
        raise TooShort("correlation needs at least 3 observations")
    sd = data.std(axis=0, ddof=1)
    if np.any(sd == 0.0):
        bad = variables[int(np.argmin(sd))]
        raise ZeroVariance(f"variable {bad!r} is constant")
    r = np.corrcoef(data, rowvar=False)
    r = np.clip(r, -1.0, 1.0)
    p = np.full((m, m), np.nan)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            rij = r[i, j]
            if abs(rij) >= 1.0:
                p[i, j] = 0.0
            else:
                t = rij * np.sqrt((n - 2) / (1.0 - rij**2))
                p[i, j] = 2.0 * stats.t.sf(abs(t), n - 2)
    return CorrelationMatrix(list(variables), r, p, n)
