"""Seeded synthetic data generators with machine-readable ground truth.

Every generator draws from splittable streams keyed by (seed, entity, variable)
so generation is order-independent and reproducible across platforms. The
ground truth for each dataset is a JSON-serializable record of the true
parameters and the labels an analysis is expected to recover.

``oracle_ols`` is an independent least-squares route (normal equations solved
by hand-written Gaussian elimination in extended precision) used to cross-check
the production QR solver; it shares no code with :mod:`.regression`.
"""

from __future__ import annotations

import json
import warnings as _warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, Singular, TooShort
from .panel import PanelDataset
from .serialize import dumps

KINDS = (
    "random_walk",
    "stationary_ar",
    "cointegrated_pair",
    "threshold_panel",
    "vecm_pair",
    "two_regime_vecm",
    "eq23_panel",
)

#: burn-in length for recursion-based generators
_BURN = 20


@dataclass
class DgpSpec:
    kind: str
    n_entities: int = 10
    n_periods: int = 21
    seed: int = 0
    params: dict = field(default_factory=dict)


@dataclass
class GroundTruth:
    kind: str
    seed: int
    n_entities: int
    n_periods: int
    params: dict
    expected: dict

    def to_json(self) -> str:
        return dumps(self, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        raw = json.loads(text)
        return cls(**raw)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        return cls.from_json(Path(path).read_text())


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *key]))


def _entities(n: int) -> tuple[str, ...]:
    width = max(2, len(str(n)))
    return tuple(f"E{i + 1:0{width}d}" for i in range(n))


def _periods(t: int, start: int = 2000) -> tuple[int, ...]:
    return tuple(range(start, start + t))


def generate(spec: DgpSpec) -> tuple[PanelDataset, GroundTruth]:
    """Generate one synthetic panel plus its ground truth."""
    if spec.kind not in KINDS:
        raise InvalidSpec(f"unknown DGP kind {spec.kind!r}; expected one of {KINDS}")
    if spec.n_entities < 2 or spec.n_periods < 5:
        raise InvalidSpec("need at least 2 entities and 5 periods")
    builder = {
        "random_walk": _gen_random_walk,
        "stationary_ar": _gen_stationary_ar,
        "cointegrated_pair": _gen_cointegrated_pair,
        "threshold_panel": _gen_threshold_panel,
        "vecm_pair": _gen_vecm_pair,
        "two_regime_vecm": _gen_two_regime_vecm,
        "eq23_panel": _gen_eq23_panel,
    }[spec.kind]
    return builder(spec)


def _merge(defaults: dict, overrides: dict) -> dict:
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise InvalidSpec(f"unknown params {sorted(unknown)}; known: {sorted(defaults)}")
    merged = dict(defaults)
    merged.update(overrides)
    return merged


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _gen_random_walk(spec: DgpSpec):
    p = _merge({"sigma": 1.0, "level_sd": 1.0, "drift": 0.0, "variable": "y"}, spec.params)
    N, T = spec.n_entities, spec.n_periods
    block = np.empty((N, T))
    for i in range(N):
        rng = _stream(spec.seed, i, 0)
        level = rng.normal(0.0, p["level_sd"])
        steps = p["drift"] + rng.normal(0.0, p["sigma"], size=T)
        block[i] = level + np.cumsum(steps)
    panel = PanelDataset(_entities(N), _periods(T), (p["variable"],), block[:, :, None])
    truth = GroundTruth(spec.kind, spec.seed, N, T, p, {"integration_order": "I1"})
    return panel, truth


def _gen_stationary_ar(spec: DgpSpec):
    p = _merge({"rho": 0.5, "sigma": 1.0, "level_sd": 1.0, "variable": "y"}, spec.params)
    if not -1.0 < p["rho"] < 1.0:
        raise InvalidSpec(f"rho must be inside (-1, 1), got {p['rho']}")
    N, T = spec.n_entities, spec.n_periods
    block = np.empty((N, T))
    for i in range(N):
        rng = _stream(spec.seed, i, 0)
        level = rng.normal(0.0, p["level_sd"])
        e = rng.normal(0.0, p["sigma"], size=T + _BURN)
        u = np.zeros(T + _BURN)
        for t in range(1, T + _BURN):
            u[t] = p["rho"] * u[t - 1] + e[t]
        block[i] = level + u[_BURN:]
    panel = PanelDataset(_entities(N), _periods(T), (p["variable"],), block[:, :, None])
    truth = GroundTruth(spec.kind, spec.seed, N, T, p, {"integration_order": "I0"})
    return panel, truth


def _gen_cointegrated_pair(spec: DgpSpec):
    p = _merge(
        {"slope": 1.0, "rho_u": 0.3, "sigma_u": 0.5, "sigma_x": 1.0, "intercept_sd": 1.0},
        spec.params,
    )
    N, T = spec.n_entities, spec.n_periods
    y = np.empty((N, T))
    x = np.empty((N, T))
    for i in range(N):
        rng_x = _stream(spec.seed, i, 0)
        rng_u = _stream(spec.seed, i, 1)
        x[i] = np.cumsum(rng_x.normal(0.0, p["sigma_x"], size=T))
        e = rng_u.normal(0.0, p["sigma_u"], size=T + _BURN)
        u = np.zeros(T + _BURN)
        for t in range(1, T + _BURN):
            u[t] = p["rho_u"] * u[t - 1] + e[t]
        a_i = rng_u.normal(0.0, p["intercept_sd"])
        y[i] = a_i + p["slope"] * x[i] + u[_BURN:]
    panel = PanelDataset(
        _entities(N), _periods(T), ("y", "x"), np.stack([y, x], axis=2)
    )
    truth = GroundTruth(
        spec.kind, spec.seed, N, T, p, {"cointegrated": True, "pair": ["y", "x"]}
    )
    return panel, truth


def _snap_gamma(q: np.ndarray, nominal: float, trim: float = 0.05) -> float:
    """Nearest realized threshold value to ``nominal`` inside the trimmed ranks."""
    distinct = np.unique(q)
    lo = int(np.floor(trim * distinct.size))
    hi = distinct.size - lo
    inner = distinct[lo:hi]
    if inner.size == 0:
        raise TooShort("too few distinct threshold values to place gamma inside the support")
    return float(inner[np.argmin(np.abs(inner - nominal))])


def _gen_threshold_panel(spec: DgpSpec):
    p = _merge(
        {
            "gamma": 0.0,
            "beta_low": 1.0,
            "beta_high": 2.0,
            "sigma": 0.5,
            "x_sigma": 3.0,
            "q_halfwidth": 1.5,
            "mu_sd": 1.0,
            "n_controls": 0,
            "control_beta": 0.5,
        },
        spec.params,
    )
    N, T = spec.n_entities, spec.n_periods
    x = np.empty((N, T))
    q = np.empty((N, T))
    mu = np.empty(N)
    controls = np.empty((N, T, p["n_controls"]))
    noise = np.empty((N, T))
    for i in range(N):
        rng_x = _stream(spec.seed, i, 0)
        rng_q = _stream(spec.seed, i, 1)
        rng_e = _stream(spec.seed, i, 2)
        x[i] = rng_x.normal(0.0, p["x_sigma"], size=T)
        q[i] = rng_q.uniform(p["gamma"] - p["q_halfwidth"], p["gamma"] + p["q_halfwidth"], size=T)
        mu[i] = rng_e.normal(0.0, p["mu_sd"])
        noise[i] = rng_e.normal(0.0, 1.0, size=T)
        for c in range(p["n_controls"]):
            controls[i, :, c] = _stream(spec.seed, i, 3 + c).normal(0.0, 1.0, size=T)

    gamma_star = _snap_gamma(q, p["gamma"])
    low = q <= gamma_star
    y = mu[:, None] + np.where(low, p["beta_low"] * x, p["beta_high"] * x) + p["sigma"] * noise
    for c in range(p["n_controls"]):
        y += p["control_beta"] * controls[:, :, c]

    names = ["y", "x", "q"] + [f"c{j + 1}" for j in range(p["n_controls"])]
    blocks = [y, x, q] + [controls[:, :, j] for j in range(p["n_controls"])]
    panel = PanelDataset(_entities(N), _periods(T), tuple(names), np.stack(blocks, axis=2))
    truth = GroundTruth(
        spec.kind,
        spec.seed,
        N,
        T,
        p,
        {
            "gamma_star": gamma_star,
            "beta_low": p["beta_low"],
            "beta_high": p["beta_high"],
            "n_thresholds": 1,
        },
    )
    return panel, truth


def _gen_vecm_pair(spec: DgpSpec):
    p = _merge(
        {
            "slope": 1.0,
            "lambda_y": -0.2,
            "lambda_x": 0.0,
            "short_xy": 0.0,  # coefficient of d(x)_{t-1} in the y equation
            "short_yx": 0.0,  # coefficient of d(y)_{t-1} in the x equation
            "sigma_x": 1.0,
            "sigma_y": 1.0,
            "intercept_sd": 1.0,
        },
        spec.params,
    )
    N, T = spec.n_entities, spec.n_periods
    total = T + _BURN
    y = np.empty((N, T))
    x = np.empty((N, T))
    for i in range(N):
        e_x = _stream(spec.seed, i, 0).normal(0.0, p["sigma_x"], size=total)
        rng_y = _stream(spec.seed, i, 1)
        e_y = rng_y.normal(0.0, p["sigma_y"], size=total)
        c_i = rng_y.normal(0.0, p["intercept_sd"])
        xx = np.zeros(total)
        yy = np.zeros(total)
        xx[0] = e_x[0]
        yy[0] = c_i + p["slope"] * xx[0] + e_y[0]
        dx_prev = 0.0
        dy_prev = 0.0
        for t in range(1, total):
            z_prev = yy[t - 1] - p["slope"] * xx[t - 1] - c_i
            dx = p["short_yx"] * dy_prev + p["lambda_x"] * z_prev + e_x[t]
            dy = p["short_xy"] * dx_prev + p["lambda_y"] * z_prev + e_y[t]
            xx[t] = xx[t - 1] + dx
            yy[t] = yy[t - 1] + dy
            dx_prev, dy_prev = dx, dy
        x[i] = xx[_BURN:]
        y[i] = yy[_BURN:]

    # direction labels are positional on the pair (first slot -> second slot
    # is "x_to_y"); the pair here is (y, x), so a nonzero short_xy (the x
    # lag driving the y equation) reads positionally as "y_to_x"
    sig = 1e-9
    short = "none"
    if abs(p["short_xy"]) > sig and abs(p["short_yx"]) > sig:
        short = "bidirectional"
    elif abs(p["short_xy"]) > sig:
        short = "y_to_x"
    elif abs(p["short_yx"]) > sig:
        short = "x_to_y"
    long_run = "none"
    if p["lambda_y"] < -sig and p["lambda_x"] < -sig:
        long_run = "bidirectional"
    elif p["lambda_y"] < -sig:
        long_run = "y_to_x"
    elif p["lambda_x"] < -sig:
        long_run = "x_to_y"

    panel = PanelDataset(_entities(N), _periods(T), ("y", "x"), np.stack([y, x], axis=2))
    truth = GroundTruth(
        spec.kind,
        spec.seed,
        N,
        T,
        p,
        {
            "pair": ["y", "x"],
            "short_run_direction": short,
            "long_run_direction": long_run,
        },
    )
    return panel, truth


def _gen_two_regime_vecm(spec: DgpSpec):
    """EC/GDP pair with regime-switching adjustment plus a thresholded welfare equation.

    The long-run relation ec = mu_i + beta*gdp + z is shared by both regimes
    (beta < 0 keeps both regime stories dynamically stable with a single ECT
    orientation). In the low-GDP regime the GDP equation carries the
    significant negative loading (EC -> GDP) and EC leads GDP in the short run;
    in the high-GDP regime the EC equation carries it (GDP -> EC). Quiet
    loadings are small and positive, mirroring the near-zero cells of the
    reference structure.
    """
    p = _merge(
        {
            "gamma": 10.0,
            "beta": -1.0,
            "band_gap": 2.0,
            "band_jitter": 0.25,
            "sigma_gdp": 0.06,
            "sigma_ec": 0.06,
            "sigma_z0": 0.05,
            "lambda_gdp_low": -0.5,
            "lambda_ec_low": 0.04,
            "lambda_ec_high": -0.5,
            "lambda_gdp_high": 0.04,
            "short_low": 0.8,  # d(ec)_{t-1} in the GDP equation, low regime
            "welfare_beta_low": 1.0,
            "welfare_beta_high": 2.2,
            "welfare_sigma": 0.04,
            "welfare_mu_corr": 1.0,
            "welfare_mu_sd": 0.3,
        },
        spec.params,
    )
    N, T = spec.n_entities, spec.n_periods
    if N < 6:
        raise InvalidSpec("two_regime_vecm needs at least 6 entities (3 per regime)")
    total = T + _BURN
    n_low = N // 2

    gdp = np.empty((N, T))
    ec = np.empty((N, T))
    welfare = np.empty((N, T))
    for i in range(N):
        low_band = i < n_low
        rng_g = _stream(spec.seed, i, 0)
        rng_e = _stream(spec.seed, i, 1)
        rng_w = _stream(spec.seed, i, 2)
        e_g = rng_g.normal(0.0, p["sigma_gdp"], size=total)
        e_e = rng_e.normal(0.0, p["sigma_ec"], size=total)
        level = p["gamma"] + (-p["band_gap"] if low_band else p["band_gap"])
        level += rng_g.normal(0.0, p["band_jitter"])
        mu_ec = rng_e.normal(0.0, 0.5)

        lam_g = p["lambda_gdp_low"] if low_band else p["lambda_gdp_high"]
        lam_e = p["lambda_ec_low"] if low_band else p["lambda_ec_high"]
        short = p["short_low"] if low_band else 0.0

        g = np.zeros(total)
        c = np.zeros(total)
        g[0] = level + e_g[0]
        z = rng_e.normal(0.0, p["sigma_z0"])
        c[0] = mu_ec + p["beta"] * g[0] + z
        dec_prev = 0.0
        for t in range(1, total):
            z_prev = c[t - 1] - p["beta"] * g[t - 1] - mu_ec
            dg = short * dec_prev + lam_g * z_prev + e_g[t]
            dc = lam_e * z_prev + e_e[t]
            g[t] = g[t - 1] + dg
            c[t] = c[t - 1] + dc
            dec_prev = dc
        gdp[i] = g[_BURN:]
        ec[i] = c[_BURN:]

        mu_w = p["welfare_mu_corr"] * (level - p["gamma"]) + rng_w.normal(0.0, p["welfare_mu_sd"])
        slope = np.where(gdp[i] <= p["gamma"], p["welfare_beta_low"], p["welfare_beta_high"])
        welfare[i] = mu_w + slope * gdp[i] + rng_w.normal(0.0, p["welfare_sigma"], size=T)

    panel = PanelDataset(
        _entities(N),
        _periods(T),
        ("welfare", "gdp", "ec"),
        np.stack([welfare, gdp, ec], axis=2),
    )
    truth = GroundTruth(
        spec.kind,
        spec.seed,
        N,
        T,
        p,
        {
            "gamma_star": p["gamma"],
            "n_thresholds": 1,
            "pair": ["ec", "gdp"],
            # direction labels use pair order (ec, gdp): x = ec, y = gdp
            "low_regime": {"short_run": "x_to_y", "long_run": "x_to_y"},
            "high_regime": {"short_run": "none", "long_run": "y_to_x"},
            "panel_model": True,
            "fixed_effects": True,
        },
    )
    return panel, truth


def _gen_eq23_panel(spec: DgpSpec):
    """Welfare equation in logs with a regime-split GDP slope and six controls."""
    p = _merge(
        {
            "gamma_log": 9.29981,
            "alpha_low": 0.8,
            "alpha_high": 1.6,
            "theta": {
                "ec": 0.30,
                "cpi": -0.20,
                "urban": 0.25,
                "ggf": 0.15,
                "im": -0.10,
                "ex": 0.10,
            },
            "sigma": 0.02,
            "gdp_sigma": 0.10,
            "band_halfgap": 0.35,
            "control_sigma": 0.03,
            "mu_sd": 0.2,
        },
        spec.params,
    )
    N, T = spec.n_entities, spec.n_periods
    controls = list(p["theta"])
    n_low = N // 2

    ln_gdp = np.empty((N, T))
    ln_controls = np.empty((N, T, len(controls)))
    mu = np.empty(N)
    noise = np.empty((N, T))
    for i in range(N):
        rng_g = _stream(spec.seed, i, 0)
        level = p["gamma_log"] + (-p["band_halfgap"] if i < n_low else p["band_halfgap"])
        level += rng_g.normal(0.0, 0.05)
        ln_gdp[i] = level + np.cumsum(rng_g.normal(0.0, p["gdp_sigma"], size=T))
        for j in range(len(controls)):
            rng_c = _stream(spec.seed, i, 1 + j)
            base = rng_c.normal(2.0, 0.5)
            ln_controls[i, :, j] = base + np.cumsum(rng_c.normal(0.0, p["control_sigma"], size=T))
        rng_w = _stream(spec.seed, i, 1 + len(controls))
        mu[i] = rng_w.normal(0.0, p["mu_sd"]) + 0.5 * (level - p["gamma_log"])
        noise[i] = rng_w.normal(0.0, 1.0, size=T)

    gamma_star = _snap_gamma(ln_gdp, p["gamma_log"])
    low = ln_gdp <= gamma_star
    ln_w = mu[:, None] + np.where(low, p["alpha_low"] * ln_gdp, p["alpha_high"] * ln_gdp)
    for j, name in enumerate(controls):
        ln_w = ln_w + p["theta"][name] * ln_controls[:, :, j]
    ln_w = ln_w + p["sigma"] * noise

    names = ["welfare", "gdp"] + controls
    blocks = [np.exp(ln_w), np.exp(ln_gdp)] + [np.exp(ln_controls[:, :, j]) for j in range(len(controls))]
    panel = PanelDataset(_entities(N), _periods(T), tuple(names), np.stack(blocks, axis=2))
    truth = GroundTruth(
        spec.kind,
        spec.seed,
        N,
        T,
        p,
        {
            "gamma_star_log": gamma_star,
            "gamma_star_level": float(np.exp(gamma_star)),
            "alpha_low": p["alpha_low"],
            "alpha_high": p["alpha_high"],
            "theta": dict(p["theta"]),
            "n_thresholds": 1,
        },
    )
    return panel, truth


# ---------------------------------------------------------------------------
# independent least-squares oracle
# ---------------------------------------------------------------------------


def oracle_ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Solve least squares through the normal equations, independently of
    the production QR path.

    The cross products accumulate in extended precision and the system is
    solved by hand-written Gaussian elimination with partial pivoting.
    Intended for n <= 200, k <= 10 cross-checks.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if y.shape[0] != n:
        raise DimensionMismatch(f"X has {n} rows but y has {y.shape[0]}")
    if n <= k:
        raise TooShort(f"need more rows ({n}) than columns ({k})")

    Xl = X.astype(np.longdouble)
    yl = y.astype(np.longdouble)
    G = [[(Xl[:, i] * Xl[:, j]).sum() for j in range(k)] for i in range(k)]
    b = [(Xl[:, i] * yl).sum() for i in range(k)]

    scale = max(abs(G[i][j]) for i in range(k) for j in range(k))
    if scale == 0:
        raise Singular("all-zero design")
    tol = np.longdouble(k) * np.finfo(np.longdouble).eps * scale

    perm = list(range(k))
    for col in range(k):
        pivot_row = max(range(col, k), key=lambda r: abs(G[r][col]))
        if abs(G[pivot_row][col]) <= tol:
            raise Singular(f"normal equations singular at column {perm[col]}")
        if pivot_row != col:
            G[col], G[pivot_row] = G[pivot_row], G[col]
            b[col], b[pivot_row] = b[pivot_row], b[col]
            perm[col], perm[pivot_row] = perm[pivot_row], perm[col]
        for row in range(col + 1, k):
            factor = G[row][col] / G[col][col]
            if factor != 0.0:
                for j in range(col, k):
                    G[row][j] -= factor * G[col][j]
                b[row] -= factor * b[col]

    # normal equations square the design's conditioning, so warn early; extended
    # precision keeps the solution accurate far past this point
    if abs(G[0][0]) / abs(G[k - 1][k - 1]) > 1e9:
        _warnings.warn("oracle_ols: normal equations badly conditioned", RuntimeWarning)

    beta = [np.longdouble(0.0)] * k
    for row in range(k - 1, -1, -1):
        acc = b[row]
        for j in range(row + 1, k):
            acc -= G[row][j] * beta[j]
        beta[row] = acc / G[row][row]
    return np.array(beta, dtype=float)


def save_dataset(panel: PanelDataset, truth: GroundTruth, path: str | Path, layout: str = "wide") -> Path:
    """Write the panel CSV plus its ``.truth.json`` sidecar; returns the CSV path."""
    path = Path(path)
    text = panel.to_wide_csv() if layout == "wide" else panel.to_long_csv()
    path.write_text(text)
    truth.save(path.with_name(path.stem + ".truth.json"))
    return path
