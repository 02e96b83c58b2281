import numpy as np
import pytest

from regimescope.errors import (
    AllZeroResiduals,
    DimensionMismatch,
    RankDeficient,
    TooShort,
)
from regimescope.panel import PanelDataset
from regimescope.regression import (
    FitResult,
    correlation_matrix,
    durbin_watson,
    f_limer,
    fixed_effects_fit,
    hausman,
    ols_fit,
    pooled_ols,
    random_effects_fit,
    within_fit,
)


def build_panel(y, x_blocks, entities=None):
    """y: (N, T); x_blocks: dict name -> (N, T)."""
    names = ["y"] + list(x_blocks)
    blocks = [np.asarray(y, dtype=float)] + [np.asarray(b, dtype=float) for b in x_blocks.values()]
    n, t = blocks[0].shape
    entities = entities or tuple(f"E{i:02d}" for i in range(1, n + 1))
    return PanelDataset(entities, tuple(range(2000, 2000 + t)), tuple(names), np.stack(blocks, axis=2))


class TestOls:
    def test_exact_two_column_system(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]])
        beta_true = np.array([1.0, 2.0])
        y = X @ beta_true
        fit = ols_fit(X, y)
        np.testing.assert_allclose(fit.coefficients, beta_true, atol=1e-12)
        assert fit.ssr < 1e-24
        assert fit.r_squared == 1.0

    def test_hand_computed_line(self):
        # y on (1, x) with x = 0..3, y = 1,2,2,4; all values derived by hand
        X = np.column_stack([np.ones(4), np.arange(4.0)])
        y = np.array([1.0, 2.0, 2.0, 4.0])
        fit = ols_fit(X, y, names=["const", "x"])
        np.testing.assert_allclose(fit.coefficients, [0.9, 0.9], atol=1e-12)
        assert abs(fit.ssr - 0.7) < 1e-12
        np.testing.assert_allclose(
            fit.standard_errors, [np.sqrt(0.245), np.sqrt(0.07)], atol=1e-12
        )
        assert abs(fit.t_stats[1] - 0.9 / np.sqrt(0.07)) < 1e-12
        # two-sided t(2) tail has closed form 1 - t/sqrt(t^2+2); t^2 = 81/7
        assert abs(fit.p_values[1] - (1.0 - 9.0 / np.sqrt(95.0))) < 1e-12
        assert abs(fit.r_squared - (1.0 - 0.7 / 4.75)) < 1e-12
        assert abs(fit.durbin_watson - 2.03 / 0.7) < 1e-12
        assert fit.dof == 2

    def test_orthogonal_target_gives_zero_coefficients(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 3))
        raw = rng.normal(size=40)
        y = raw - X @ np.linalg.lstsq(X, raw, rcond=None)[0]
        fit = ols_fit(X, y)
        np.testing.assert_allclose(fit.coefficients, 0.0, atol=1e-10)

    def test_irrelevant_column_never_raises_ssr(self):
        rng = np.random.default_rng(2)
        for trial in range(25):
            n = int(rng.integers(12, 40))
            X = rng.normal(size=(n, 3))
            y = rng.normal(size=n)
            base = ols_fit(X, y).ssr
            wider = ols_fit(np.column_stack([X, rng.normal(size=n)]), y).ssr
            assert wider <= base + 1e-10

    def test_rank_deficient_names_columns(self):
        X = np.column_stack([np.ones(10), np.arange(10.0), 2.0 * np.arange(10.0)])
        with pytest.raises(RankDeficient) as exc:
            ols_fit(X, np.arange(10.0), names=["const", "a", "b"])
        assert set(exc.value.columns) & {"a", "b"}

    def test_ill_conditioned_flag_and_agreement(self):
        # Hilbert-like design: solvable but badly conditioned
        n, k = 40, 6
        t = np.arange(1, n + 1, dtype=float)
        X = np.column_stack([1.0 / (t + j) for j in range(k)])
        beta = np.array([1.0, -2.0, 3.0, -4.0, 5.0, -6.0])
        y = X @ beta
        fit = ols_fit(X, y)
        assert "ill_conditioned" in fit.warnings
        np.testing.assert_allclose(fit.coefficients, beta, rtol=1e-6, atol=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ols_fit(np.ones((5, 2)), np.ones(4))

    def test_too_few_rows(self):
        with pytest.raises(TooShort):
            ols_fit(np.ones((3, 3)), np.ones(3))


class TestDurbinWatson:
    def test_alternating_residuals(self):
        assert durbin_watson(np.array([1.0, -1.0, 1.0, -1.0])) == 3.0

    def test_all_zero(self):
        with pytest.raises(AllZeroResiduals):
            durbin_watson(np.zeros(6))

    def test_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            dw = durbin_watson(rng.normal(size=30))
            assert 0.0 <= dw <= 4.0


class TestFixedEffects:
    def test_exact_recovery_with_entity_effects(self):
        rng = np.random.default_rng(4)
        n, t = 6, 12
        x = rng.normal(size=(n, t))
        mu = rng.normal(size=n) * 5.0
        y = mu[:, None] + 2.0 * x
        panel = build_panel(y, {"x": x})
        fit = fixed_effects_fit(panel, "y", ["x"])
        np.testing.assert_allclose(fit.coefficients, [2.0], atol=1e-10)
        assert fit.r_squared == 1.0
        assert fit.dof == n * t - n - 1
        for i, e in enumerate(panel.entities):
            assert abs(fit.entity_intercepts[e] - mu[i]) < 1e-9

    def test_invariant_to_entity_constant_shifts(self):
        rng = np.random.default_rng(5)
        n, t = 5, 10
        x = rng.normal(size=(n, t))
        y = rng.normal(size=(n, t))
        base = fixed_effects_fit(build_panel(y, {"x": x}), "y", ["x"])
        shifted = fixed_effects_fit(
            build_panel(y + np.arange(n)[:, None] * 40.0, {"x": x}), "y", ["x"]
        )
        np.testing.assert_allclose(shifted.coefficients, base.coefficients, atol=1e-9)
        np.testing.assert_allclose(shifted.ssr, base.ssr, atol=1e-7)

    def test_nesting_of_r_squared(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            n, t = 5, 8
            x = rng.normal(size=(n, t))
            y = rng.normal(size=(n, t)) + rng.normal(size=(n, 1))
            panel = build_panel(y, {"x": x})
            fe = fixed_effects_fit(panel, "y", ["x"])
            pooled = pooled_ols(panel, "y", ["x"])
            assert fe.r_squared >= pooled.r_squared - 1e-12
            assert 0.0 <= pooled.r_squared <= fe.r_squared <= 1.0

    def test_grouped_unbalanced_within(self):
        # two groups of different sizes; slope recovered exactly without noise
        y_rows = np.array([1.0, 2.0, 3.0, 11.0, 13.0])
        x_rows = np.array([[0.0], [1.0], [2.0], [0.0], [2.0]])
        groups = np.array([0, 0, 0, 1, 1])
        fit = within_fit(y_rows, x_rows, groups, names=["x"])
        np.testing.assert_allclose(fit.coefficients, [1.0], atol=1e-12)
        assert fit.entity_intercepts["0"] == pytest.approx(1.0)
        assert fit.entity_intercepts["1"] == pytest.approx(11.0)


class TestRandomEffects:
    @staticmethod
    def gls_oracle(panel, y_var, x_vars):
        """Explicit per-entity GLS with Swamy-Arora variance components."""
        from regimescope.regression import _stack_panel

        N, T = panel.n_entities, panel.n_periods
        y, X, groups = _stack_panel(panel, y_var, x_vars)
        k = X.shape[1]
        fe = fixed_effects_fit(panel, y_var, x_vars)
        sigma_e2 = fe.ssr / fe.dof
        y_bar = y.reshape(N, T).mean(axis=1)
        x_bar = X.reshape(N, T, k).mean(axis=1)
        between = ols_fit(np.column_stack([np.ones(N), x_bar]), y_bar)
        sigma_u2 = max(between.ssr / (N - k - 1) - sigma_e2 / T, 0.0)

        omega_inv = (1.0 / sigma_e2) * (
            np.eye(T) - (sigma_u2 / (sigma_e2 + T * sigma_u2)) * np.ones((T, T))
        )
        Z = np.column_stack([np.ones(N * T), X])
        A = np.zeros((k + 1, k + 1))
        b = np.zeros(k + 1)
        for i in range(N):
            Zi = Z[i * T : (i + 1) * T]
            yi = y[i * T : (i + 1) * T]
            A += Zi.T @ omega_inv @ Zi
            b += Zi.T @ omega_inv @ yi
        return np.linalg.solve(A, b)

    def test_matches_explicit_gls(self):
        rng = np.random.default_rng(7)
        n, t = 6, 10  # N*T = 60
        x = rng.normal(size=(n, t))
        u = rng.normal(size=n) * 1.5
        y = 1.0 + u[:, None] + 0.7 * x + rng.normal(size=(n, t)) * 0.5
        panel = build_panel(y, {"x": x})
        fit = random_effects_fit(panel, "y", ["x"])
        oracle = self.gls_oracle(panel, "y", ["x"])
        np.testing.assert_allclose(fit.coefficients, oracle, atol=1e-8)

    def test_zero_entity_variance_collapses_to_pooled(self):
        rng = np.random.default_rng(8)
        n, t = 6, 10
        x = rng.normal(size=(n, t))
        e = rng.normal(size=(n, t))
        e -= e.mean(axis=1, keepdims=True)  # exact zero entity means
        y = 1.0 + 2.0 * x
        y = y + e - (x - x.mean(axis=1, keepdims=True)) * 0.0
        # force exact between-fit: responses at entity means lie on the line
        panel = build_panel(y + 0.0, {"x": x})
        fit = random_effects_fit(panel, "y", ["x"])
        pooled = pooled_ols(panel, "y", ["x"])
        assert fit.theta == 0.0
        assert any("NegativeVarianceComponent" in w for w in fit.warnings) or fit.sigma_u2 == 0.0
        np.testing.assert_allclose(fit.coefficients, pooled.coefficients, atol=1e-10)

    def test_huge_entity_variance_approaches_fe(self):
        rng = np.random.default_rng(9)
        n, t = 8, 12
        x = rng.normal(size=(n, t))
        u = rng.normal(size=n) * 1e6
        y = u[:, None] + 0.5 * x + rng.normal(size=(n, t)) * 0.1
        panel = build_panel(y, {"x": x})
        re = random_effects_fit(panel, "y", ["x"])
        fe = fixed_effects_fit(panel, "y", ["x"])
        assert re.theta > 0.999999
        assert abs(re.coef("x") - fe.coef("x")) < 1e-6


class TestModelSelection:
    def test_f_limer_detects_entity_effects(self):
        rng = np.random.default_rng(10)
        n, t = 10, 21
        x = rng.normal(size=(n, t))
        y = rng.normal(size=n)[:, None] * 4.0 + 1.5 * x + rng.normal(size=(n, t)) * 0.5
        result = f_limer(build_panel(y, {"x": x}), "y", ["x"])
        assert result.decision == "reject"
        assert result.dof == (n - 1, n * t - n - 1)
        assert result.p_value < 1e-6

    def test_f_limer_accepts_pooled_when_no_effects(self):
        rng = np.random.default_rng(11)
        rejections = 0
        for seed in range(40):
            r = np.random.default_rng(1000 + seed)
            x = r.normal(size=(8, 15))
            y = 1.0 + 0.5 * x + r.normal(size=(8, 15))
            if f_limer(build_panel(y, {"x": x}), "y", ["x"]).reject:
                rejections += 1
        assert rejections <= 8  # near-nominal false positive rate

    def test_hausman_power_under_correlated_effects(self):
        # regressor correlated with the entity effect: RE is inconsistent
        rejected = 0
        seeds = range(200)
        for seed in seeds:
            rng = np.random.default_rng(30000 + seed)
            n, t = 10, 21
            mu = rng.normal(size=n) * 2.0
            x = mu[:, None] + rng.normal(size=(n, t))
            y = mu[:, None] + 1.0 * x + rng.normal(size=(n, t)) * 2.0
            panel = build_panel(y, {"x": x})
            fe = fixed_effects_fit(panel, "y", ["x"])
            re = random_effects_fit(panel, "y", ["x"])
            if hausman(fe, re).reject:
                rejected += 1
        assert rejected > 0.90 * len(list(seeds))

    def test_hausman_pseudo_inverse_fallback(self):
        fe = FitResult(
            coefficients=np.array([1.0, 2.0]),
            standard_errors=np.ones(2),
            t_stats=np.ones(2),
            p_values=np.ones(2),
            r_squared=0.5,
            residuals=np.zeros(4),
            durbin_watson=2.0,
            dof=2,
            estimator="fixed_effects",
            ssr=1.0,
            names=["a", "b"],
            cov=np.diag([1.0, 1.0]),
        )
        re = FitResult(
            coefficients=np.array([0.0, 1.1, 2.2]),
            standard_errors=np.ones(3),
            t_stats=np.ones(3),
            p_values=np.ones(3),
            r_squared=0.5,
            residuals=np.zeros(4),
            durbin_watson=2.0,
            dof=2,
            estimator="random_effects",
            ssr=1.0,
            names=["const", "a", "b"],
            cov=np.diag([1.0, 2.0, 2.0]),  # contrast is negative definite
        )
        result = hausman(fe, re)
        assert any("NonPositiveDefiniteContrast" in w for w in result.warnings)
        assert result.statistic >= 0.0


class TestCorrelation:
    def test_perfect_correlation(self):
        x = np.linspace(0.0, 1.0, 12).reshape(3, 4)
        panel = build_panel(x, {"x": 2.0 * x + 1.0})
        corr = correlation_matrix(panel, ["y", "x"])
        assert abs(corr.r[0, 1] - 1.0) < 1e-12
        assert corr.p_values[0, 1] == 0.0
        assert np.isnan(corr.p_values[0, 0])

    def test_independent_series_mostly_uncorrelated(self):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(40000 + seed)
            panel = build_panel(rng.normal(size=(10, 21)), {"x": rng.normal(size=(10, 21))})
            corr = correlation_matrix(panel, ["y", "x"])
            if abs(corr.r[0, 1]) < 0.2:
                hits += 1
        assert hits >= 95
