"""Error-correction causality: residual alignment, Wald direction tests,
classification, and regime-split reruns. Monte Carlo bars are pinned to the
frozen seed bases they were measured on."""

import numpy as np
import pytest

from regimescope.dgp import DgpSpec, generate
from regimescope.errors import InvalidSpec, RegimeTooSmall, UnknownEquation
from regimescope.panel import PanelDataset
from regimescope.regression import FitResult
from regimescope.stationarity import UnitRootSpec, panel_unit_root
from regimescope.threshold import ThresholdSpec, fit_single_threshold
from regimescope.vecm import (
    CausalityResult,
    EctTest,
    EquationFit,
    VecmFit,
    VecmSpec,
    WaldTest,
    causality_from_fit,
    classify_causality,
    fit_panel_vecm,
    long_run_residuals,
    regime_dependent_causality,
    wald_short_run,
)

PAIR = VecmSpec(var_pair=("y", "x"))


class TestVecmSpec:
    def test_pair_must_be_distinct(self):
        with pytest.raises(InvalidSpec):
            VecmSpec(var_pair=("y", "y"))

    def test_lag_bounds(self):
        with pytest.raises(InvalidSpec):
            VecmSpec(var_pair=("y", "x"), lags=0)
        with pytest.raises(InvalidSpec):
            VecmSpec(var_pair=("y", "x"), lags=5)

    def test_alpha_ordering(self):
        with pytest.raises(InvalidSpec):
            VecmSpec(var_pair=("y", "x"), alpha_levels=(0.10, 0.05))

    def test_lags_limited_by_periods(self):
        panel, _ = generate(DgpSpec(kind="vecm_pair", n_periods=9, seed=1))
        with pytest.raises(InvalidSpec):
            fit_panel_vecm(panel, VecmSpec(var_pair=("y", "x"), lags=4))


class TestLongRunResiduals:
    def test_exact_relation_leaves_nothing(self):
        rng = np.random.default_rng(1)
        n, t = 5, 12
        x = rng.normal(size=(n, t)).cumsum(axis=1)
        y = rng.normal(size=(n, 1)) * 3 + 2.0 * x
        panel = PanelDataset(
            tuple(f"E{i}" for i in range(n)),
            tuple(range(2000, 2000 + t)),
            ("y", "x"),
            np.stack([y, x], axis=2),
        )
        e = long_run_residuals(panel, "y", "x")
        assert e.shape == (n, t)
        assert np.abs(e).max() < 1e-10

    def test_residuals_are_stationary_under_cointegration(self):
        rej = 0
        for seed in range(200):
            panel, _ = generate(DgpSpec(kind="cointegrated_pair", seed=250_000 + seed))
            e = long_run_residuals(panel, "y", "x")
            rp = PanelDataset(panel.entities, panel.periods, ("resid",), e[:, :, None])
            rej += panel_unit_root(rp, "resid", UnitRootSpec()).level.reject
        assert rej >= 180, f"residual unit root rejected in {rej}/200"


class TestFitPanelVecm:
    def test_row_alignment(self):
        panel, _ = generate(DgpSpec(kind="vecm_pair", seed=3))
        fit = fit_panel_vecm(panel, PAIR, i1_verified=True)
        assert fit.n_rows == 10 * 19
        assert fit.ect_series.shape == (190,)
        for eq in fit.equations.values():
            assert eq.fit.residuals.shape == (190,)

    def test_deeper_lags_shrink_rows(self):
        panel, _ = generate(DgpSpec(kind="vecm_pair", seed=3))
        fit = fit_panel_vecm(panel, VecmSpec(var_pair=("y", "x"), lags=2), i1_verified=True)
        assert fit.n_rows == 10 * 18
        assert fit.equations["y"].fit.names == [
            "d_y_lag1",
            "d_y_lag2",
            "d_x_lag1",
            "d_x_lag2",
            "ect_lag1",
        ]

    def test_ect_f_is_squared_t(self):
        panel, _ = generate(DgpSpec(kind="vecm_pair", seed=3))
        fit = fit_panel_vecm(panel, PAIR, i1_verified=True)
        for eq in fit.equations.values():
            assert abs(eq.ect_f - eq.ect_t_stat**2) < 1e-9
            assert 0.0 <= eq.ect_p <= 1.0

    def test_integration_warning_toggle(self):
        panel, _ = generate(DgpSpec(kind="vecm_pair", seed=3))
        assert "IntegrationOrderUnverified" in fit_panel_vecm(panel, PAIR).warnings
        assert fit_panel_vecm(panel, PAIR, i1_verified=True).warnings == []

    def test_adjustment_coefficient_coverage(self):
        # loading -0.2 in the first equation, none in the second; T=100 keeps
        # the cointegrating slope tight enough for clean coverage
        cover = insig = 0
        for seed in range(200):
            panel, _ = generate(
                DgpSpec(kind="vecm_pair", n_periods=100, seed=200_000 + seed)
            )
            fit = fit_panel_vecm(panel, PAIR, i1_verified=True)
            eq_y, eq_x = fit.equations["y"], fit.equations["x"]
            cover += abs(eq_y.ect_coefficient - (-0.2)) <= 3.0 * eq_y.fit.standard_errors[2]
            insig += eq_x.ect_p > 0.05
        assert cover >= 198, f"lambda within 3 SEs in {cover}/200"
        assert insig >= 170, f"quiet equation insignificant in {insig}/200"


def _hand_fit(coefs, cov, names):
    k = len(coefs)
    return FitResult(
        coefficients=np.asarray(coefs, dtype=float),
        standard_errors=np.sqrt(np.diag(cov)),
        t_stats=np.zeros(k),
        p_values=np.ones(k),
        r_squared=0.0,
        residuals=np.zeros(4),
        durbin_watson=2.0,
        dof=10,
        estimator="fixed_effects",
        ssr=1.0,
        names=list(names),
        cov=np.asarray(cov, dtype=float),
    )


def _hand_vecm(cross_coef: float) -> VecmFit:
    spec = VecmSpec(var_pair=("y", "x"))
    names = ["d_y_lag1", "d_x_lag1", "ect_lag1"]
    eq = EquationFit(
        dependent="y",
        fit=_hand_fit([0.5, cross_coef, -0.2], np.eye(3), names),
        ect_coefficient=-0.2,
        ect_t_stat=-2.0,
        ect_p=0.05,
        ect_f=4.0,
        cross_lag_indices=(1,),
    )
    eq_x = EquationFit(
        dependent="x",
        fit=_hand_fit([0.1, 0.0, 0.0], np.eye(3), ["d_x_lag1", "d_y_lag1", "ect_lag1"]),
        ect_coefficient=0.0,
        ect_t_stat=0.0,
        ect_p=1.0,
        ect_f=0.0,
        cross_lag_indices=(1,),
    )
    return VecmFit(
        spec=spec,
        equations={"y": eq, "x": eq_x},
        ect_series=np.zeros(4),
        cointegrating_slope=1.0,
        n_rows=4,
    )


class TestWaldShortRun:
    def test_zero_block_gives_zero_statistic(self):
        fit = _hand_vecm(0.0)
        w = wald_short_run(fit, "x", "y")
        assert w.statistic == 0.0
        assert w.p_value == 1.0
        assert w.dof == 1

    def test_unit_covariance_matches_square(self):
        fit = _hand_vecm(1.5)
        w = wald_short_run(fit, "x", "y")
        assert abs(w.statistic - 1.5**2) < 1e-12
        assert abs(w.f_form - w.statistic) < 1e-12

    def test_unknown_equation(self):
        panel, _ = generate(DgpSpec(kind="vecm_pair", seed=9))
        fit = fit_panel_vecm(panel, PAIR, i1_verified=True)
        with pytest.raises(UnknownEquation):
            wald_short_run(fit, "y", "y")
        with pytest.raises(UnknownEquation):
            wald_short_run(fit, "x", "volume")

    def test_invariant_to_cause_rescaling(self):
        panel, _ = generate(DgpSpec(kind="vecm_pair", seed=9, params={"short_xy": 0.6}))
        fit = fit_panel_vecm(panel, PAIR, i1_verified=True)
        w1 = wald_short_run(fit, "x", "y")
        vals = panel.values.copy()
        vals[:, :, 1] *= 13.0
        scaled = PanelDataset(panel.entities, panel.periods, panel.variables, vals)
        w2 = wald_short_run(fit_panel_vecm(scaled, PAIR, i1_verified=True), "x", "y")
        assert abs(w1.statistic - w2.statistic) < 1e-8

    def test_power(self):
        rej = 0
        for seed in range(200):
            panel, _ = generate(
                DgpSpec(kind="vecm_pair", seed=210_000 + seed, params={"short_xy": 0.6})
            )
            fit = fit_panel_vecm(panel, PAIR, i1_verified=True)
            rej += wald_short_run(fit, "x", "y").p_value < 0.05
        assert rej >= 190, f"rejected {rej}/200 under a 0.6 cross loading"

    def test_size(self):
        rej_xy = rej_yx = 0
        for seed in range(200):
            panel, _ = generate(DgpSpec(kind="vecm_pair", seed=220_000 + seed))
            fit = fit_panel_vecm(panel, PAIR, i1_verified=True)
            rej_xy += wald_short_run(fit, "x", "y").p_value < 0.05
            rej_yx += wald_short_run(fit, "y", "x").p_value < 0.05
        assert 4 <= rej_xy <= 18, f"x->y rejected {rej_xy}/200 under the null"
        assert 4 <= rej_yx <= 18, f"y->x rejected {rej_yx}/200 under the null"


def _short(p_xy: float, p_yx: float) -> dict:
    return {
        ("a", "b"): WaldTest(statistic=1.0, p_value=p_xy, f_form=1.0, dof=1),
        ("b", "a"): WaldTest(statistic=1.0, p_value=p_yx, f_form=1.0, dof=1),
    }


def _long(lam_xy: float, p_xy: float, lam_yx: float, p_yx: float) -> dict:
    return {
        ("a", "b"): EctTest(lam_xy, -1.0, p_xy, 1.0),
        ("b", "a"): EctTest(lam_yx, -1.0, p_yx, 1.0),
    }


def _mark_for(p: float) -> str:
    return "at_5" if p < 0.05 else "at_10" if p < 0.10 else "none"


class TestClassifyCausality:
    def test_all_sixteen_short_run_combinations(self):
        grid = (0.01, 0.07, 0.20, 0.90)
        for p_xy in grid:
            for p_yx in grid:
                short, _ = classify_causality(
                    _short(p_xy, p_yx), _long(-1.0, 0.9, -1.0, 0.9), ("a", "b")
                )
                m_xy, m_yx = _mark_for(p_xy), _mark_for(p_yx)
                assert short.significance_marks == {"x_to_y": m_xy, "y_to_x": m_yx}

                hit5 = (p_xy < 0.05, p_yx < 0.05)
                hit10 = (p_xy < 0.10, p_yx < 0.10)
                for hits, got in ((hit5, short.direction), (hit10, short.direction_at_10)):
                    want = {
                        (True, True): "bidirectional",
                        (True, False): "x_to_y",
                        (False, True): "y_to_x",
                        (False, False): "none",
                    }[hits]
                    assert got == want, (p_xy, p_yx, got, want)

    def test_long_run_requires_negative_loading(self):
        _, long = classify_causality(
            _short(0.9, 0.9), _long(0.3, 0.01, -0.2, 0.9), ("a", "b")
        )
        assert long.direction == "none"
        assert long.significance_marks["x_to_y"] == "none"
        assert any("divergent" in n for n in long.notes)

    def test_missing_link_rejected(self):
        with pytest.raises(InvalidSpec):
            classify_causality(
                {("a", "b"): WaldTest(1.0, 0.5, 1.0, 1)},
                _long(-1.0, 0.9, -1.0, 0.9),
                ("a", "b"),
            )

    def test_short_run_fixture(self):
        # one-way short-run: 0.0032 against 0.3403
        short, _ = classify_causality(
            _short(0.0032, 0.3403),
            _long(-1.0, 0.9, -1.0, 0.9),
            ("a", "b"),
        )
        assert short.direction == "x_to_y"
        assert short.arrow(("GDP", "EC")) == "GDP → EC"
        assert short.significance_marks["x_to_y"] == "at_5"

    def test_long_run_fixture_at_five_percent(self):
        # adjustment in the second equation at 5%: first-slot variable leads
        _, long = classify_causality(
            _short(0.9, 0.9),
            _long(-0.0127, 0.0327, 0.0273, 0.2746),
            ("a", "b"),
        )
        assert long.direction == "x_to_y"
        assert long.direction_at_10 == "x_to_y"
        assert long.significance_marks == {"x_to_y": "at_5", "y_to_x": "none"}
        assert long.arrow(("EC", "GDP")) == "EC → GDP"

    def test_long_run_fixture_at_ten_percent_only(self):
        # 0.0675 clears only the looser level: flagged direction, primary none
        _, long = classify_causality(
            _short(0.9, 0.9),
            _long(-0.0534, 0.1852, -0.1638, 0.0675),
            ("a", "b"),
        )
        assert long.direction == "none"
        assert long.direction_at_10 == "y_to_x"
        assert long.significance_marks == {"x_to_y": "none", "y_to_x": "at_10"}
        assert long.arrow(("EC", "GDP"), flagged=True) == "GDP → EC"

    def test_payload_carries_both_arrows(self):
        short, long = classify_causality(
            _short(0.01, 0.9), _long(-0.2, 0.01, -0.1, 0.9), ("a", "b")
        )
        payload = short.to_payload(("EC", "GDP"))
        assert payload["arrow"] == "EC → GDP"
        assert payload["direction"] == "x_to_y"
        assert set(payload["wald_stats"]) == {"x_to_y", "y_to_x"}


class TestDirectionRecovery:
    def test_one_way_short_run(self):
        good = 0
        for seed in range(200):
            panel, truth = generate(
                DgpSpec(
                    kind="vecm_pair",
                    n_periods=50,
                    seed=230_000 + seed,
                    params={"short_xy": 0.6, "lambda_y": -0.5},
                )
            )
            fit = fit_panel_vecm(panel, PAIR, i1_verified=True)
            short, _ = causality_from_fit(fit)
            good += short.direction == truth.expected["short_run_direction"]
        assert good >= 190, f"one-way short-run direction recovered in {good}/200"

    def test_long_run_direction_on_defaults(self):
        panel, truth = generate(DgpSpec(kind="vecm_pair", seed=3))
        _, long = causality_from_fit(fit_panel_vecm(panel, PAIR, i1_verified=True))
        assert long.direction == truth.expected["long_run_direction"]


def _banded_regime_panel():
    """Pair panel plus a regime variable that is low for the first three
    entities' first ten periods only."""
    panel, _ = generate(DgpSpec(kind="vecm_pair", seed=55))
    n, t = 10, 21
    q = np.ones((n, t))
    q[:3, :10] = -1.0
    return panel.with_variables(["q"], [q])


class TestRegimeDependentCausality:
    def test_gamma_outside_support(self):
        panel, _ = generate(DgpSpec(kind="two_regime_vecm", n_periods=50, seed=240_000))
        spec = VecmSpec(var_pair=("ec", "gdp"))
        with pytest.raises(RegimeTooSmall) as exc:
            regime_dependent_causality(panel, spec, -1e9, "gdp", i1_verified=True)
        assert exc.value.regime == "low"

    def test_small_regime_warns_and_reports_straddles(self):
        panel = _banded_regime_panel()
        rc = regime_dependent_causality(panel, PAIR, 0.0, "q", i1_verified=True)
        # 3 entities with 8 clean low rows each, 2 straddle rows per entity
        assert rc.low_fit.n_rows == 24
        assert rc.dropped_rows == 6
        assert rc.regime_sizes == (30, 180)
        assert any("low regime has 24 usable rows" in w for w in rc.warnings)

    def test_sizes_partition_all_cells(self):
        panel, truth = generate(DgpSpec(kind="two_regime_vecm", n_periods=50, seed=240_000))
        spec = VecmSpec(var_pair=("ec", "gdp"))
        rc = regime_dependent_causality(
            panel, spec, truth.expected["gamma_star"], "gdp", i1_verified=True
        )
        assert sum(rc.regime_sizes) == 10 * 50
        assert rc.dropped_rows >= 0

    def test_moving_gamma_flips_exactly_the_cells_between(self):
        panel, truth = generate(DgpSpec(kind="two_regime_vecm", n_periods=50, seed=240_001))
        spec = VecmSpec(var_pair=("ec", "gdp"))
        g1 = truth.expected["gamma_star"]
        q = panel.matrix("gdp")
        g2 = g1 + 0.8
        between = int(((q > g1) & (q <= g2)).sum())
        rc1 = regime_dependent_causality(panel, spec, g1, "gdp", i1_verified=True)
        rc2 = regime_dependent_causality(panel, spec, g2, "gdp", i1_verified=True)
        assert rc2.regime_sizes[0] - rc1.regime_sizes[0] == between

    def test_two_regime_end_to_end(self):
        # estimated threshold feeds the regime split; both regimes' long-run
        # verdicts must match the generating structure
        both = 0
        spec = VecmSpec(var_pair=("ec", "gdp"))
        for seed in range(100):
            panel, truth = generate(
                DgpSpec(kind="two_regime_vecm", n_periods=50, seed=240_000 + seed)
            )
            tspec = ThresholdSpec(
                dependent="welfare",
                regime_dependent_regressor="gdp",
                threshold_var="gdp",
                seed=seed,
            )
            ghat = fit_single_threshold(panel, tspec).gamma_hat
            try:
                rc = regime_dependent_causality(panel, spec, ghat, "gdp", i1_verified=True)
            except RegimeTooSmall:
                continue
            exp = truth.expected
            both += (
                rc.low[1].direction == exp["low_regime"]["long_run"]
                and rc.high[1].direction == exp["high_regime"]["long_run"]
            )
        assert both >= 85, f"both regime verdicts recovered in {both}/100"

    def test_payload_shape(self):
        panel, truth = generate(DgpSpec(kind="two_regime_vecm", n_periods=50, seed=240_000))
        spec = VecmSpec(var_pair=("ec", "gdp"))
        rc = regime_dependent_causality(
            panel, spec, truth.expected["gamma_star"], "gdp", i1_verified=True
        )
        payload = rc.to_payload(("EC", "GDP"))
        assert set(payload["low"]) == {"short_run", "long_run", "vecm"}
        assert payload["low"]["long_run"]["arrow"] in {
            "EC → GDP",
            "GDP → EC",
            "EC ↔ GDP",
            "none",
        }
