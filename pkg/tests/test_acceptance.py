"""Acceptance gate: one test per release criterion.

Each test is self-contained (its own seeds, tolerances and wall-clock
budget) so a `pytest -v` run prints one pass/fail line per criterion.
Magnitudes come from synthetic generators with known ground truth plus the
published decision fixtures bundled with the package; nothing here depends
on the module test suites.
"""

import json
import math
import subprocess
import sys
import time
from importlib import resources

import numpy as np
import pytest

from regimescope.dgp import DgpSpec, generate, oracle_ols
from regimescope.errors import RegimeTooSmall
from regimescope.panel import PanelDataset, load_csv, within_demean
from regimescope.regression import (
    durbin_watson,
    f_limer,
    fixed_effects_fit,
    hausman,
    ols_fit,
)
from regimescope.report import (
    hausman_verdict,
    kao_verdict,
    limer_verdict,
    threshold_count_label,
    count_thresholds,
)
from regimescope.session import PipelineConfig, load_session, run_full_pipeline, save_session
from regimescope.stationarity import (
    UnitRootSpec,
    df_critical_value,
    df_test,
    kao_test,
    simulate_null_t_stats,
)
from regimescope.threshold import (
    ThresholdSpec,
    bootstrap_threshold_test,
    fit_single_threshold,
    grid_candidates,
    threshold_f_stat,
)
from regimescope.vecm import (
    EctTest,
    VecmSpec,
    WaldTest,
    causality_from_fit,
    classify_causality,
    fit_panel_vecm,
    regime_dependent_causality,
)


class Budget:
    """Asserts the enclosed block stayed under its wall-clock budget."""

    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, *exc):
        if exc[0] is None:
            elapsed = time.monotonic() - self.start
            assert elapsed < self.seconds, f"took {elapsed:.1f}s, budget {self.seconds}s"
        return False


def _tspec(**kw) -> ThresholdSpec:
    base = dict(
        dependent="y", regime_dependent_regressor="x", threshold_var="q",
        bootstrap_reps=199, seed=0,
    )
    base.update(kw)
    return ThresholdSpec(**base)


def test_c01_ols_matches_normal_equation_oracle():
    rng = np.random.default_rng(11000)
    with Budget(1.0):
        for _ in range(100):
            X = rng.normal(size=(30, 4))
            y = X @ rng.normal(size=4) + rng.normal(size=30)
            fast = ols_fit(X, y).coefficients
            slow = oracle_ols(X, y)
            assert np.all(np.abs(fast - slow) <= 1e-10 * np.maximum(1.0, np.abs(slow)))


def test_c02_noiseless_threshold_recovered_exactly():
    panel, truth = generate(DgpSpec(kind="threshold_panel", seed=4242, params={"sigma": 0.0}))
    with Budget(1.0):
        fit = fit_single_threshold(panel, _tspec())
        assert fit.gamma_hat == truth.expected["gamma_star"]
        assert fit.s1 <= 1e-18
        q = within_demean(panel, "x").ravel()
        r = within_demean(panel, "y").ravel()
        s0 = float(np.sum((r - q * (q @ r / (q @ q))) ** 2))
        assert threshold_f_stat(s0, fit.s1, fit.fit) == math.inf


def test_c03_noisy_threshold_recovered_within_one_grid_step():
    hits = 0
    with Budget(60.0):
        for seed in range(100):
            panel, truth = generate(DgpSpec(kind="threshold_panel", seed=150_000 + seed))
            spec = _tspec(seed=seed)
            fit = fit_single_threshold(panel, spec)
            cands = grid_candidates(panel, spec)
            i_star = int(np.argmin(np.abs(cands - truth.expected["gamma_star"])))
            i_hat = int(np.argmin(np.abs(cands - fit.gamma_hat)))
            hits += abs(i_hat - i_star) <= 1
    assert hits >= 90, f"within one grid step in {hits}/100 seeds"


def test_c04_unit_root_test_size_and_power():
    spec = UnitRootSpec(deterministic="intercept", lags=0)
    cv = df_critical_value(spec, 100, 0.05)
    with Budget(60.0):
        t_null = simulate_null_t_stats(100, "intercept", 0, 2000, seed=314159)
        size = float(np.mean(t_null < cv))
        assert 0.03 <= size <= 0.07, f"null rejection rate {size:.3f}"

        rng = np.random.default_rng(271828)
        rejections = 0
        for _ in range(200):
            e = rng.normal(size=120)
            y = np.empty(120)
            y[0] = e[0]
            for k in range(1, 120):
                y[k] = 0.2 * y[k - 1] + e[k]
            rejections += df_test(y[20:], spec).t < cv
        assert rejections > 180, f"stationary alternative rejected in {rejections}/200"


def test_c05_cointegration_test_size_and_power():
    with Budget(120.0):
        hits = 0
        for seed in range(200):
            panel, _ = generate(DgpSpec(kind="cointegrated_pair", seed=40_000 + seed))
            hits += kao_test(panel, "y", ["x"]).reject
        assert hits >= 180, f"cointegrated pairs detected in {hits}/200"

        rejections = 0
        for seed in range(200):
            p1, _ = generate(DgpSpec(kind="random_walk", seed=50_000 + seed))
            p2, _ = generate(
                DgpSpec(kind="random_walk", seed=90_000 + seed, params={"variable": "x"})
            )
            panel = p1.with_variables(["x"], [p2.matrix("x")])
            rejections += kao_test(panel, "y", ["x"]).reject
        assert 4 <= rejections <= 18, f"independent walks rejected in {rejections}/200"


def test_c06_bootstrap_threshold_test_holds_size():
    rejections = 0
    with Budget(600.0):
        for seed in range(200):
            panel, _ = generate(
                DgpSpec(
                    kind="threshold_panel",
                    seed=130_000 + seed,
                    params={"beta_low": 1.0, "beta_high": 1.0},
                )
            )
            spec = _tspec(seed=seed)
            rejections += bootstrap_threshold_test(panel, spec, level="single", threads=2).reject
    assert 4 <= rejections <= 18, f"equal-slope panels rejected in {rejections}/200"


def test_c07_causality_directions_recovered():
    # truth direction labels are positional on the generator's ("y", "x") pair
    pair = VecmSpec(var_pair=("y", "x"))
    with Budget(600.0):
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
            short, _ = causality_from_fit(fit_panel_vecm(panel, pair, i1_verified=True))
            good += short.direction == truth.expected["short_run_direction"]
        assert good >= 190, f"one-way short-run direction recovered in {good}/200"

        both = 0
        spec = VecmSpec(var_pair=("ec", "gdp"))
        for seed in range(100):
            panel, truth = generate(
                DgpSpec(kind="two_regime_vecm", n_periods=50, seed=240_000 + seed)
            )
            ghat = fit_single_threshold(
                panel,
                ThresholdSpec(
                    dependent="welfare",
                    regime_dependent_regressor="gdp",
                    threshold_var="gdp",
                    seed=seed,
                ),
            ).gamma_hat
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


def test_c08_algebraic_identities():
    with Budget(5.0):
        # common intercept and common entity means: pooled == within exactly
        rng = np.random.default_rng(8001)
        n, t = 10, 21
        x = rng.normal(size=(n, t))
        x -= x.mean(axis=1, keepdims=True)
        e = rng.normal(size=(n, t))
        e -= e.mean(axis=1, keepdims=True)
        y = 1.5 + 2.0 * x + e
        panel = PanelDataset(
            tuple(f"E{i:02d}" for i in range(n)),
            tuple(range(2000, 2000 + t)),
            ("y", "x"),
            np.stack([y, x], axis=2),
        )
        assert abs(f_limer(panel, "y", ["x"]).statistic) < 1e-8

        fe = fixed_effects_fit(panel, "y", ["x"])
        assert hausman(fe, fe).statistic == 0.0

        rng = np.random.default_rng(8002)
        for _ in range(1000):
            dw = durbin_watson(rng.normal(size=rng.integers(5, 60)))
            assert 0.0 <= dw <= 4.0

        panel2, _ = generate(DgpSpec(kind="random_walk", seed=8003))
        once = within_demean(panel2, "y")
        again = PanelDataset(panel2.entities, panel2.periods, ("y",), once[:, :, None])
        assert np.max(np.abs(within_demean(again, "y") - once)) < 1e-12


def test_c09_published_decision_fixtures_reproduce_labels():
    ref = json.loads(
        resources.files("regimescope")
        .joinpath("fixtures/reference_decisions.json")
        .read_text()
    )
    with Budget(1.0):
        assert limer_verdict(ref["poolability"]["p_value"]) == "panel model (fixed or random effects)"
        assert hausman_verdict(ref["hausman"]["p_value"]) == "fixed effects"
        assert kao_verdict(ref["cointegration"]["p_value"]) == "long-run link confirmed"

        def wald(rec):
            return WaldTest(rec["statistic"], rec["p_value"], rec["statistic"], 1)

        def ect(rec):
            return EctTest(
                rec["lambda"],
                math.copysign(math.sqrt(rec["f"]), rec["lambda"]),
                rec["p_value"],
                rec["f"],
            )

        def links(block, make):
            return {tuple(k.split("->")): make(v) for k, v in block["links"].items()}

        fs = ref["full_sample"]
        pair = tuple(fs["pair"])
        labels = tuple(fs["labels"])
        short, long = classify_causality(
            links(fs["short_run"], wald), links(fs["long_run"], ect), pair
        )
        assert short.arrow(labels) == fs["short_run"]["expected_arrow"] == "GDP → EC"
        assert long.direction == fs["long_run"]["expected_direction"]
        assert long.arrow(labels) == "EC → GDP"

        tt = ref["threshold_tests"]
        decisions = [
            "reject" if lv["p_value"] < tt["alpha"] else "fail_to_reject" for lv in tt["levels"]
        ]
        n = count_thresholds(decisions)
        assert n == tt["expected_count"] == 1
        assert threshold_count_label(n) == tt["expected_label"] == "single-threshold model"

        for name in ("low", "high"):
            block = ref["regimes"][name]
            short, long = classify_causality(
                links(block["short_run"], wald), links(block["long_run"], ect), pair
            )
            assert short.arrow(labels, flagged=True) == block["short_run"]["expected_arrow"]
            assert long.arrow(labels, flagged=True) == block["long_run"]["expected_arrow"]
            if long.direction_at_10 != "none":
                mark = long.significance_marks[long.direction_at_10]
                assert mark == block["long_run"]["expected_mark"]
        assert ref["regimes"]["low"]["long_run"]["expected_arrow"] == "EC → GDP"
        assert ref["regimes"]["low"]["long_run"]["expected_mark"] == "at_5"
        assert ref["regimes"]["high"]["short_run"]["expected_arrow"] == "none"
        assert ref["regimes"]["high"]["long_run"]["expected_arrow"] == "GDP → EC"
        assert ref["regimes"]["high"]["long_run"]["expected_mark"] == "at_10"


def test_c10_pipeline_runs_are_deterministic(tmp_path):
    demo = str(resources.files("regimescope").joinpath("fixtures/demo_panel.csv"))
    argv = [
        sys.executable, "-m", "regimescope.cli",
        "pipeline", "--input", demo,
        "--dependent", "welfare", "--regressor", "gdp", "--pair", "ec,gdp",
        "--seed", "7", "--json",
    ]
    first = subprocess.run(argv, capture_output=True, text=True)
    second = subprocess.run(argv, capture_output=True, text=True)
    assert first.returncode == 0, first.stderr
    assert second.returncode == 0
    assert first.stdout == second.stdout
    assert len(first.stdout) > 10_000

    panel = load_csv(demo, layout="long")
    config = PipelineConfig(
        dependent="welfare", regime_dependent_regressor="gdp", threshold_var="gdp",
        causality_pair=("ec", "gdp"), seed=7,
    )
    session, bundle = run_full_pipeline(panel, config)
    save_session(session, tmp_path, report=bundle)
    back = load_session(session.id, tmp_path)
    assert np.array_equal(back.panel.values, panel.values)
    assert back.config == config
    assert [s.to_payload() for s in back.steps] == [s.to_payload() for s in session.steps]
    assert back.current_gamma == session.current_gamma
