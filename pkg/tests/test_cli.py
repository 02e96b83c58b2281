"""Command-line behaviour: exit codes, JSON fragments, determinism."""

import json
from importlib import resources

import pytest

from regimescope import cli
from regimescope.report import TABLE_COLUMNS
from regimescope.session import dataset_hash

DEMO = str(resources.files("regimescope").joinpath("fixtures/demo_panel.csv"))

PIPELINE_ARGS = [
    "pipeline", "--input", DEMO,
    "--dependent", "welfare", "--regressor", "gdp", "--pair", "ec,gdp",
    "--seed", "7",
]


def run(capsys, argv):
    rc = cli.main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


class TestExitCodes:
    def test_no_arguments_is_usage_error(self, capsys):
        rc, _, err = run(capsys, [])
        assert rc == 2
        assert "usage" in err

    def test_unknown_subcommand_is_usage_error(self, capsys):
        rc, _, _ = run(capsys, ["frobnicate"])
        assert rc == 2

    def test_version_exits_cleanly(self, capsys):
        rc, out, _ = run(capsys, ["--version"])
        assert rc == 0
        assert "regimescope" in out

    def test_missing_file_is_engine_error(self, capsys):
        rc, _, err = run(capsys, ["unitroot", "--input", "no_such.csv"])
        assert rc == 1
        assert err.startswith("NotFound:")

    def test_unknown_dgp_kind_is_engine_error(self, capsys, tmp_path):
        rc, _, err = run(capsys, ["synth", "--kind", "bogus", "--out", str(tmp_path / "x.csv")])
        assert rc == 1
        assert err.startswith("InvalidSpec:")


class TestFragments:
    def test_ingest_reports_shape_and_hash(self, capsys):
        rc, out, _ = run(capsys, ["ingest", "--input", DEMO, "--json"])
        assert rc == 0
        body = json.loads(out)
        assert body["variables"] == ["welfare", "gdp", "ec"]
        assert (body["n_entities"], body["n_periods"]) == (10, 50)
        assert body["hash"] == dataset_hash(resources.files("regimescope").joinpath("fixtures/demo_panel.csv").read_text())

    def test_describe_emits_frozen_columns(self, capsys):
        rc, out, _ = run(capsys, ["describe", "--input", DEMO, "--json"])
        assert rc == 0
        body = json.loads(out)
        assert tuple(body["columns"]) == TABLE_COLUMNS["descriptives"]
        assert [r[0] for r in body["rows"]] == ["Welfare", "GDP", "EC"]

    def test_unitroot_emits_frozen_columns(self, capsys):
        rc, out, _ = run(capsys, ["unitroot", "--input", DEMO, "--json", "--vars", "gdp"])
        assert rc == 0
        body = json.loads(out)
        assert tuple(body["columns"]) == TABLE_COLUMNS["unit_root"]
        assert body["rows"][0][-1] in ("Confirmation", "Not confirmed")

    def test_causality_emits_arrows(self, capsys):
        rc, out, _ = run(capsys, [
            "causality", "--input", DEMO, "--pair", "ec,gdp", "--i1-verified", "--json",
        ])
        assert rc == 0
        body = json.loads(out)
        assert set(body) == {"table", "short_run", "long_run"}
        assert body["table"]["columns"][0] == "Horizon"
        for horizon in ("short_run", "long_run"):
            assert body[horizon]["arrow"] in ("EC → GDP", "GDP → EC", "EC ↔ GDP", "none")

    def test_human_mode_prints_aligned_table(self, capsys):
        rc, out, _ = run(capsys, ["describe", "--input", DEMO])
        assert rc == 0
        lines = out.splitlines()
        assert lines[0] == "Descriptive statistics"
        assert lines[1].split() == ["Variable", "Mean", "Std.", "Dev.", "Min.", "Max."]
        assert len(lines) >= 5


class TestThresholdCommand:
    def test_exact_split_recovered_bitwise(self, capsys, tmp_path):
        out_csv = tmp_path / "panel.csv"
        rc, out, _ = run(capsys, [
            "synth", "--kind", "threshold_panel", "--entities", "10", "--periods", "21",
            "--seed", "5", "--param", "sigma=0", "--out", str(out_csv), "--json",
        ])
        assert rc == 0
        synth = json.loads(out)
        assert out_csv.exists()
        truth = json.loads((tmp_path / "panel.truth.json").read_text())

        rc, out, _ = run(capsys, [
            "threshold", "--input", str(out_csv), "--json",
            "--dependent", "y", "--regressor", "x", "--threshold-var", "q",
            "--reps", "49", "--max-levels", "1", "--seed", "3",
        ])
        assert rc == 0
        body = json.loads(out)
        assert body["gamma_hat"] == truth["expected"]["gamma_star"] == synth["expected"]["gamma_star"]
        assert body["n_thresholds"] >= 1
        assert body["table"]["columns"] == list(TABLE_COLUMNS["threshold_tests"])


class TestPipelineCommand:
    def test_json_output_is_reproducible(self, capsys):
        outputs = []
        for threads in ("1", "2", "1"):
            rc, out, _ = run(capsys, PIPELINE_ARGS + ["--threads", threads, "--json"])
            assert rc == 0
            outputs.append(out)
        assert outputs[0] == outputs[1] == outputs[2]

    def test_save_then_identity_whatif(self, capsys, tmp_path):
        rc, out, _ = run(capsys, PIPELINE_ARGS + ["--threads", "1", "--json", "--save-dir", str(tmp_path)])
        assert rc == 0
        bundle = json.loads(out)
        gamma = bundle["narrative_flags"]["gamma"]
        session_id = next(p.name for p in tmp_path.iterdir())

        rc, out, _ = run(capsys, [
            "whatif", "--session", session_id, "--data-dir", str(tmp_path),
            "--gamma", repr(gamma), "--json",
        ])
        assert rc == 0
        body = json.loads(out)
        assert body["delta"]["n_flips"] == 0
        assert body["delta"]["direction_changes"] == []

        rc, out, _ = run(capsys, [
            "whatif", "--session", session_id, "--data-dir", str(tmp_path),
            "--gamma", repr(gamma + 0.3),
        ])
        assert rc == 0
        assert "flips:" in out


class TestEnvironmentDefaults:
    def test_seed_env_fallback(self, monkeypatch, tmp_path):
        monkeypatch.setenv("REGIMESCOPE_SEED", "123")
        args = cli.build_parser().parse_args(
            ["synth", "--kind", "random_walk", "--out", str(tmp_path / "x.csv")]
        )
        assert args.seed == 123

    def test_port_env_fallback(self, monkeypatch):
        monkeypatch.setenv("REGIMESCOPE_PORT", "9005")
        args = cli.build_parser().parse_args(["serve"])
        assert args.port == 9005
