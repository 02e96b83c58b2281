"""Command-line driver: one subcommand per pipeline stage plus the service.

Human-readable tables print to stdout by default; ``--json`` switches to the
exact serialized fragments the report bundle carries, so piping into files
yields the same bytes the HTTP facade would return. Exit codes: 0 success,
1 engine error (code printed to stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from . import report as rpt
from .dgp import DgpSpec, generate
from .errors import NotFound, RegimescopeError
from .panel import PanelDataset, descriptive_stats, load_csv, log_transform
from .regression import correlation_matrix, f_limer, fixed_effects_fit, hausman, random_effects_fit
from .serialize import dumps
from .session import (
    PipelineConfig,
    load_session,
    run_full_pipeline,
    save_session,
    what_if_threshold,
)
from .stationarity import UnitRootSpec, kao_test, panel_unit_root
from .threshold import ThresholdSpec, fit_sequential_thresholds
from .vecm import VecmSpec, causality_from_fit, fit_panel_vecm


def _default_seed() -> int:
    raw = os.environ.get("REGIMESCOPE_SEED")
    return int(raw) if raw else 0


def _default_threads() -> int:
    return os.cpu_count() or 1


def _load_panel(path: str, layout: str) -> PanelDataset:
    p = Path(path)
    if not p.exists():
        raise NotFound(f"input file {path!r} does not exist")
    return load_csv(p, layout=layout)


def _emit(args, payload: dict, human) -> None:
    if args.json:
        print(dumps(payload, indent=2))
    else:
        human()


def _print_table(table: dict) -> None:
    columns = [str(c) for c in table["columns"]]
    rows = [[("" if c is None else str(c)) for c in row] for row in table["rows"]]
    widths = [len(c) for c in columns]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    print(table["title"])
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip())
    print("  ".join("-" * w for w in widths))
    for row in rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())


def _csv_list(raw: str | None) -> tuple[str, ...]:
    if not raw:
        return ()
    return tuple(v.strip() for v in raw.split(",") if v.strip())


def _maybe_logs(panel: PanelDataset, args) -> PanelDataset:
    log_vars = _csv_list(getattr(args, "log_vars", None))
    return log_transform(panel, list(log_vars)) if log_vars else panel


def _name(args, variable: str) -> str:
    log_vars = _csv_list(getattr(args, "log_vars", None))
    return f"ln_{variable}" if variable in log_vars else variable


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_ingest(args) -> int:
    from .session import dataset_hash, panel_to_csv

    panel = _load_panel(args.input, args.layout)
    payload = {
        "entities": list(panel.entities),
        "periods": list(panel.periods),
        "variables": list(panel.variables),
        "n_entities": panel.n_entities,
        "n_periods": panel.n_periods,
        "hash": dataset_hash(panel_to_csv(panel)),
    }
    _emit(
        args,
        payload,
        lambda: print(
            f"{panel.n_entities} entities x {panel.n_periods} periods x "
            f"{len(panel.variables)} variables ({', '.join(panel.variables)})\n"
            f"content hash {payload['hash']}"
        ),
    )
    return 0


def _cmd_describe(args) -> int:
    panel = _maybe_logs(_load_panel(args.input, args.layout), args)
    variables = _csv_list(args.vars) or panel.variables
    stats = [descriptive_stats(panel, v) for v in variables]
    table = rpt.descriptives_table(stats)
    _emit(args, table, lambda: _print_table(table))
    return 0


def _cmd_unitroot(args) -> int:
    panel = _maybe_logs(_load_panel(args.input, args.layout), args)
    variables = _csv_list(args.vars) or panel.variables
    spec = UnitRootSpec(deterministic=args.deterministic, lags=args.lags, alpha=args.alpha)
    results = {v: panel_unit_root(panel, v, spec) for v in variables}
    table = rpt.unit_root_table(results)
    _emit(args, table, lambda: _print_table(table))
    return 0


def _cmd_cointegration(args) -> int:
    panel = _maybe_logs(_load_panel(args.input, args.layout), args)
    res = kao_test(
        panel,
        _name(args, args.dependent),
        [_name(args, v) for v in _csv_list(args.regressors)],
        alpha=args.alpha,
    )
    table = rpt.kao_table(res)
    _emit(args, table, lambda: _print_table(table))
    return 0


def _cmd_limer(args) -> int:
    panel = _maybe_logs(_load_panel(args.input, args.layout), args)
    res = f_limer(
        panel,
        _name(args, args.dependent),
        [_name(args, v) for v in _csv_list(args.regressors)],
        alpha=args.alpha,
    )
    table = rpt.limer_table(res)
    _emit(args, table, lambda: _print_table(table))
    return 0


def _cmd_hausman(args) -> int:
    panel = _maybe_logs(_load_panel(args.input, args.layout), args)
    dep = _name(args, args.dependent)
    xs = [_name(args, v) for v in _csv_list(args.regressors)]
    res = hausman(fixed_effects_fit(panel, dep, xs), random_effects_fit(panel, dep, xs), alpha=args.alpha)
    table = rpt.hausman_table(res)
    _emit(args, table, lambda: _print_table(table))
    return 0


def _cmd_threshold(args) -> int:
    panel = _maybe_logs(_load_panel(args.input, args.layout), args)
    spec = ThresholdSpec(
        dependent=_name(args, args.dependent),
        regime_dependent_regressor=_name(args, args.regressor),
        threshold_var=_name(args, args.threshold_var or args.regressor),
        controls=tuple(_name(args, v) for v in _csv_list(args.controls)),
        trim=args.trim,
        grid_max=args.grid_max,
        bootstrap_reps=args.reps,
        seed=args.seed,
    )
    seq = fit_sequential_thresholds(
        panel, spec, max_levels=args.max_levels, alpha=args.alpha, threads=args.threads
    )
    table = rpt.threshold_tests_table(seq)
    n = rpt.count_thresholds([t.decision for _, t in seq])
    gamma = seq[0][0].gamma_hat
    payload = {
        "table": table,
        "gamma_hat": gamma,
        "gammas": list(seq[min(n, len(seq)) - 1][0].gammas) if n else [],
        "n_thresholds": n,
    }

    def human() -> None:
        _print_table(table)
        print(f"gamma_hat: {gamma!r}")

    _emit(args, payload, human)
    return 0


def _cmd_causality(args) -> int:
    panel = _maybe_logs(_load_panel(args.input, args.layout), args)
    pair = tuple(_name(args, v) for v in _csv_list(args.pair))
    vecm = fit_panel_vecm(panel, VecmSpec(pair, lags=args.lags), i1_verified=args.i1_verified)
    short, long = causality_from_fit(vecm)
    labels = (rpt.display_label(pair[0]), rpt.display_label(pair[1]))
    table = rpt.vecm_table(short, long, labels)
    payload = {
        "table": table,
        "short_run": short.to_payload(labels),
        "long_run": long.to_payload(labels),
    }
    _emit(args, payload, lambda: _print_table(table))
    return 0


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        dependent=args.dependent,
        regime_dependent_regressor=args.regressor,
        threshold_var=args.threshold_var or args.regressor,
        causality_pair=tuple(_csv_list(args.pair)),
        controls=_csv_list(args.controls),
        log_vars=_csv_list(args.log_vars),
        deterministic=args.deterministic,
        unit_root_lags=args.lags,
        vecm_lags=args.vecm_lags,
        trim=args.trim,
        grid_max=args.grid_max,
        bootstrap_reps=args.reps,
        alpha=args.alpha,
        max_levels=args.max_levels,
        seed=args.seed,
        threads=args.threads,
    )


def _cmd_pipeline(args) -> int:
    panel = _load_panel(args.input, args.layout)
    config = _pipeline_config(args)
    session, bundle = run_full_pipeline(panel, config)
    if args.save_dir:
        save_session(session, args.save_dir, report=bundle)

    def human() -> None:
        flags = bundle.narrative_flags
        for name in rpt.TABLE_COLUMNS:
            table = bundle.tables[name]
            if table["rows"]:
                _print_table(table)
                print()
        print(f"session: {session.id}")
        if flags["stop_reason"]:
            print(f"stopped: {flags['stop_reason']}")
        if flags["gamma"] is not None:
            print(f"gamma_hat: {flags['gamma']!r} (level {flags['gamma_level']})")

    _emit(args, bundle.to_payload(), human)
    return 0


def _cmd_whatif(args) -> int:
    session = load_session(args.session, args.data_dir)
    rc, delta = what_if_threshold(session, args.gamma)
    save_session(session, args.data_dir)
    pair = tuple(session.config.analysis_name(v) for v in session.config.causality_pair)
    labels = (rpt.display_label(pair[0]), rpt.display_label(pair[1]))
    payload = {"regime_causality": rc.to_payload(labels), "delta": delta}

    def human() -> None:
        in_logs = session.config.analysis_name(session.config.threshold_var).startswith("ln_")
        _print_table(rpt.regime_causality_table(rc, labels, in_logs))
        print(f"flips: {delta['n_flips']}")
        for change in delta["direction_changes"]:
            print(f"  {change['regime']}/{change['horizon']}: {change['from']} -> {change['to']}")

    _emit(args, payload, human)
    return 0


def _cmd_synth(args) -> int:
    spec = DgpSpec(
        kind=args.kind,
        n_entities=args.entities,
        n_periods=args.periods,
        seed=args.seed,
        params=dict(kv.split("=", 1) for kv in args.param) if args.param else {},
    )
    if spec.params:
        spec.params = {k: float(v) for k, v in spec.params.items()}
    panel, truth = generate(spec)
    from .session import panel_to_csv

    out = Path(args.out)
    out.write_text(panel_to_csv(panel))
    truth_path = out.with_suffix(".truth.json")
    truth.save(truth_path)
    payload = {"csv": str(out), "truth": str(truth_path), "expected": truth.expected}
    _emit(args, payload, lambda: print(f"wrote {out} and {truth_path}"))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    ui_dir = Path(args.ui_dir) if args.ui_dir else None
    app = create_app(Path(args.data_dir), default_seed=args.seed, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_io(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="panel CSV path")
    p.add_argument("--layout", default="long", choices=("long", "wide"))
    p.add_argument("--json", action="store_true", help="machine output")
    p.add_argument("--log-vars", dest="log_vars", default="", help="comma-separated variables to log-transform")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dependent", required=True)
    p.add_argument("--regressors", required=True, help="comma-separated explanatory variables")
    p.add_argument("--alpha", type=float, default=0.05)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regimescope",
        description="Panel threshold regression and regime-dependent causality toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a panel CSV and print its shape")
    _add_io(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("describe", help="descriptive statistics")
    _add_io(p)
    p.add_argument("--vars", default="", help="comma-separated subset (default: all)")
    p.set_defaults(func=_cmd_describe)

    p = sub.add_parser("unitroot", help="panel unit root tests")
    _add_io(p)
    p.add_argument("--vars", default="")
    p.add_argument("--deterministic", default="intercept", choices=("none", "intercept", "trend"))
    p.add_argument("--lags", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=_cmd_unitroot)

    p = sub.add_parser("cointegration", help="residual cointegration test")
    _add_io(p)
    _add_model(p)
    p.set_defaults(func=_cmd_cointegration)

    p = sub.add_parser("limer", help="poolability test")
    _add_io(p)
    _add_model(p)
    p.set_defaults(func=_cmd_limer)

    p = sub.add_parser("hausman", help="fixed versus random effects")
    _add_io(p)
    _add_model(p)
    p.set_defaults(func=_cmd_hausman)

    p = sub.add_parser("threshold", help="sequential threshold tests")
    _add_io(p)
    p.add_argument("--dependent", required=True)
    p.add_argument("--regressor", required=True, help="regime-dependent regressor")
    p.add_argument("--threshold-var", dest="threshold_var", default="")
    p.add_argument("--controls", default="")
    p.add_argument("--trim", type=float, default=0.05)
    p.add_argument("--grid-max", dest="grid_max", type=int, default=400)
    p.add_argument("--reps", type=int, default=199)
    p.add_argument("--max-levels", dest="max_levels", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--threads", type=int, default=_default_threads())
    p.set_defaults(func=_cmd_threshold)

    p = sub.add_parser("causality", help="error-correction Granger causality")
    _add_io(p)
    p.add_argument("--pair", required=True, help="two comma-separated variables, ordered")
    p.add_argument("--lags", type=int, default=1)
    p.add_argument("--i1-verified", dest="i1_verified", action="store_true")
    p.set_defaults(func=_cmd_causality)

    p = sub.add_parser("pipeline", help="run every stage in order")
    _add_io(p)
    p.add_argument("--dependent", required=True)
    p.add_argument("--regressor", required=True)
    p.add_argument("--threshold-var", dest="threshold_var", default="")
    p.add_argument("--controls", default="")
    p.add_argument("--pair", required=True)
    p.add_argument("--deterministic", default="intercept", choices=("none", "intercept", "trend"))
    p.add_argument("--lags", type=int, default=1, help="unit-root lag order")
    p.add_argument("--vecm-lags", dest="vecm_lags", type=int, default=1)
    p.add_argument("--trim", type=float, default=0.05)
    p.add_argument("--grid-max", dest="grid_max", type=int, default=400)
    p.add_argument("--reps", type=int, default=199)
    p.add_argument("--max-levels", dest="max_levels", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--save-dir", dest="save_dir", default="", help="persist the session under this directory")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("whatif", help="regime causality at an alternative threshold")
    p.add_argument("--session", required=True)
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_whatif)

    p = sub.add_parser("synth", help="generate a synthetic panel with ground truth")
    p.add_argument("--kind", required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--entities", type=int, default=10)
    p.add_argument("--periods", type=int, default=21)
    p.add_argument("--out", required=True)
    p.add_argument("--param", action="append", default=[], help="DGP parameter as name=value")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(os.environ.get("REGIMESCOPE_PORT", "8080")))
    p.add_argument("--data-dir", dest="data_dir", default=os.environ.get("REGIMESCOPE_DATA_DIR", "./data"))
    p.add_argument("--ui-dir", dest="ui_dir", default="frontend/dist" if Path("frontend/dist").exists() else "")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except RegimescopeError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
