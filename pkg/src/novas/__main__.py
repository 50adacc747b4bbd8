#!/usr/bin/env python3
"""Main entry point for the novas CLI."""

import argparse
import logging
import os
import sys
from importlib.metadata import version
from typing import Any, Dict, Optional

from .config import ExperimentConfig
from .csvio import (
    read_forecast_pairs,
    read_series,
    write_frame,
    write_manifest,
    write_prices_csv,
    write_returns_csv,
)
from .errors import ConfigError
from .evaluate import (
    SelectionScope,
    cw_frame,
    cw_test,
    evaluate,
    forecasts_frame,
    format_table,
    report_frame,
)
from .garch import fit_garch11
from .predict import FixedVariant, InnovationMode, RiskCriterion, forecast_best_of
from .series import PriceSeries, ReturnSeries, to_log_returns
from .simulate import SimMode, as_percent_returns, generate, prices_from_returns
from .transform import CalibrationGrids, MethodKind, calibrate, diagnose

logger = logging.getLogger(__name__)

GARCH_KIND = "garch"


class _ColorFormatter(logging.Formatter):
    """Logging formatter that colorizes the level name using ANSI codes."""

    COLORS = {
        logging.DEBUG: "\033[2m",  # dim
        logging.INFO: "\033[32m",  # green
        logging.WARNING: "\033[33m",  # yellow
        logging.ERROR: "\033[31m",  # red
        logging.CRITICAL: "\033[1;31m",  # bold red
    }
    RESET = "\033[0m"

    def format(self, record):
        color = self.COLORS.get(record.levelno, "")
        record.levelname = f"{color}{record.levelname}{self.RESET}"
        return super().format(record)


def _configure_logging(verbose: bool, quiet: bool) -> None:
    """Configure logging based on CLI flags and LOG_LEVEL environment variable."""
    level_name = os.environ.get("LOG_LEVEL", "").upper()
    if level_name and hasattr(logging, level_name):
        level = getattr(logging, level_name)
    elif quiet:
        level = logging.WARNING
    elif verbose:
        level = logging.DEBUG
    else:
        level = logging.INFO

    handler = logging.StreamHandler(sys.stderr)
    fmt = "%(levelname)s: %(message)s"
    if sys.stderr.isatty():
        handler.setFormatter(_ColorFormatter(fmt))
    else:
        handler.setFormatter(logging.Formatter(fmt))

    root = logging.getLogger()
    root.setLevel(level)
    root.addHandler(handler)


def _csv_list(text: str) -> list:
    return [part.strip() for part in text.split(",") if part.strip()]


def _build_config(args) -> ExperimentConfig:
    """Defaults, then the config file, then --fast, then explicit CLI flags."""
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if args.fast:
        config = config.fast()
    overrides: Dict[str, Any] = {}
    for key in ExperimentConfig.__dataclass_fields__:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if overrides.get("methods") is not None:
        overrides["methods"] = tuple(overrides["methods"])
    if overrides.get("horizons") is not None:
        overrides["horizons"] = tuple(overrides["horizons"])
    return config.merged(overrides)


def _load_returns(config: ExperimentConfig) -> ReturnSeries:
    if config.input:
        series = read_series(config.input)
        return to_log_returns(series) if isinstance(series, PriceSeries) else series
    if config.model is not None:
        return as_percent_returns(generate(config.sim_spec()), SimMode(config.sim_mode))
    raise ConfigError("No data: pass --input CSV or --model K")


def _dataset_label(config: ExperimentConfig) -> str:
    if config.input:
        return os.path.splitext(os.path.basename(config.input))[0]
    return f"M{config.model}"


def _single_alpha_grids(config: ExperimentConfig, alpha: Optional[float]) -> CalibrationGrids:
    return CalibrationGrids(alpha_grid=(config.alpha if alpha is None else alpha,), unit_grid_step=config.grid_step)


def _cmd_simulate(args, config: ExperimentConfig) -> None:
    x = generate(config.sim_spec())
    target = args.output or sys.stdout
    if args.as_prices:
        write_prices_csv(prices_from_returns(x), target)
    else:
        write_returns_csv(as_percent_returns(x, SimMode(config.sim_mode)), target)
    if args.output:
        stem = os.path.splitext(args.output)[0]
        settings = {"command": "simulate", "as_prices": args.as_prices, **config.to_dict()}
        write_manifest(f"{stem}.manifest.json", settings)


def _cmd_calibrate(args, config: ExperimentConfig) -> None:
    returns = _load_returns(config)
    kind = MethodKind(args.kind)
    alpha = config.alpha if kind.alpha_free else 0.0
    transform = calibrate(returns, kind, alpha, _single_alpha_grids(config, alpha))
    coeffs = transform.coeffs
    print(f"kind: {kind.value} ({kind.label})")
    print(f"alpha: {coeffs.alpha:.17g}")
    print(f"order: {coeffs.order}")
    print(f"params: {', '.join(f'{p:.17g}' for p in coeffs.params)}")
    print(f"objective: {transform.objective:.17g}")
    print(f"sum: {coeffs.alpha + float(coeffs.c.sum()):.17g}")
    for i, c in enumerate(coeffs.c):
        print(f"c[{i}]: {c:.17g}")
    if args.diagnose:
        d = diagnose(transform)
        print(f"kurtosis: {d.kurtosis:.10g}")
        print(f"ljung_box: stat={d.ljung_box_stat:.6g} p={d.ljung_box_pvalue:.6g}")
        print(f"ljung_box_squared: stat={d.ljung_box_sq_stat:.6g} p={d.ljung_box_sq_pvalue:.6g}")


def _cmd_forecast(args, config: ExperimentConfig) -> None:
    returns = _load_returns(config)
    horizon = args.horizon or max(config.horizons)
    if args.kind == GARCH_KIND:
        fit = fit_garch11(returns, demean=config.demean)
        per_step = fit.forecast(float(returns.values[-1]), horizon) + fit.mu**2
    else:
        kind = MethodKind(args.kind)
        grids = _single_alpha_grids(config, config.alpha if kind.alpha_free else 0.0)
        selection = FixedVariant(config.fixed_variant())
        per_step = forecast_best_of(returns, kind, grids, config.request(horizon), selection).per_step
    for step, value in enumerate(per_step, start=1):
        print(f"{step}\t{value:.10g}")
    print(f"aggregated\t{per_step.mean():.10g}")


def _cmd_evaluate(args, config: ExperimentConfig) -> None:
    returns = _load_returns(config)
    plan = config.plan(len(returns))
    result = evaluate(
        returns,
        plan,
        config.kinds(),
        config.request(),
        with_cw=config.cw,
        grids=config.grids(),
        scope=SelectionScope(config.selection),
        fixed=config.fixed_variant(),
        recalibrate_every=config.recalibrate_every,
        demean=config.demean,
        threads=config.threads,
    )
    dataset = _dataset_label(config)
    table = format_table(result.report, dataset)
    out = config.output_dir
    write_frame(report_frame(result.report, dataset), os.path.join(out, "report.csv"))
    write_frame(forecasts_frame(result.series), os.path.join(out, "forecasts.csv"))
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as f:
        f.write(table)
    if config.cw:
        write_frame(cw_frame(result.cw), os.path.join(out, "cw.csv"))
    settings = {
        "command": "evaluate",
        "plan": {"width": plan.width, "horizons": list(plan.horizons), "returns": len(returns)},
        "selected": {f"{m}-{h}": s.selected for (m, h), s in sorted(result.series.items())},
        **config.to_dict(),
    }
    write_manifest(os.path.join(out, "manifest.json"), settings)
    print(table, end="")
    for name, res in result.cw.items():
        if res is None:
            print(f"CW {name}: degenerate")
        else:
            print(f"CW {name}: statistic={res.statistic:.6g} p={res.p_value:.6g} n={res.n_obs}")


def _cmd_cwtest(args, config: ExperimentConfig) -> None:
    data = read_forecast_pairs(args.input)
    actual = data["actual"]
    res = cw_test(actual - data["small"], actual - data["large"], data["small"], data["large"])
    print(f"statistic: {res.statistic:.10g}")
    print(f"p_value: {res.p_value:.10g}")
    print(f"n_obs: {res.n_obs}")


COMMANDS = {
    "simulate": _cmd_simulate,
    "calibrate": _cmd_calibrate,
    "forecast": _cmd_forecast,
    "evaluate": _cmd_evaluate,
    "cwtest": _cmd_cwtest,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="NoVaS and GARCH volatility forecasting of squared log-returns.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {version('novas-forecast')}")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose (debug) logging")
    parser.add_argument("--quiet", "-q", action="store_true", help="Suppress informational log messages")
    parser.add_argument("--config", default=None, help="Flat key = value settings file; flags override it")
    parser.add_argument("--threads", type=int, default=None, help="Worker pool size (default: NOVAS_THREADS or CPUs)")
    parser.add_argument(
        "--fast", action="store_true", help="Reduced budget: 1000 paths, alphas 0.2/0.5/0.8, grid step 0.05"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", default=None, help="CSV with a date,close or t,return header")
    data.add_argument("--model", type=int, choices=range(1, 9), default=None, help="Simulate model 1-8 instead")
    data.add_argument("--n", type=int, default=None, help="Simulated length (default: 500)")
    data.add_argument("--seed", type=int, default=None, help="Master seed")
    data.add_argument(
        "--sim-mode", dest="sim_mode", choices=[m.value for m in SimMode], default=None, help="Simulated input mode"
    )

    variant = argparse.ArgumentParser(add_help=False)
    variant.add_argument("--alpha", type=float, default=None, help="alpha for single-variant runs")
    variant.add_argument("--source", choices=[m.value for m in InnovationMode], default=None, help="Innovations")
    variant.add_argument("--criterion", choices=[c.value for c in RiskCriterion], default=None, help="L1 or L2")
    variant.add_argument("--paths", type=int, default=None, help="Simulated innovation paths M")
    variant.add_argument("--grid-step", dest="grid_step", type=float, default=None, help="Grid step for beta/a1/b1")

    kinds = [k.value for k in MethodKind]

    simulate = sub.add_parser("simulate", parents=[data], help="Emit a simulated series as CSV")
    simulate.add_argument("--output", default=None, help="Write here instead of stdout")
    simulate.add_argument("--as-prices", action="store_true", help="Emit a date,close price path")

    cal = sub.add_parser("calibrate", parents=[data, variant], help="Calibrate one NoVaS transform")
    cal.add_argument("--kind", choices=kinds, default=MethodKind.GA.value, help="NoVaS method (default: ga)")
    cal.add_argument("--diagnose", action="store_true", help="Also print kurtosis and Ljung-Box diagnostics")

    fc = sub.add_parser("forecast", parents=[data, variant], help="Forecast squared returns after the series")
    fc.add_argument("--kind", choices=kinds + [GARCH_KIND], default=MethodKind.GA.value, help="Method")
    fc.add_argument("--horizon", type=int, default=None, help="Steps ahead (default: largest configured horizon)")

    ev = sub.add_parser("evaluate", parents=[data, variant], help="Rolling out-of-sample comparison")
    ev.add_argument("--methods", type=_csv_list, default=None, help="Comma-separated NoVaS methods or labels")
    ev.add_argument("--width", type=int, default=None, help="Rolling window width")
    ev.add_argument("--horizons", type=lambda s: [int(h) for h in _csv_list(s)], default=None, help="e.g. 1,5,30")
    ev.add_argument(
        "--selection", choices=[s.value for s in SelectionScope], default=None, help="Variant selection scope"
    )
    ev.add_argument("--recalibrate-every", dest="recalibrate_every", type=int, default=None, help="Windows per fit")
    ev.add_argument("--demean", action="store_true", default=None, help="Demean before GARCH fitting")
    ev.add_argument("--output-dir", dest="output_dir", default=None, help="Directory for reports (default: output)")
    ev.add_argument("--no-cw", dest="cw", action="store_false", default=None, help="Skip the CW tests")

    cw = sub.add_parser("cwtest", help="CW test on an actual,small,large CSV")
    cw.add_argument("--input", required=True, help="CSV of realized values and both models' forecasts")
    return parser


def main(argv=None):
    """Main CLI entry point."""
    parser = _build_parser()
    args = parser.parse_args(argv)

    _configure_logging(verbose=args.verbose, quiet=args.quiet)

    try:
        config = _build_config(args) if args.command != "cwtest" else ExperimentConfig()
        COMMANDS[args.command](args, config)
    except (RuntimeError, OSError) as e:
        logger.error("%s", e)
        sys.exit(1)
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
