"""Rolling pseudo-out-of-sample evaluation: aggregated forecasts, metric P, relative tables and the CW test."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import islice
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .constants import BETA_BOUND, DEFAULT_WIDTHS, HORIZONS
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateDataError,
    DegenerateTestError,
    DomainError,
    PlanError,
    PreconditionError,
)
from .garch import fit_garch11
from .predict import (
    ForecastRequest,
    InnovationMode,
    RiskCriterion,
    Variant,
    calibrate_all,
    forecast_candidates,
    method_alphas,
    refit,
)
from .series import ReturnSeries, rolling_windows
from .transform import CalibrationGrids, MethodKind
from .utils import resolve_workers

logger = logging.getLogger(__name__)

BENCHMARK = "GARCH"

# Relative gap between the two parsimonious variants that counts as a clear win
PARSIMONIOUS_MARGIN = 0.10

# Parsimonious method -> its larger counterpart, compared by the CW test
CW_PAIRS = {
    MethodKind.GA_NO_BETA: MethodKind.GA,
    MethodKind.GEN_EXPONENTIAL_NO_BETA: MethodKind.GEN_EXPONENTIAL,
}


class SelectionScope(str, Enum):
    """How one forecast per window is chosen among a method's variants."""

    SERIES = "series"
    WINDOW = "window"
    FIXED = "fixed"

    @property
    def in_sample(self) -> bool:
        """Oracle scopes look at the realized values they are scored against."""
        return self is not SelectionScope.FIXED

    @property
    def note(self) -> str:
        return {
            SelectionScope.SERIES: "series oracle (in-sample: one variant per method picked on the realized values)",
            SelectionScope.WINDOW: "per-window oracle (in-sample: each window's variant picked on its realized value)",
            SelectionScope.FIXED: "fixed variant (out-of-sample)",
        }[self]


@dataclass(frozen=True)
class WindowPlan:
    width: int
    horizons: Tuple[int, ...] = HORIZONS

    def __post_init__(self):
        if self.width < 1:
            raise PlanError(f"Window width must be >= 1, got {self.width}")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise PlanError(f"Horizons must be >= 1, got {self.horizons}")
        object.__setattr__(self, "horizons", tuple(sorted(set(int(h) for h in self.horizons))))

    @classmethod
    def for_length(cls, n_points: int, horizons: Sequence[int] = HORIZONS) -> "WindowPlan":
        """Default plan for a dataset of ``n_points`` observations."""
        width = DEFAULT_WIDTHS.get(n_points)
        if width is None:
            width = DEFAULT_WIDTHS[min(DEFAULT_WIDTHS, key=lambda size: abs(size - n_points))]
            width = min(width, max(1, n_points // 2))
        return cls(width, tuple(horizons))

    @property
    def max_horizon(self) -> int:
        return max(self.horizons)

    def validate(self, length: int) -> None:
        if self.width + self.max_horizon > length:
            raise PlanError(
                f"Window width {self.width} plus horizon {self.max_horizon} exceeds the {length} available returns"
            )

    def window_count(self, length: int, h: int) -> int:
        """Number of windows whose h-step target lies inside the series."""
        return length - self.width - h + 1


@dataclass(frozen=True)
class AggregatedForecastSeries:
    """Time-aggregated h-step predictions and their realized counterparts, one per window."""

    method: str
    horizon: int
    values: np.ndarray
    realized: np.ndarray
    selected: str = ""

    def __post_init__(self):
        if len(self.values) != len(self.realized):
            raise PreconditionError(f"{len(self.values)} forecasts for {len(self.realized)} realized values")


@dataclass(frozen=True)
class PerformanceReport:
    p: Dict[Tuple[str, int], float]
    relative: Dict[Tuple[str, int], float]
    methods: Tuple[str, ...]
    horizons: Tuple[int, ...]
    benchmark: str = BENCHMARK
    selection: Optional[SelectionScope] = None

    def best(self, h: int) -> str:
        """Method with the smallest P at horizon h; earliest column wins ties."""
        return min(self.methods, key=lambda m: (self.p[(m, h)], self.methods.index(m)))


@dataclass(frozen=True)
class CwTestResult:
    statistic: float
    p_value: float
    n_obs: int


@dataclass
class _MethodForecasts:
    """Per-step predictions shaped (windows, variants, max horizon)."""

    variants: List[str]
    per_step: np.ndarray
    fixed_index: Optional[int] = None


@dataclass
class EvaluationResult:
    series: Dict[Tuple[str, int], AggregatedForecastSeries]
    report: PerformanceReport
    cw: Dict[str, Optional[CwTestResult]] = field(default_factory=dict)


def aggregate(per_step: np.ndarray, h: int) -> np.ndarray:
    """Mean of the first h per-step predictions along the last axis."""
    return np.asarray(per_step)[..., :h].mean(axis=-1)


def realized_aggregates(returns: ReturnSeries, plan: WindowPlan, h: int) -> np.ndarray:
    """sum_{m=1..h} Y^2_{l+m} / h for every window l with a complete target."""
    y2 = returns.squared()
    count = plan.window_count(len(returns), h)
    csum = np.concatenate(([0.0], np.cumsum(y2)))
    starts = np.arange(count) + plan.width
    return (csum[starts + h] - csum[starts]) / h


def _variant_grid(kind: MethodKind, grids: CalibrationGrids) -> List[Variant]:
    return [
        Variant(alpha, mode, criterion)
        for alpha in method_alphas(kind, grids)
        for mode in InnovationMode
        for criterion in RiskCriterion
    ]


Window = Tuple[ReturnSeries, int]


def _start(window: Window) -> int:
    """0-based position of the window's first return."""
    series, target = window
    return target - len(series) - 1


def _novas_block(
    kind: MethodKind,
    windows: Sequence[Window],
    plan: WindowPlan,
    req: ForecastRequest,
    grids: CalibrationGrids,
    variants: List[Variant],
) -> np.ndarray:
    """Candidate per-step forecasts for consecutive windows; coefficients are calibrated on the first one.

    A variant whose alpha was dropped by calibration stays NaN.
    """
    out = np.full((len(windows), len(variants), plan.max_horizon), np.nan)
    column = {v: i for i, v in enumerate(variants)}
    transforms = None
    starts = [_start(w) for w in windows]
    for row, ((window, _), start) in enumerate(zip(windows, starts)):
        try:
            transforms = calibrate_all(window, kind, grids) if transforms is None else refit(window, transforms)
            candidates = forecast_candidates(window, transforms, req, grids, stream_key=(start,))
        except (DegenerateDataError, CalibrationError) as e:
            logger.warning("%s window %d: %s; predicting 0", kind.label, start, e)
            out[row] = 0.0
            transforms = None
            continue
        for variant, forecast in zip(candidates.variants, candidates.forecasts):
            out[row, column[variant]] = forecast.per_step
    logger.debug("%s windows %d..%d done", kind.label, starts[0], starts[-1])
    return out


def _garch_block(windows: Sequence[Window], plan: WindowPlan, demean: bool) -> np.ndarray:
    out = np.empty((len(windows), 1, plan.max_horizon))
    for row, (window, target) in enumerate(windows):
        y = window.values
        try:
            fit = fit_garch11(window, demean=demean)
        except DegenerateDataError as e:
            logger.warning("GARCH window %d: %s; predicting the window's mean square", _start((window, target)), e)
            out[row, 0] = np.mean(y**2)
            continue
        out[row, 0] = fit.forecast(float(y[-1]), plan.max_horizon) + fit.mu**2
    return out


def _blocks(windows: List[Window], size: int) -> List[List[Window]]:
    return [windows[s : s + size] for s in range(0, len(windows), size)]


def _select(method: str, h: int, forecasts: _MethodForecasts, realized: np.ndarray, scope: SelectionScope):
    agg = aggregate(forecasts.per_step[: len(realized)], h)
    sq_err = (agg - realized[:, None]) ** 2
    sq_err = np.where(np.isfinite(sq_err), sq_err, np.inf)
    if len(forecasts.variants) == 1:
        return agg[:, 0], forecasts.variants[0]
    if scope is SelectionScope.FIXED:
        idx = forecasts.fixed_index
        return agg[:, idx], forecasts.variants[idx]
    if scope is SelectionScope.WINDOW:
        picks = np.argmin(sq_err, axis=1)
        return agg[np.arange(len(picks)), picks], "per-window oracle"
    complete = np.isfinite(agg).all(axis=0)
    if not complete.any():
        raise CalibrationError(f"{method} h={h}: no variant was calibrated in every window; try --selection window")
    idx = int(np.argmin(np.where(complete, sq_err.sum(axis=0), np.inf)))
    logger.debug("%s h=%d: series oracle picked %s", method, h, forecasts.variants[idx])
    return agg[:, idx], forecasts.variants[idx]


def run_poos(
    returns: ReturnSeries,
    plan: WindowPlan,
    methods: Sequence[MethodKind],
    req: ForecastRequest,
    grids: Optional[CalibrationGrids] = None,
    scope: SelectionScope = SelectionScope.SERIES,
    fixed: Optional[Variant] = None,
    recalibrate_every: int = 1,
    demean: bool = False,
    threads: Optional[int] = None,
) -> Dict[Tuple[str, int], AggregatedForecastSeries]:
    """Roll a window of ``plan.width`` returns through the series and forecast from each position.

    Every method predicts ``plan.max_horizon`` per-step squared returns from each window;
    the h-step forecast of a window is the mean of its first h predictions. NoVaS methods
    produce one forecast per (alpha, source, criterion) variant and ``scope`` chooses
    among them. The GARCH-direct benchmark is always included.

    Returns:
        Aggregated series keyed by (method label, horizon); window counts follow
        ``plan.window_count``.
    """
    grids = grids or CalibrationGrids()
    scope = SelectionScope(scope)
    if scope is SelectionScope.FIXED and fixed is None:
        raise ConfigError("Fixed selection needs a variant")
    if recalibrate_every < 1:
        raise ConfigError(f"recalibrate_every must be >= 1, got {recalibrate_every}")
    length = len(returns)
    plan.validate(length)
    n_windows = plan.window_count(length, min(plan.horizons))
    req = ForecastRequest(plan.max_horizon, req.paths, req.criterion, req.source, req.seed)
    kinds = [MethodKind(k) for k in methods]
    logger.info(
        "Evaluating %d windows of width %d, horizons %s, methods %s",
        n_windows,
        plan.width,
        list(plan.horizons),
        [k.label for k in kinds] + [BENCHMARK],
    )

    windows = list(islice(rolling_windows(returns, plan.width), n_windows))
    blocks = _blocks(windows, recalibrate_every)
    forecasts: Dict[str, _MethodForecasts] = {}
    with ThreadPoolExecutor(max_workers=resolve_workers(threads)) as executor:
        for kind in kinds:
            variants = _variant_grid(kind, grids)
            fixed_index = None
            if scope is SelectionScope.FIXED:
                alpha = fixed.alpha if kind.alpha_free else 0.0
                target = Variant(alpha, InnovationMode(fixed.source), RiskCriterion(fixed.criterion))
                if target not in variants:
                    raise ConfigError(f"{target} is not a variant of {kind.label} under the current grids")
                fixed_index = variants.index(target)
            parts = executor.map(
                lambda block, kind=kind, variants=variants: _novas_block(kind, block, plan, req, grids, variants),
                blocks,
            )
            per_step = np.concatenate(list(parts))
            if fixed_index is not None:
                missing = int(np.isnan(per_step[:, fixed_index, 0]).sum())
                if missing:
                    raise CalibrationError(
                        f"{kind.label} at alpha={target.alpha:g} has no grid point with c_0 <= {BETA_BOUND} "
                        f"in {missing} of {len(per_step)} windows; choose another alpha or a finer grid"
                    )
            forecasts[kind.label] = _MethodForecasts([str(v) for v in variants], per_step, fixed_index)
            logger.info("%s finished", kind.label)
        parts = executor.map(lambda block: _garch_block(block, plan, demean), blocks)
        forecasts[BENCHMARK] = _MethodForecasts(["GARCH(1,1)"], np.concatenate(list(parts)))
        logger.info("%s finished", BENCHMARK)

    out: Dict[Tuple[str, int], AggregatedForecastSeries] = {}
    for h in plan.horizons:
        realized = realized_aggregates(returns, plan, h)
        for method, fc in forecasts.items():
            values, selected = _select(method, h, fc, realized, scope)
            out[(method, h)] = AggregatedForecastSeries(method, h, values, realized, str(selected))
    return out


def metric_p(agg: AggregatedForecastSeries) -> float:
    """P = sum over windows of (aggregated forecast - realized)^2."""
    if len(agg.values) == 0:
        raise PreconditionError("metric_p needs at least one window")
    values = np.asarray(agg.values, dtype=float)
    realized = np.asarray(agg.realized, dtype=float)
    bad = np.flatnonzero(~np.isfinite(values) | ~np.isfinite(realized))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"{agg.method} h={agg.horizon}: window {i + 1} has a non-finite value", index=i)
    return float(np.sum((values - realized) ** 2))


def relative_table(
    p_values: Mapping[Tuple[str, int], float],
    benchmark: str = BENCHMARK,
    selection: Optional[SelectionScope] = None,
) -> PerformanceReport:
    """Divide every method's P by the benchmark's P at the same horizon."""
    methods: List[str] = []
    horizons: List[int] = []
    for method, h in p_values:
        if method not in methods:
            methods.append(method)
        if h not in horizons:
            horizons.append(h)
    if benchmark not in methods:
        raise PreconditionError(f"Benchmark {benchmark} is missing from the P values")
    relative = {}
    for h in horizons:
        base = p_values[(benchmark, h)]
        if base == 0.0:
            raise DegenerateDataError(f"Benchmark P is 0 at horizon {h}; relative values are undefined")
        for method in methods:
            relative[(method, h)] = 1.0 if method == benchmark else p_values[(method, h)] / base
    # benchmark last, like the published tables
    methods = [m for m in methods if m != benchmark] + [benchmark]
    scope = SelectionScope(selection) if selection is not None else None
    return PerformanceReport(dict(p_values), relative, tuple(methods), tuple(sorted(horizons)), benchmark, scope)


def performance_report(
    series: Mapping[Tuple[str, int], AggregatedForecastSeries], selection: Optional[SelectionScope] = None
) -> PerformanceReport:
    """Score every aggregated series with P and express it relative to the benchmark.

    ``selection`` records how the NoVaS variants were chosen so the written tables can say
    whether the figures are in-sample.
    """
    return relative_table({key: metric_p(agg) for key, agg in series.items()}, selection=selection)


def cw_test(
    errors_small: Sequence[float],
    errors_large: Sequence[float],
    forecasts_small: Sequence[float],
    forecasts_large: Sequence[float],
) -> CwTestResult:
    """Clark-West adjusted-MSPE test that the larger model does not improve on the parsimonious one.

    The adjusted loss differential is f_t = e_s^2 - (e_l^2 - (yhat_s - yhat_l)^2); the
    statistic is its mean over the standard error from the sample variance, with a
    one-sided upper-tail normal p-value.
    """
    arrays = [np.asarray(a, dtype=float) for a in (errors_small, errors_large, forecasts_small, forecasts_large)]
    n = arrays[0].size
    if any(a.size != n for a in arrays):
        raise PreconditionError("CW test inputs must have equal lengths")
    if n < 10:
        raise PreconditionError(f"CW test needs at least 10 observations, got {n}")
    e_s, e_l, f_s, f_l = arrays
    f = e_s**2 - (e_l**2 - (f_s - f_l) ** 2)
    var = float(np.var(f, ddof=1))
    if var <= 0.0 or not math.isfinite(var):
        raise DegenerateTestError("Adjusted loss differential is constant; the CW statistic is undefined")
    statistic = float(np.mean(f) / math.sqrt(var / n))
    return CwTestResult(statistic, float(stats.norm.sf(statistic)), n)


def parsimonious_comparison(p_first: float, p_second: float) -> float:
    """(max - min) / max of two P values."""
    top = max(p_first, p_second)
    if top == 0.0:
        return 0.0
    return (top - min(p_first, p_second)) / top


def harness_cw_tests(series: Mapping[Tuple[str, int], AggregatedForecastSeries]) -> Dict[str, Optional[CwTestResult]]:
    """1-step CW tests for each evaluated (parsimonious, larger) pair; None marks a degenerate pair."""
    out: Dict[str, Optional[CwTestResult]] = {}
    for small, large in CW_PAIRS.items():
        a, b = series.get((small.label, 1)), series.get((large.label, 1))
        if a is None or b is None:
            continue
        name = f"{small.label} vs {large.label}"
        try:
            out[name] = cw_test(a.realized - a.values, b.realized - b.values, a.values, b.values)
        except (DegenerateTestError, PreconditionError) as e:
            logger.warning("CW test %s: %s", name, e)
            out[name] = None
    return out


def evaluate(
    returns: ReturnSeries,
    plan: WindowPlan,
    methods: Sequence[MethodKind],
    req: ForecastRequest,
    with_cw: bool = True,
    **kwargs,
) -> EvaluationResult:
    """Run the rolling comparison, score it and add the CW tests; ``kwargs`` go to ``run_poos``."""
    series = run_poos(returns, plan, methods, req, **kwargs)
    report = performance_report(series, selection=SelectionScope(kwargs.get("scope", SelectionScope.SERIES)))
    return EvaluationResult(series, report, harness_cw_tests(series) if with_cw else {})


def _parsimonious_pair(report: PerformanceReport) -> Optional[Tuple[str, str]]:
    pair = (MethodKind.GEN_EXPONENTIAL_NO_BETA.label, MethodKind.GA_NO_BETA.label)
    return pair if all(m in report.methods for m in pair) else None


def report_frame(report: PerformanceReport, dataset: str = "") -> pd.DataFrame:
    """Long-form table: one row per (horizon, method).

    ``selection`` and ``in_sample`` repeat how the variants were chosen; both are blank
    when the report does not record it.
    """
    scope = report.selection
    rows = []
    for h in report.horizons:
        best = report.best(h)
        for method in report.methods:
            rows.append(
                {
                    "dataset": dataset,
                    "horizon": h,
                    "method": method,
                    "p": report.p[(method, h)],
                    "relative": report.relative[(method, h)],
                    "best": method == best,
                    "selection": scope.value if scope is not None else "",
                    "in_sample": scope.in_sample if scope is not None else "",
                }
            )
    columns = ["dataset", "horizon", "method", "p", "relative", "best", "selection", "in_sample"]
    return pd.DataFrame(rows, columns=columns)


def format_table(report: PerformanceReport, dataset: str = "data") -> str:
    """Aligned text with one row per horizon and one column per method.

    ``*`` marks the best method of a row and ``+`` a parsimonious gap of at least
    PARSIMONIOUS_MARGIN. When the report records its selection scope, a leading
    ``selection:`` line says whether the figures are in-sample.
    """
    pair = _parsimonious_pair(report)
    headers = ["case"] + list(report.methods) + (["P-GE|P-GA"] if pair else [])
    rows = []
    for h in report.horizons:
        best = report.best(h)
        row = [f"{dataset}-{h}steps"]
        for method in report.methods:
            mark = "*" if method == best else ""
            row.append(f"{report.relative[(method, h)]:.5f}{mark}")
        if pair:
            gap = parsimonious_comparison(report.p[(pair[0], h)], report.p[(pair[1], h)])
            row.append(f"{gap:.5f}{'+' if gap >= PARSIMONIOUS_MARGIN else ''}")
        rows.append(row)
    widths = [max(len(r[i]) for r in [headers] + rows) for i in range(len(headers))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in [headers] + rows]
    if report.selection is not None:
        lines.insert(0, f"selection: {report.selection.note}")
    return "\n".join(lines) + "\n"


def forecasts_frame(series: Mapping[Tuple[str, int], AggregatedForecastSeries]) -> pd.DataFrame:
    """Plot-ready long table of every aggregated forecast and its realized value."""
    frames = [
        pd.DataFrame(
            {
                "method": agg.method,
                "horizon": agg.horizon,
                "window": np.arange(1, len(agg.values) + 1),
                "forecast": agg.values,
                "realized": agg.realized,
            }
        )
        for _, agg in sorted(series.items())
    ]
    return pd.concat(frames, ignore_index=True)


def cw_frame(results: Mapping[str, Optional[CwTestResult]]) -> pd.DataFrame:
    """One row per comparison; degenerate pairs keep their row with NaN statistics."""
    rows = []
    for name, res in results.items():
        if res is None:
            rows.append((name, np.nan, np.nan, 0, "degenerate"))
        else:
            rows.append((name, res.statistic, res.p_value, res.n_obs, "ok"))
    return pd.DataFrame(rows, columns=["comparison", "statistic", "p_value", "n_obs", "status"])
