"""Experiment configuration: defaults, flat ``key = value`` files and CLI overrides."""

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from .constants import (
    ALPHA_GRID,
    FAST_ALPHA_GRID,
    FAST_GRID_STEP,
    FAST_PATHS,
    HORIZONS,
    UNIT_GRID_STEP,
)
from .errors import ConfigError, NovasError
from .evaluate import SelectionScope, WindowPlan
from .predict import ForecastRequest, InnovationMode, RiskCriterion, Variant
from .simulate import SimMode, SimModelSpec
from .transform import CalibrationGrids, MethodKind, method_kinds
from .utils import default_paths, default_seed

logger = logging.getLogger(__name__)

DEFAULT_METHODS = ("ge", "ga", "ga-nobeta")


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(cast: Callable[[str], Any]) -> Callable[[str], Tuple[Any, ...]]:
    def parse(text: str) -> Tuple[Any, ...]:
        return tuple(cast(part.strip()) for part in text.split(",") if part.strip())

    return parse


def _optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


def _optional_str(text: str) -> Optional[str]:
    return text.strip() or None


_PARSERS: Dict[str, Callable[[str], Any]] = {
    "input": _optional_str,
    "model": _optional_int,
    "n": int,
    "seed": int,
    "sim_mode": lambda s: SimMode(s.strip().lower()).value,
    "methods": _list(str),
    "width": _optional_int,
    "horizons": _list(int),
    "paths": int,
    "alpha_grid": _list(float),
    "grid_step": float,
    "selection": lambda s: SelectionScope(s.strip().lower()).value,
    "criterion": lambda s: RiskCriterion(s.strip().lower()).value,
    "source": lambda s: InnovationMode(s.strip().lower()).value,
    "alpha": float,
    "recalibrate_every": int,
    "demean": _bool,
    "threads": _optional_int,
    "output_dir": str,
    "cw": _bool,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a run.

    ``input`` names a CSV; otherwise ``model`` selects a simulator. ``criterion``,
    ``source`` and ``alpha`` only matter for fixed selection and single forecasts.
    """

    input: Optional[str] = None
    model: Optional[int] = None
    n: int = 500
    seed: int = field(default_factory=default_seed)
    sim_mode: str = SimMode.RETURNS.value
    methods: Tuple[str, ...] = DEFAULT_METHODS
    width: Optional[int] = None
    horizons: Tuple[int, ...] = HORIZONS
    paths: int = field(default_factory=default_paths)
    alpha_grid: Tuple[float, ...] = ALPHA_GRID
    grid_step: float = UNIT_GRID_STEP
    selection: str = SelectionScope.SERIES.value
    criterion: str = RiskCriterion.L1.value
    source: str = InnovationMode.TRIMMED_NORMAL.value
    alpha: float = ALPHA_GRID[0]
    recalibrate_every: int = 1
    demean: bool = False
    threads: Optional[int] = None
    output_dir: str = "output"
    cw: bool = True

    def __post_init__(self):
        try:
            method_kinds(self.methods)
            self.grids()
            if self.width is not None:
                WindowPlan(self.width, self.horizons)
            ForecastRequest(max(self.horizons), self.paths, self.criterion, self.source, self.seed)
            if self.model is not None:
                SimModelSpec(self.model, self.n, self.seed)
        except (NovasError, ValueError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e
        if self.recalibrate_every < 1:
            raise ConfigError(f"recalibrate_every must be >= 1, got {self.recalibrate_every}")

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment and blank lines are skipped."""
        values: Dict[str, Any] = {}
        with open(path, encoding="utf-8") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
                key, _, text = (part.strip() for part in line.partition("="))
                if key not in _PARSERS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    values[key] = _PARSERS[key](text)
                except ValueError as e:
                    raise ConfigError(f"{path}:{lineno}: bad value for {key}: {e}") from e
        logger.debug("Loaded %d settings from %s", len(values), path)
        return cls(**values)

    def merged(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        """Copy with every non-None override applied."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"Unknown settings: {', '.join(sorted(unknown))}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def fast(self) -> "ExperimentConfig":
        """Reduced budget: fewer paths, a coarser grid and three alphas."""
        return replace(self, paths=FAST_PATHS, alpha_grid=FAST_ALPHA_GRID, grid_step=FAST_GRID_STEP)

    def grids(self) -> CalibrationGrids:
        """Calibration grids built from the configured alpha grid and step."""
        return CalibrationGrids(alpha_grid=tuple(self.alpha_grid), unit_grid_step=self.grid_step)

    def kinds(self) -> List[MethodKind]:
        """Configured method names resolved to families, in the order given."""
        return method_kinds(self.methods)

    def plan(self, n_returns: int) -> WindowPlan:
        """Window plan for a series of ``n_returns`` returns (n_returns + 1 observations)."""
        if self.width is not None:
            return WindowPlan(self.width, self.horizons)
        return WindowPlan.for_length(n_returns + 1, self.horizons)

    def request(self, horizon: Optional[int] = None) -> ForecastRequest:
        """Forecast request for one horizon; defaults to the longest configured horizon."""
        return ForecastRequest(horizon or max(self.horizons), self.paths, self.criterion, self.source, self.seed)

    def fixed_variant(self) -> Variant:
        return Variant(self.alpha, InnovationMode(self.source), RiskCriterion(self.criterion))

    def sim_spec(self) -> SimModelSpec:
        if self.model is None:
            raise ConfigError("No simulation model configured")
        return SimModelSpec(self.model, self.n, self.seed)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["horizons"] = list(self.horizons)
        out["alpha_grid"] = list(self.alpha_grid)
        out["methods"] = list(self.methods)
        return out
