"""Inversion of calibrated transforms and L1/L2-optimal multi-step predictions of squared returns."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import CalibrationError, ConfigError, DomainError, PreconditionError
from .series import ReturnSeries, trailing_stats
from .transform import (
    CalibratedTransform,
    CalibrationGrids,
    CoefficientVector,
    MethodKind,
    calibrate,
    forward_transform,
)
from .utils import default_paths, default_seed, substream

logger = logging.getLogger(__name__)


class InnovationMode(str, Enum):
    TRIMMED_NORMAL = "normal"
    BOOTSTRAP = "bootstrap"


class RiskCriterion(str, Enum):
    """L1 takes the median over paths, L2 the mean."""

    L1 = "l1"
    L2 = "l2"


@dataclass(frozen=True)
class InnovationSource:
    """Where future W values come from.

    A trimmed standard normal is restricted to |w| < bound; the bootstrap resamples the
    calibrated W series with replacement.
    """

    mode: InnovationMode
    bound: float = math.inf
    empirical_pool: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.bound > 0.0:
            raise DomainError(f"Innovation bound must be > 0, got {self.bound}")
        if self.mode is InnovationMode.BOOTSTRAP:
            if self.empirical_pool is None or np.asarray(self.empirical_pool).size == 0:
                raise PreconditionError("A bootstrap innovation source needs a nonempty pool")

    @classmethod
    def for_transform(cls, mode: InnovationMode, transform: CalibratedTransform) -> "InnovationSource":
        mode = InnovationMode(mode)
        bound = transform.coeffs.bound
        if mode is InnovationMode.TRIMMED_NORMAL:
            return cls(mode, bound)
        pool = transform.w_series[np.abs(transform.w_series) < bound]
        return cls(mode, bound, pool)

    def draw(self, rng: np.random.Generator, size: Tuple[int, ...]) -> np.ndarray:
        if self.mode is InnovationMode.BOOTSTRAP:
            return rng.choice(self.empirical_pool, size=size, replace=True)
        out = rng.standard_normal(size)
        if math.isinf(self.bound):
            return out
        # rejection against the bound, redrawing only the offending cells
        bad = np.abs(out) >= self.bound
        while bad.any():
            out[bad] = rng.standard_normal(int(bad.sum()))
            bad = np.abs(out) >= self.bound
        return out


@dataclass(frozen=True)
class ForecastRequest:
    horizon: int
    paths: int = field(default_factory=default_paths)
    criterion: RiskCriterion = RiskCriterion.L1
    source: InnovationMode = InnovationMode.TRIMMED_NORMAL
    seed: int = field(default_factory=default_seed)

    def __post_init__(self):
        if self.horizon < 1:
            raise PreconditionError(f"Forecast horizon must be >= 1, got {self.horizon}")
        if self.paths < 1:
            raise PreconditionError(f"Number of paths must be >= 1, got {self.paths}")
        object.__setattr__(self, "criterion", RiskCriterion(self.criterion))
        object.__setattr__(self, "source", InnovationMode(self.source))


@dataclass(frozen=True)
class PointForecast:
    """Predicted squared returns for steps n+1..n+h; ``value`` is the step-h entry."""

    value: float
    per_step: np.ndarray

    def __post_init__(self):
        per_step = np.array(self.per_step, dtype=float)
        if np.any(per_step < 0.0):
            raise DomainError("Predicted squared returns must be nonnegative")
        per_step.setflags(write=False)
        object.__setattr__(self, "per_step", per_step)

    @property
    def aggregated(self) -> float:
        """Mean of the per-step predictions (time-aggregated forecast)."""
        return float(self.per_step.mean())


@dataclass(frozen=True)
class PathEnsemble:
    """Drawn innovations and the induced squared returns, both shaped (paths, horizon)."""

    innovations: np.ndarray
    squared: np.ndarray


@dataclass(frozen=True)
class VolatilityState:
    """Lagged squared returns (most recent first) and the frozen trailing variance s^2_n.

    ``lags_sq`` is either one history of shape (q,) or a stack of per-path histories
    shaped (paths, q); the methods below work on both.
    """

    lags_sq: np.ndarray
    s_sq: float

    @classmethod
    def from_window(cls, window: ReturnSeries, q: int) -> "VolatilityState":
        y = window.values
        if len(y) < q + 1:
            raise PreconditionError(f"Window of length {len(y)} is too short for order q={q}")
        return cls(lags_sq=y[::-1][:q] ** 2, s_sq=trailing_stats(window, len(y) + 1).s_sq)

    def proxy(self, coeffs: CoefficientVector) -> Union[float, np.ndarray]:
        """alpha * s^2 + sum_i c_i Y^2_{n+1-i}."""
        value = coeffs.alpha * self.s_sq + self.lags_sq @ coeffs.c[1:]
        return float(value) if np.ndim(value) == 0 else value

    def tiled(self, paths: int) -> "VolatilityState":
        """One copy of this history per path."""
        return VolatilityState(np.tile(self.lags_sq, (paths, 1)), self.s_sq)

    def advance(self, y2: Union[float, np.ndarray]) -> "VolatilityState":
        """Push the newest squared return(s) to the front of the lag buffer."""
        if self.lags_sq.shape[-1] == 0:
            return self
        newest = np.expand_dims(np.asarray(y2, dtype=float), -1)
        return VolatilityState(np.concatenate((newest, self.lags_sq[..., :-1]), axis=-1), self.s_sq)


def inverse_step(
    w: Union[float, np.ndarray], coeffs: CoefficientVector, state: VolatilityState
) -> Union[float, np.ndarray]:
    """Next squared return implied by innovation ``w``; elementwise over paths when ``w`` is an array."""
    w = np.asarray(w, dtype=float)
    if coeffs.c0 > 0.0 and np.any(np.abs(w) >= coeffs.bound):
        raise DomainError(f"|w| = {float(np.max(np.abs(w)))} must be below 1/sqrt(c_0) = {coeffs.bound}")
    result = w * w / (1.0 - coeffs.c0 * w * w) * state.proxy(coeffs)
    return float(result) if result.ndim == 0 else result


def simulate_paths(
    window: ReturnSeries,
    transform: CalibratedTransform,
    req: ForecastRequest,
    rng: Optional[np.random.Generator] = None,
) -> PathEnsemble:
    """Iterate the inverse transform along ``req.paths`` independent innovation paths.

    Every step feeds its pseudo squared return back into the lag buffer of its own
    path; s^2 stays at its value over the window.
    """
    coeffs = transform.coeffs
    state = VolatilityState.from_window(window, coeffs.order).tiled(req.paths)
    rng = rng if rng is not None else np.random.default_rng(req.seed)
    source = InnovationSource.for_transform(req.source, transform)
    w = source.draw(rng, (req.paths, req.horizon))
    squared = np.empty_like(w)
    for j in range(req.horizon):
        squared[:, j] = inverse_step(w[:, j], coeffs, state)
        state = state.advance(squared[:, j])
    return PathEnsemble(innovations=w, squared=squared)


def optimal_predictor(ensemble: PathEnsemble, criterion: RiskCriterion) -> PointForecast:
    """Per-step median (L1) or mean (L2) of the simulated squared returns; the value is the h-step one."""
    if ensemble.squared.size == 0:
        raise PreconditionError("Cannot predict from an empty ensemble")
    if RiskCriterion(criterion) is RiskCriterion.L1:
        per_step = np.median(ensemble.squared, axis=0)
    else:
        per_step = np.mean(ensemble.squared, axis=0)
    per_step = np.maximum(per_step, 0.0)
    return PointForecast(value=float(per_step[-1]), per_step=per_step)


@dataclass(frozen=True)
class Variant:
    """One (alpha, innovation source, criterion) configuration of a method."""

    alpha: float
    source: InnovationMode
    criterion: RiskCriterion

    def __str__(self) -> str:
        return f"alpha={self.alpha:g}/{InnovationMode(self.source).value}/{RiskCriterion(self.criterion).value}"


@dataclass(frozen=True)
class OracleBest:
    """Pick the variant closest to the realized squared returns Y^2_{n+1}..Y^2_{n+h}."""

    realized: Optional[Sequence[float]] = None


@dataclass(frozen=True)
class FixedVariant:
    variant: Variant


Selection = Union[OracleBest, FixedVariant]


@dataclass(frozen=True)
class CandidateSet:
    """Forecasts of every variant for one window, in a fixed order."""

    variants: Tuple[Variant, ...]
    forecasts: Tuple[PointForecast, ...]

    def per_step_matrix(self) -> np.ndarray:
        return np.vstack([f.per_step for f in self.forecasts])


def method_alphas(kind: MethodKind, grids: CalibrationGrids) -> Tuple[float, ...]:
    """Alphas a family is calibrated at; simple and exponential NoVaS only use 0."""
    return grids.alpha_grid if MethodKind(kind).alpha_free else (0.0,)


def calibrate_all(window: ReturnSeries, kind: MethodKind, grids: CalibrationGrids) -> Dict[float, CalibratedTransform]:
    """Calibrate ``kind`` at every alpha it admits.

    Alphas with no grid point meeting the c_0 bound are dropped. Only when every alpha
    fails are the best unconstrained transforms used, with a warning.
    """
    out: Dict[float, CalibratedTransform] = {}
    fallbacks: Dict[float, CalibratedTransform] = {}
    for alpha in method_alphas(kind, grids):
        try:
            out[alpha] = calibrate(window, kind, alpha, grids)
        except CalibrationError as e:
            logger.debug("Dropping %s at alpha=%s: %s", MethodKind(kind).value, alpha, e)
            if e.best is not None:
                fallbacks[alpha] = e.best
    if not out and fallbacks:
        logger.warning(
            "%s: no alpha meets the c_0 bound; using the best unconstrained grid points", MethodKind(kind).value
        )
        out = fallbacks
    if not out:
        raise CalibrationError(f"{MethodKind(kind).value} could not be calibrated at any alpha")
    return out


def refit(window: ReturnSeries, transforms: Dict[float, CalibratedTransform]) -> Dict[float, CalibratedTransform]:
    """Reapply already calibrated coefficients to a new window."""
    return {alpha: forward_transform(window, t.coeffs) for alpha, t in transforms.items()}


def forecast_candidates(
    window: ReturnSeries,
    transforms: Dict[float, CalibratedTransform],
    req: ForecastRequest,
    grids: CalibrationGrids,
    stream_key: Tuple[int, ...] = (),
) -> CandidateSet:
    """Forecast every (alpha, source, criterion) variant.

    Both criteria share one ensemble per (alpha, source). The generator of each ensemble
    is keyed by ``stream_key`` plus the alpha's grid index and the source's index.
    """
    variants: List[Variant] = []
    forecasts: List[PointForecast] = []
    for alpha, transform in transforms.items():
        a_idx = grids.alpha_grid.index(alpha) if alpha in grids.alpha_grid else 0
        for v_idx, mode in enumerate(InnovationMode):
            sub = ForecastRequest(req.horizon, req.paths, req.criterion, mode, req.seed)
            ensemble = simulate_paths(window, transform, sub, substream(req.seed, *stream_key, a_idx, v_idx))
            for criterion in RiskCriterion:
                variants.append(Variant(alpha, mode, criterion))
                forecasts.append(optimal_predictor(ensemble, criterion))
    return CandidateSet(tuple(variants), tuple(forecasts))


def oracle_index(candidates: CandidateSet, realized: Sequence[float]) -> int:
    """Index of the candidate whose aggregated forecast is closest to the realized aggregate; first wins ties."""
    target = float(np.mean(realized))
    errors = [(f.aggregated - target) ** 2 for f in candidates.forecasts]
    return int(np.argmin(errors))


def forecast_best_of(
    window: ReturnSeries,
    kind: MethodKind,
    grids: CalibrationGrids,
    req: ForecastRequest,
    selection: Selection,
) -> PointForecast:
    """Forecast with ``kind`` across alphas, sources and criteria, then select one result.

    Args:
        window: the conditioning returns Y_1..Y_n.
        kind: NoVaS method.
        grids: calibration grids; every alpha on ``alpha_grid`` is tried for alpha-free kinds.
        req: horizon, path count and seed. Its ``source`` and ``criterion`` are ignored
            because all of them are swept.
        selection: ``OracleBest`` with the realized squared returns, or ``FixedVariant``.

    Returns:
        The selected ``PointForecast``.
    """
    if isinstance(selection, OracleBest):
        if selection.realized is None or len(selection.realized) == 0:
            raise ConfigError("Oracle selection needs the realized squared returns")
        candidates = forecast_candidates(window, calibrate_all(window, kind, grids), req, grids)
        best = oracle_index(candidates, selection.realized)
        logger.debug("%s: oracle picked %s", MethodKind(kind).value, candidates.variants[best])
        return candidates.forecasts[best]

    variant = selection.variant
    alpha = variant.alpha if MethodKind(kind).alpha_free else 0.0
    transform = calibrate(window, kind, alpha, grids)
    a_idx = grids.alpha_grid.index(alpha) if alpha in grids.alpha_grid else 0
    v_idx = list(InnovationMode).index(InnovationMode(variant.source))
    sub = ForecastRequest(req.horizon, req.paths, variant.criterion, variant.source, req.seed)
    ensemble = simulate_paths(window, transform, sub, substream(req.seed, a_idx, v_idx))
    return optimal_predictor(ensemble, variant.criterion)
