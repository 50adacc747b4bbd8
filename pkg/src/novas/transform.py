"""NoVaS coefficient families, the forward transformation Y -> W and kurtosis calibration."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import product
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats
from statsmodels.stats.diagnostic import acorr_ljungbox

from .constants import (
    ALPHA_GRID,
    BETA_BOUND,
    C_GRID_BOUNDS,
    C_GRID_SIZE,
    ESCALATION_FACTOR,
    FAST_ALPHA_GRID,
    FAST_GRID_STEP,
    MAX_ESCALATIONS,
    MIN_USABLE_POINTS,
    ORDER_CAP,
    ORDER_FLOOR,
    TAIL_TOLERANCE,
    UNIT_GRID_STEP,
)
from .errors import CalibrationError, DegenerateWindowError, DomainError, PreconditionError
from .series import ReturnSeries, sample_kurtosis, trailing_variances

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-12

# Candidate blocks evaluated per matrix product
_CHUNK = 2048


class MethodKind(str, Enum):
    """NoVaS family or variant."""

    SIMPLE = "simple"
    EXPONENTIAL = "exponential"
    GEN_SIMPLE = "gs"
    GEN_EXPONENTIAL = "ge"
    GA = "ga"
    GEN_EXPONENTIAL_NO_BETA = "ge-nobeta"
    GA_NO_BETA = "ga-nobeta"

    @property
    def has_beta(self) -> bool:
        return self not in (MethodKind.GEN_EXPONENTIAL_NO_BETA, MethodKind.GA_NO_BETA)

    @property
    def alpha_free(self) -> bool:
        """Simple and Exponential NoVaS pin alpha to zero."""
        return self not in (MethodKind.SIMPLE, MethodKind.EXPONENTIAL)

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    MethodKind.SIMPLE: "S",
    MethodKind.EXPONENTIAL: "E",
    MethodKind.GEN_SIMPLE: "GS",
    MethodKind.GEN_EXPONENTIAL: "GE",
    MethodKind.GA: "GA",
    MethodKind.GEN_EXPONENTIAL_NO_BETA: "P-GE",
    MethodKind.GA_NO_BETA: "P-GA",
}


@dataclass(frozen=True)
class CoefficientVector:
    """alpha plus c_0..c_q on the unit simplex; c_0 weights Y_t**2, c_i weights lag i."""

    alpha: float
    c: np.ndarray
    kind: MethodKind
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        if c.ndim != 1 or c.size < 2:
            raise PreconditionError("A coefficient vector needs c_0 and at least one lag")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if np.any(c < 0.0):
            raise DomainError("Coefficients must be nonnegative")
        total = self.alpha + float(c.sum())
        if abs(total - 1.0) > SIMPLEX_TOLERANCE:
            raise DomainError(f"alpha + sum(c) must equal 1, got {total!r}")
        if not self.kind.has_beta and c[0] != 0.0:
            raise DomainError(f"{self.kind.value} has no contemporaneous term, got c_0={c[0]}")

    @property
    def order(self) -> int:
        return self.c.size - 1

    @property
    def c0(self) -> float:
        return float(self.c[0])

    @property
    def bound(self) -> float:
        """Largest attainable |W|; infinite without a contemporaneous term."""
        return 1.0 / math.sqrt(self.c0) if self.c0 > 0.0 else math.inf


@dataclass(frozen=True)
class GAFreeParams:
    """Free parameters of the GARCH(1,1)-derived weights."""

    beta: float
    a1: float
    b1: float

    def __post_init__(self):
        if not 0.0 <= self.b1 < 1.0:
            raise DomainError(f"b1 must lie in [0, 1) for the geometric tail to converge, got {self.b1}")
        if not 0.0 < self.a1 < 1.0:
            raise DomainError(f"a1 must lie in (0, 1), got {self.a1}")
        if not 0.0 <= self.beta < 1.0:
            raise DomainError(f"beta must lie in [0, 1), got {self.beta}")


@dataclass(frozen=True)
class CalibrationGrids:
    """Search grids for alpha and the free coefficient parameters."""

    alpha_grid: Tuple[float, ...] = ALPHA_GRID
    unit_grid_step: float = UNIT_GRID_STEP
    c_grid: Tuple[float, ...] = field(
        default_factory=lambda: tuple(np.geomspace(C_GRID_BOUNDS[0], C_GRID_BOUNDS[1], C_GRID_SIZE))
    )

    def __post_init__(self):
        if not self.alpha_grid:
            raise PreconditionError("alpha_grid must not be empty")
        if any(not 0.0 <= a < 1.0 for a in self.alpha_grid):
            raise DomainError("alpha_grid values must lie in [0, 1)")
        if not 0.0 < self.unit_grid_step <= 0.5:
            raise DomainError(f"unit_grid_step must lie in (0, 0.5], got {self.unit_grid_step}")
        if any(c <= 0.0 for c in self.c_grid):
            raise DomainError("c_grid values must be > 0")
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        object.__setattr__(self, "c_grid", tuple(float(c) for c in self.c_grid))

    @classmethod
    def fast(cls) -> "CalibrationGrids":
        return cls(alpha_grid=FAST_ALPHA_GRID, unit_grid_step=FAST_GRID_STEP)

    def unit_grid(self) -> np.ndarray:
        """Interior points step, 2*step, ... strictly below 1."""
        k = math.ceil(1.0 / self.unit_grid_step - 1e-9)
        return np.round(np.arange(1, k) * self.unit_grid_step, 12)


@dataclass(frozen=True)
class CalibratedTransform:
    """A coefficient vector with the W series it produces on its calibration window."""

    coeffs: CoefficientVector
    objective: float
    w_series: np.ndarray


@dataclass(frozen=True)
class TransformDiagnostics:
    """Kurtosis fit of the W series and Ljung-Box checks on W and W**2."""

    kurtosis: float
    objective: float
    ljung_box_stat: float
    ljung_box_pvalue: float
    ljung_box_sq_stat: float
    ljung_box_sq_pvalue: float


def _clamp_order(order: float) -> int:
    return int(min(max(order, ORDER_FLOOR), ORDER_CAP))


def exponential_order(c: float) -> int:
    """Smallest p with exp(-c p) < tolerance, within [ORDER_FLOOR, ORDER_CAP]."""
    if c <= 0.0:
        return ORDER_CAP
    return _clamp_order(math.floor(-math.log(TAIL_TOLERANCE) / c) + 1)


def ga_order(a1: float, b1: float) -> int:
    """Smallest q with a1 * b1**(q-1) < tolerance, within [ORDER_FLOOR, ORDER_CAP]."""
    if b1 <= 0.0 or a1 < TAIL_TOLERANCE:
        return ORDER_FLOOR
    x = math.log(TAIL_TOLERANCE / a1) / math.log(b1)
    return _clamp_order(math.floor(x) + 2)


def _escalate(order: int, level: int) -> int:
    return order if level == 0 else math.ceil(order * ESCALATION_FACTOR**level)


def _exponential_unscaled(c: float, p: int, with_beta: bool) -> np.ndarray:
    weights = np.exp(-c * np.arange(p + 1))
    if not with_beta:
        weights[0] = 0.0
    return weights


def _ga_unscaled(params: GAFreeParams, q: int, with_beta: bool) -> np.ndarray:
    tail = params.a1 * params.b1 ** np.arange(q)
    head = params.beta / (1.0 - params.b1) if with_beta else 0.0
    return np.concatenate(([head], tail))


def _scaled(alpha: float, unscaled: np.ndarray) -> np.ndarray:
    return unscaled * ((1.0 - alpha) / unscaled.sum())


def build_exponential_coeffs(alpha: float, c: float, p: int, with_beta: bool = True) -> CoefficientVector:
    """Exponentially decaying weights c' e^{-c i}, scaled onto the simplex.

    c = 0 gives the equal weights of simple NoVaS.
    """
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha}")
    if c < 0.0 or not math.isfinite(c):
        raise DomainError(f"Decay rate c must be finite and >= 0, got {c}")
    if p < 1:
        raise DomainError(f"Order p must be >= 1, got {p}")
    if alpha == 0.0:
        kind = MethodKind.EXPONENTIAL if c > 0.0 else MethodKind.SIMPLE
    else:
        kind = MethodKind.GEN_EXPONENTIAL if c > 0.0 else MethodKind.GEN_SIMPLE
    if not with_beta:
        kind = MethodKind.GEN_EXPONENTIAL_NO_BETA
    coeffs = _scaled(alpha, _exponential_unscaled(c, p, with_beta))
    return CoefficientVector(alpha=alpha, c=coeffs, kind=kind, params=(float(c),))


def build_ga_coeffs(alpha: float, params: GAFreeParams, q: int, with_beta: bool = True) -> CoefficientVector:
    """Truncated ARCH(infinity) weights of a GARCH(1,1), scaled by (1 - alpha) / their sum."""
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha}")
    if q < 1:
        raise DomainError(f"Order q must be >= 1, got {q}")
    coeffs = _scaled(alpha, _ga_unscaled(params, q, with_beta))
    kind = MethodKind.GA if with_beta else MethodKind.GA_NO_BETA
    key = (params.beta if with_beta else 0.0, params.a1, params.b1)
    return CoefficientVector(alpha=alpha, c=coeffs, kind=kind, params=key)


def _lag_matrix(y: np.ndarray, q: int) -> np.ndarray:
    """Row j holds Y_t**2, Y_{t-1}**2, ..., Y_{t-q}**2 for t = q + j (0-based)."""
    return sliding_window_view(y**2, q + 1)[:, ::-1]


def _trailing_for(y: np.ndarray, q: int) -> np.ndarray:
    """s^2_{t-1} aligned with the rows of _lag_matrix."""
    return trailing_variances(y)[q - 1 : len(y) - 1]


def _objective(w: np.ndarray) -> float:
    if w.size < 4 or np.ptp(w) == 0.0:
        return math.inf
    return abs(sample_kurtosis(w) - 3.0)


def forward_transform(returns: ReturnSeries, coeffs: CoefficientVector) -> CalibratedTransform:
    """W_t = Y_t / sqrt(c_0 Y_t^2 + alpha s^2_{t-1} + sum_i c_i Y_{t-i}^2) for t = q+1..n."""
    y = returns.values
    q = coeffs.order
    if len(y) <= q:
        raise PreconditionError(f"Need more than q={q} returns, got {len(y)}")
    denom_sq = _lag_matrix(y, q) @ coeffs.c + coeffs.alpha * _trailing_for(y, q)
    zero = np.flatnonzero(denom_sq <= 0.0)
    if zero.size:
        t = int(zero[0]) + q + 1
        raise DegenerateWindowError(f"Transform denominator vanishes at t={t}: all relevant history is zero")
    w = y[q:] / np.sqrt(denom_sq)
    return CalibratedTransform(coeffs=coeffs, objective=_objective(w), w_series=w)


@dataclass
class _Candidate:
    key: Tuple[float, ...]
    coeffs: np.ndarray


@lru_cache(maxsize=64)
def _candidates(kind: MethodKind, alpha: float, grids: CalibrationGrids, level: int) -> Dict[int, List[_Candidate]]:
    """Grid candidates grouped by order, before the c_0 bound is applied."""
    groups: Dict[int, List[_Candidate]] = {}

    def add(order: int, key: Tuple[float, ...], unscaled: np.ndarray) -> None:
        groups.setdefault(order, []).append(_Candidate(key, _scaled(alpha, unscaled)))

    if kind in (MethodKind.SIMPLE, MethodKind.GEN_SIMPLE):
        for p in range(1, _escalate(ORDER_CAP, level) + 1):
            add(p, (float(p),), np.ones(p + 1))
    elif kind in (MethodKind.EXPONENTIAL, MethodKind.GEN_EXPONENTIAL, MethodKind.GEN_EXPONENTIAL_NO_BETA):
        with_beta = kind.has_beta
        for c in grids.c_grid:
            p = _escalate(exponential_order(c), level)
            add(p, (c,), _exponential_unscaled(c, p, with_beta))
    elif kind is MethodKind.GA:
        unit = grids.unit_grid()
        for beta, a1, b1 in product(unit, unit, unit):
            if beta + a1 + b1 >= 1.0 - 1e-9 or beta / (1.0 - b1) < a1:
                continue
            params = GAFreeParams(beta, a1, b1)
            q = _escalate(ga_order(a1, b1), level)
            add(q, (beta, a1, b1), _ga_unscaled(params, q, True))
    elif kind is MethodKind.GA_NO_BETA:
        # a1 cancels under scaling; the smallest grid value wins every tie
        unit = grids.unit_grid()
        a1 = float(unit[0])
        for b1 in unit:
            params = GAFreeParams(0.0, a1, b1)
            q = _escalate(ga_order(a1, b1), level)
            add(q, (0.0, a1, b1), _ga_unscaled(params, q, False))
    else:
        raise PreconditionError(f"Unknown method kind: {kind}")
    return groups


def _score_group(y: np.ndarray, alpha: float, q: int, matrix: np.ndarray) -> np.ndarray:
    """|KURT(W) - 3| for each row of ``matrix`` (candidate coefficient vectors of order q)."""
    lags = _lag_matrix(y, q)
    trailing = alpha * _trailing_for(y, q)
    target = y[q:, None]
    out = np.empty(matrix.shape[0])
    for start in range(0, matrix.shape[0], _CHUNK):
        block = matrix[start : start + _CHUNK]
        denom_sq = lags @ block.T + trailing[:, None]
        w = target / np.sqrt(np.where(denom_sq > 0.0, denom_sq, 1.0))
        ok = np.all(denom_sq > 0.0, axis=0) & (np.ptp(w, axis=0) > 0.0)
        objective = np.full(block.shape[0], math.inf)
        if ok.any():
            objective[ok] = np.abs(stats.kurtosis(w[:, ok], axis=0, fisher=False, bias=True) - 3.0)
        objective[~np.isfinite(objective)] = math.inf
        out[start : start + block.shape[0]] = objective
    return out


def _search(
    y: np.ndarray, alpha: float, groups: Dict[int, List[_Candidate]], bounded: bool
) -> Tuple[Optional[Tuple[float, Tuple[float, ...], np.ndarray]], int]:
    """Best (objective, key, coeffs) over admissible candidates, plus the admissible count."""
    best = None
    admissible = 0
    for q in sorted(groups):
        if len(y) < q + MIN_USABLE_POINTS:
            continue
        members = groups[q]
        if bounded:
            members = [m for m in members if m.coeffs[0] <= BETA_BOUND]
        if not members:
            continue
        admissible += len(members)
        scores = _score_group(y, alpha, q, np.vstack([m.coeffs for m in members]))
        for score, member in zip(scores, members):
            if not math.isfinite(score):
                continue
            if best is None or (score, member.key) < (best[0], best[1]):
                best = (float(score), member.key, member.coeffs)
    return best, admissible


def calibrate(
    returns: ReturnSeries, kind: MethodKind, alpha: float, grids: Optional[CalibrationGrids] = None
) -> CalibratedTransform:
    """Grid-search the coefficients minimizing |KURT(W) - 3| for a fixed alpha.

    Kinds with a contemporaneous term must end with c_0 <= BETA_BOUND; when no grid
    point satisfies it the orders are escalated and the search repeats.
    """
    grids = grids or CalibrationGrids()
    kind = MethodKind(kind)
    if not kind.alpha_free:
        if alpha != 0.0:
            logger.debug("%s pins alpha to 0 (requested %s)", kind.value, alpha)
        alpha = 0.0
    elif alpha not in grids.alpha_grid:
        raise PreconditionError(f"alpha={alpha} is not in the alpha grid {grids.alpha_grid}")
    y = returns.values
    if len(y) < ORDER_FLOOR + MIN_USABLE_POINTS:
        raise PreconditionError(
            f"Calibration needs at least {ORDER_FLOOR + MIN_USABLE_POINTS} returns, got {len(y)}"
        )

    for level in range(MAX_ESCALATIONS + 1):
        groups = _candidates(kind, alpha, grids, level)
        best, admissible = _search(y, alpha, groups, bounded=kind.has_beta)
        if best is not None:
            objective, key, coeffs = best
            if level:
                logger.debug("%s alpha=%s calibrated after %d order escalation(s)", kind.value, alpha, level)
            vector = CoefficientVector(alpha=alpha, c=coeffs, kind=kind, params=key)
            transform = forward_transform(returns, vector)
            logger.debug("%s alpha=%s q=%d objective=%.6g key=%s", kind.value, alpha, vector.order, objective, key)
            return transform
        if not kind.has_beta:
            break
        logger.debug("%s alpha=%s: %d admissible grid points at level %d", kind.value, alpha, admissible, level)

    fallback, _ = _search(y, alpha, _candidates(kind, alpha, grids, 0), bounded=False)
    if fallback is None:
        raise CalibrationError(f"No usable grid point for {kind.value} at alpha={alpha}")
    objective, key, coeffs = fallback
    best = forward_transform(returns, CoefficientVector(alpha=alpha, c=coeffs, kind=kind, params=key))
    raise CalibrationError(
        f"No grid point for {kind.value} at alpha={alpha} satisfies c_0 <= {BETA_BOUND} "
        f"after {MAX_ESCALATIONS} order escalations (best objective {objective:.6g})",
        best_objective=objective,
        best=best,
    )


def inverse_transform(w_series: np.ndarray, prefix: ReturnSeries, coeffs: CoefficientVector) -> ReturnSeries:
    """Rebuild Y_1..Y_n from the first q returns and W_{q+1}..W_n, one step at a time.

    Each step solves the forward equation for Y_t**2 and takes the sign of W_t, so the
    trailing variance can be carried forward exactly as the forward pass computes it.
    """
    q = coeffs.order
    if len(prefix) != q:
        raise PreconditionError(f"Inversion needs exactly q={q} leading returns, got {len(prefix)}")
    w_series = np.asarray(w_series, dtype=float)
    c_lag = coeffs.c[1:]
    y = np.empty(q + w_series.size)
    y[:q] = prefix.values
    total = float(prefix.values.sum())
    total_sq = float(np.sum(prefix.values**2))
    for k, w in enumerate(w_series):
        t = q + k
        s_sq = max(total_sq / t - (total / t) ** 2, 0.0)
        proxy = coeffs.alpha * s_sq + float(c_lag @ (y[t - 1 :: -1][:q] ** 2))
        if coeffs.c0 > 0.0:
            if abs(w) >= coeffs.bound:
                raise DomainError(f"|W| = {abs(w)} at position {k} reaches the bound {coeffs.bound}", index=k)
            y_sq = w * w * proxy / (1.0 - coeffs.c0 * w * w)
        else:
            y_sq = w * w * proxy
        y[t] = math.copysign(math.sqrt(y_sq), w)
        total += y[t]
        total_sq += y[t] ** 2
    return ReturnSeries(y)


def diagnose(transform: CalibratedTransform, lags: int = 10) -> TransformDiagnostics:
    """Normality and serial-correlation summary of a transformed series (no correction is applied)."""
    w = transform.w_series
    lags = max(1, min(lags, w.size - 1))
    lb = acorr_ljungbox(w, lags=[lags], return_df=True)
    lb_sq = acorr_ljungbox(w**2, lags=[lags], return_df=True)
    return TransformDiagnostics(
        kurtosis=sample_kurtosis(w),
        objective=transform.objective,
        ljung_box_stat=float(lb["lb_stat"].iloc[0]),
        ljung_box_pvalue=float(lb["lb_pvalue"].iloc[0]),
        ljung_box_sq_stat=float(lb_sq["lb_stat"].iloc[0]),
        ljung_box_sq_pvalue=float(lb_sq["lb_pvalue"].iloc[0]),
    )


def method_kinds(names: Iterable[str]) -> List[MethodKind]:
    """Parse method names (values or table labels, case-insensitive)."""
    by_label = {k.label.lower(): k for k in MethodKind}
    kinds = []
    for name in names:
        key = name.strip().lower()
        if key in by_label:
            kinds.append(by_label[key])
        else:
            kinds.append(MethodKind(key))
    return kinds
