"""Time-series primitives: log-returns, trailing variance, kurtosis and rolling windows."""

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .errors import DegenerateDataError, DomainError, PreconditionError


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PriceSeries:
    """Closing prices, optionally labelled by date."""

    values: np.ndarray
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1 or len(values) < 2:
            raise PreconditionError(f"A price series needs at least 2 points, got {values.size}")
        bad = np.flatnonzero(~np.isfinite(values) | (values <= 0))
        if bad.size:
            i = int(bad[0])
            raise DomainError(f"Price at index {i} must be finite and > 0, got {values[i]!r}", index=i)
        if self.labels is not None and len(self.labels) != len(values):
            raise PreconditionError(f"Got {len(self.labels)} labels for {len(values)} prices")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ReturnSeries:
    """Percent log-returns (100 times the log price ratio)."""

    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1:
            raise PreconditionError("A return series must be one-dimensional")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            i = int(bad[0])
            raise DomainError(f"Return at index {i} is not finite", index=i)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def squared(self) -> np.ndarray:
        """Y_t**2 for every observation."""
        return self.values**2


@dataclass(frozen=True)
class TrailingStats:
    """Mean and population variance of Y_1..Y_{t-1}."""

    s_sq: float
    mu: float = field(default=0.0)


def to_log_returns(prices: PriceSeries) -> ReturnSeries:
    """Y_t = 100 * log(X_{t+1} / X_t); one value shorter than the prices."""
    if not isinstance(prices, PriceSeries):
        prices = PriceSeries(prices)
    return ReturnSeries(100.0 * np.diff(np.log(prices.values)))


def trailing_stats(returns: ReturnSeries, t: int) -> TrailingStats:
    """Trailing statistics available at time t (1-based), i.e. over Y_1..Y_{t-1}.

    The variance uses the population divisor (t - 1).
    """
    m = t - 1
    if m < 1 or m > len(returns):
        raise PreconditionError(f"trailing_stats needs 1 <= t-1 <= {len(returns)}, got t={t}")
    prefix = returns.values[:m]
    mu = float(prefix.mean())
    return TrailingStats(s_sq=float(np.mean((prefix - mu) ** 2)), mu=mu)


def trailing_variances(values: np.ndarray) -> np.ndarray:
    """Element k is the population variance of values[0..k] (expanding window)."""
    out = pd.Series(values, dtype=float).expanding(min_periods=1).var(ddof=0).to_numpy()
    return np.maximum(out, 0.0)


def sample_kurtosis(xs: Sequence[float]) -> float:
    """Raw (non-excess) kurtosis m4 / m2**2 from central sample moments."""
    arr = np.asarray(xs, dtype=float)
    if arr.size < 4:
        raise PreconditionError(f"Kurtosis needs at least 4 points, got {arr.size}")
    if np.mean((arr - arr.mean()) ** 2) <= 0.0:
        raise DegenerateDataError("Kurtosis is undefined for a zero-variance sample")
    return float(stats.kurtosis(arr, fisher=False, bias=True))


def rolling_windows(returns: ReturnSeries, width: int) -> Iterator[Tuple[ReturnSeries, int]]:
    """Return an iterator of (window, target) pairs, advancing by one point.

    ``target`` is the 1-based index of the first point after the window, so the first
    pair is (Y_1..Y_width, width + 1). The width is checked before anything is yielded.
    """
    n = len(returns)
    if width < 1 or width >= n:
        raise PreconditionError(f"Window width {width} must be in [1, {n - 1}] for a series of length {n}")
    return _windows(returns.values, width)


def _windows(values: np.ndarray, width: int) -> Iterator[Tuple[ReturnSeries, int]]:
    for start in range(len(values) - width):
        yield ReturnSeries(values[start : start + width]), start + width + 1
