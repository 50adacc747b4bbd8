"""GARCH(1,1) benchmark: Gaussian quasi-maximum likelihood and h-step forecasts of squared returns."""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, signal, special

from .constants import GARCH_MAX_PERSISTENCE, GARCH_MIN_LENGTH, GARCH_STARTS
from .errors import DegenerateDataError, DomainError, PreconditionError
from .series import ReturnSeries

logger = logging.getLogger(__name__)

# Objective value for parameters outside the admissible region
_PENALTY = 1e10


@dataclass(frozen=True)
class GarchParams:
    omega: float
    a1: float
    b1: float

    def __post_init__(self):
        if not self.omega > 0.0:
            raise DomainError(f"omega must be > 0, got {self.omega}")
        if self.a1 < 0.0 or self.b1 < 0.0:
            raise DomainError(f"a1 and b1 must be >= 0, got a1={self.a1}, b1={self.b1}")
        if self.a1 + self.b1 >= 1.0:
            raise DomainError(f"a1 + b1 must be < 1 for stationarity, got {self.a1 + self.b1}")

    @property
    def persistence(self) -> float:
        return self.a1 + self.b1

    @property
    def long_run_variance(self) -> float:
        return self.omega / (1.0 - self.persistence)


@dataclass(frozen=True)
class GarchFit:
    """Fitted parameters with the in-sample conditional variances sigma^2_1..sigma^2_n."""

    params: GarchParams
    loglik: float
    sigma2_path: np.ndarray
    converged: bool
    mu: float = 0.0

    def forecast(self, last_return: float, h: int) -> np.ndarray:
        """Per-step forecasts following the end of the fitted sample."""
        return forecast_sq_returns(self, (last_return - self.mu) ** 2, float(self.sigma2_path[-1]), h)


def conditional_variances(params: GarchParams, y: np.ndarray) -> np.ndarray:
    """sigma^2_t = omega + a1 Y^2_{t-1} + b1 sigma^2_{t-1}, started at the sample variance."""
    y = np.asarray(y, dtype=float)
    sigma2_1 = float(np.var(y))
    if y.size == 1:
        return np.array([sigma2_1])
    drive = params.omega + params.a1 * y[:-1] ** 2
    rest, _ = signal.lfilter([1.0], [1.0, -params.b1], drive, zi=[params.b1 * sigma2_1])
    return np.concatenate(([sigma2_1], rest))


def loglik(params: GarchParams, y: np.ndarray) -> float:
    """Gaussian quasi log-likelihood without the constant term."""
    y = np.asarray(y, dtype=float)
    sigma2 = conditional_variances(params, y)
    if np.any(sigma2 <= 0.0):
        return -math.inf
    return float(-0.5 * np.sum(np.log(sigma2) + y**2 / sigma2))


def _unpack(theta: np.ndarray) -> tuple:
    return math.exp(theta[0]), float(special.expit(theta[1])), float(special.expit(theta[2]))


def _negative_loglik(theta: np.ndarray, y: np.ndarray, y2_prev: np.ndarray, sigma2_1: float) -> float:
    if not np.all(np.isfinite(theta)) or theta[0] > 700.0:
        return _PENALTY
    omega, a1, b1 = _unpack(theta)
    excess = a1 + b1 - GARCH_MAX_PERSISTENCE
    penalty = 1e4 * excess**2 if excess > 0.0 else 0.0
    rest, _ = signal.lfilter([1.0], [1.0, -b1], omega + a1 * y2_prev, zi=[b1 * sigma2_1])
    sigma2 = np.concatenate(([sigma2_1], rest))
    if not np.all(sigma2 > 0.0) or not np.all(np.isfinite(sigma2)):
        return _PENALTY
    value = 0.5 * float(np.sum(np.log(sigma2) + y**2 / sigma2)) + penalty
    return value if math.isfinite(value) else _PENALTY


def fit_garch11(returns: ReturnSeries, demean: bool = False) -> GarchFit:
    """Fit GARCH(1,1) by Gaussian quasi-maximum likelihood.

    The search runs over (log omega, logit a1, logit b1) from several fixed starting
    points, each refined with Nelder-Mead then L-BFGS-B; the best likelihood wins. A fit
    whose optimizer never reported success is returned with ``converged=False``.

    Args:
        returns: the sample Y_1..Y_n (n >= 50).
        demean: subtract the sample mean first; returns are otherwise taken as zero-mean.

    Returns:
        The fit, with ``sigma2_path`` computed from the fitted parameters.
    """
    y = np.asarray(returns.values if isinstance(returns, ReturnSeries) else returns, dtype=float)
    if y.size < GARCH_MIN_LENGTH:
        raise PreconditionError(f"GARCH fitting needs at least {GARCH_MIN_LENGTH} returns, got {y.size}")
    if np.ptp(y) == 0.0:
        raise DegenerateDataError("Cannot fit GARCH(1,1) to a constant series")
    mu = float(y.mean()) if demean else 0.0
    y = y - mu
    sigma2_1 = float(np.var(y))
    y2_prev = y[:-1] ** 2
    args = (y, y2_prev, sigma2_1)

    best: Optional[optimize.OptimizeResult] = None
    converged = False
    for a1, b1 in GARCH_STARTS:
        x0 = np.array([math.log(sigma2_1 * (1.0 - a1 - b1)), special.logit(a1), special.logit(b1)])
        coarse = optimize.minimize(
            _negative_loglik, x0, args=args, method="Nelder-Mead", options={"maxiter": 2000, "xatol": 1e-8}
        )
        polished = optimize.minimize(_negative_loglik, coarse.x, args=args, method="L-BFGS-B")
        result = polished if polished.fun <= coarse.fun else coarse
        logger.debug("GARCH start a1=%s b1=%s: -loglik=%.8g success=%s", a1, b1, result.fun, result.success)
        if best is None or result.fun < best.fun:
            best = result
            converged = bool(coarse.success or polished.success)

    omega, a1, b1 = _unpack(best.x)
    if a1 + b1 >= 1.0:
        scale = GARCH_MAX_PERSISTENCE / (a1 + b1)
        a1, b1 = a1 * scale, b1 * scale
        converged = False
    params = GarchParams(omega, a1, b1)
    if not converged:
        logger.warning("GARCH(1,1) fit did not converge; using best parameters found (%s)", params)
    return GarchFit(
        params=params,
        loglik=loglik(params, y),
        sigma2_path=conditional_variances(params, y),
        converged=converged,
        mu=mu,
    )


def forecast_sq_returns(fit: GarchFit, last_y2: float, last_sigma2: float, h: int) -> np.ndarray:
    """E[Y^2_{n+1}], ..., E[Y^2_{n+h}] from the variance recursion."""
    if h < 1:
        raise PreconditionError(f"Forecast horizon must be >= 1, got {h}")
    p = fit.params
    out = np.empty(h)
    out[0] = p.omega + p.a1 * last_y2 + p.b1 * last_sigma2
    for j in range(1, h):
        out[j] = p.omega + p.persistence * out[j - 1]
    return out
