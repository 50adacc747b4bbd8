"""Seeded data-generating processes: time-varying, standard, exponential and GJR GARCH(1,1)."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .constants import BURN_IN
from .errors import PreconditionError
from .series import PriceSeries, ReturnSeries, to_log_returns
from .utils import default_seed, substream

logger = logging.getLogger(__name__)

MODEL_IDS = range(1, 9)

# Student-t degrees of freedom for Model 5
T_DOF = 5

_INTERCEPT = 1e-5
_EGARCH = {"omega": _INTERCEPT, "beta": 0.8895, "theta": 0.1, "gamma": 0.3}
_GAUSSIAN_ABS_MEAN = math.sqrt(2.0 / math.pi)

MODEL_NAMES = {
    1: "time-varying GARCH(1,1), Gaussian errors",
    2: "time-varying GARCH(1,1) with low intercept, Gaussian errors",
    3: "GARCH(1,1), Gaussian errors",
    4: "near-integrated GARCH(1,1), Gaussian errors",
    5: "GARCH(1,1), Student-t(5) errors",
    6: "EGARCH(1,1), Gaussian errors",
    7: "GJR-GARCH(1,1), Gaussian errors",
    8: "GJR-GARCH(1,1) with positive leverage, Gaussian errors",
}


class SimMode(str, Enum):
    """How a generated X series becomes percent log-returns."""

    RETURNS = "returns"
    PRICES = "prices"


@dataclass(frozen=True)
class SimModelSpec:
    model_id: int
    n: int = 500
    seed: int = field(default_factory=default_seed)

    def __post_init__(self):
        if self.model_id not in MODEL_IDS:
            raise PreconditionError(f"model_id must be in 1..8, got {self.model_id}")
        if self.n < 2:
            raise PreconditionError(f"n must be >= 2, got {self.n}")

    @property
    def name(self) -> str:
        return MODEL_NAMES[self.model_id]


@dataclass(frozen=True)
class GarchCoefficients:
    """sigma^2_t = omega + beta sigma^2_{t-1} + (alpha + gamma I_{t-1}) X^2_{t-1}, I = 1 iff X <= 0."""

    omega: float
    alpha: float
    beta: float
    gamma: float = 0.0

    def next_variance(self, sigma2: float, x: float) -> float:
        load = self.alpha + (self.gamma if x <= 0.0 else 0.0)
        return self.omega + self.beta * sigma2 + load * x * x

    def unconditional_variance(self, innovation_variance: float = 1.0) -> float:
        """Stationary variance for symmetric innovations, or the intercept when none exists."""
        persistence = self.beta + (self.alpha + 0.5 * self.gamma) * innovation_variance
        if persistence >= 1.0:
            return _INTERCEPT
        return self.omega / (1.0 - persistence)


def model_coefficients(model_id: int, t: int, n: int) -> GarchCoefficients:
    """Coefficients of the GARCH-type Models 1-5, 7, 8 at time t; g_t = t/n, clamped at 0 before t = 1."""
    g = max(t, 0) / n
    if model_id == 1:
        return GarchCoefficients(
            omega=-4.0 * math.sin(0.5 * math.pi * g) + 5.0,
            alpha=-((g - 0.3) ** 2) + 0.5,
            beta=0.2 * math.sin(0.5 * math.pi * g) + 0.2,
        )
    if model_id == 2:
        return GarchCoefficients(omega=_INTERCEPT, alpha=0.1 - 0.05 * g, beta=0.73 + 0.2 * g)
    if model_id in (3, 5):
        return GarchCoefficients(omega=_INTERCEPT, alpha=0.1, beta=0.73)
    if model_id == 4:
        return GarchCoefficients(omega=_INTERCEPT, alpha=0.1, beta=0.8895)
    if model_id == 7:
        return GarchCoefficients(omega=_INTERCEPT, alpha=0.5, beta=0.5, gamma=-0.5)
    if model_id == 8:
        return GarchCoefficients(omega=_INTERCEPT, alpha=0.1, beta=0.73, gamma=0.3)
    raise PreconditionError(f"Model {model_id} has no GARCH(1,1) coefficients")


def egarch_next_log_variance(log_sigma2: float, eps: float) -> float:
    """log sigma^2_t from log sigma^2_{t-1} and the previous standardized shock."""
    p = _EGARCH
    return p["omega"] + p["beta"] * log_sigma2 + p["theta"] * eps + p["gamma"] * (abs(eps) - _GAUSSIAN_ABS_MEAN)


def _innovations(sim: SimModelSpec) -> np.ndarray:
    rng = substream(sim.seed, sim.model_id)
    size = BURN_IN + sim.n
    if sim.model_id == 5:
        return rng.standard_t(T_DOF, size=size)
    return rng.standard_normal(size)


@dataclass(frozen=True)
class SimulatedPath:
    """Generated returns with the conditional variance each was drawn at."""

    returns: ReturnSeries
    sigma2: np.ndarray


def simulate_path(sim: SimModelSpec) -> SimulatedPath:
    """Simulate X_1..X_n after discarding BURN_IN steps run with the t = 0 coefficients."""
    eps = _innovations(sim)
    x = np.empty(eps.size)
    sigma2 = np.empty(eps.size)
    if sim.model_id == 6:
        log_sigma2 = _EGARCH["omega"] / (1.0 - _EGARCH["beta"])
        for k, e in enumerate(eps):
            if k:
                log_sigma2 = egarch_next_log_variance(log_sigma2, eps[k - 1])
            sigma2[k] = math.exp(log_sigma2)
            x[k] = math.sqrt(sigma2[k]) * e
    else:
        innovation_variance = T_DOF / (T_DOF - 2.0) if sim.model_id == 5 else 1.0
        current = model_coefficients(sim.model_id, 0, sim.n).unconditional_variance(innovation_variance)
        for k, e in enumerate(eps):
            if k:
                coeffs = model_coefficients(sim.model_id, k - BURN_IN + 1, sim.n)
                current = coeffs.next_variance(current, x[k - 1])
            sigma2[k] = current
            x[k] = math.sqrt(current) * e
    logger.debug("Generated model %d (%s), n=%d, seed=%d", sim.model_id, sim.name, sim.n, sim.seed)
    return SimulatedPath(ReturnSeries(x[BURN_IN:]), sigma2[BURN_IN:])


def generate(sim: SimModelSpec) -> ReturnSeries:
    return simulate_path(sim).returns


def prices_from_returns(x: ReturnSeries, start: float = 100.0) -> PriceSeries:
    """Price path start * exp(X_1 + ... + X_t), labelled 1..n."""
    values = start * np.exp(np.cumsum(x.values))
    return PriceSeries(values, labels=tuple(str(i) for i in range(1, len(values) + 1)))


def as_percent_returns(x: ReturnSeries, mode: SimMode = SimMode.RETURNS) -> ReturnSeries:
    """Harness input Y from a generated X series; both modes give n - 1 returns.

    ``returns`` takes Y_t = 100 X_{t+1}; ``prices`` builds the exponentiated price path
    and log-differences it.
    """
    if SimMode(mode) is SimMode.PRICES:
        return to_log_returns(prices_from_returns(x))
    return ReturnSeries(100.0 * x.values[1:])
