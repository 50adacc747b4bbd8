"""Utility functions."""

import os
from typing import Optional

import numpy as np

from .constants import DEFAULT_PATHS, DEFAULT_SEED, PATHS_VAR, SEED_VAR, THREADS_VAR
from .errors import ConfigError


def env_int(name: str, default: int, minimum: Optional[int] = None) -> int:
    """Read an integer environment variable at call time; unset or blank gives ``default``."""
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigError(f"{name} must be an integer, got: {raw}") from e
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got: {value}")
    return value


def default_paths() -> int:
    return env_int(PATHS_VAR, DEFAULT_PATHS, minimum=1)


def default_seed() -> int:
    return env_int(SEED_VAR, DEFAULT_SEED)


def resolve_workers(requested: Optional[int]) -> int:
    """Return the worker pool size: explicit request, else NOVAS_THREADS, else available CPUs."""
    if requested is not None and requested > 0:
        return requested
    value = env_int(THREADS_VAR, 0)
    if value > 0:
        return value
    return os.cpu_count() or 1


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one (seed, key...) cell.

    Streams are derived from the key alone, so the draws a task sees do not depend on
    which worker runs it or in which order.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))
