"""CSV ingestion and emission, plus the run manifest."""

import json
import logging
import os
from importlib.metadata import PackageNotFoundError, version
from typing import Any, Dict, TextIO, Union

import numpy as np
import pandas as pd

from .errors import DomainError, FormatError
from .series import PriceSeries, ReturnSeries

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ["date", "close"]
RETURN_COLUMNS = ["t", "return"]
FORECAST_PAIR_COLUMNS = ["actual", "small", "large"]

# 17 significant digits round-trip every double exactly
FLOAT_FORMAT = "%.17g"

_VERSIONED = ("novas-forecast", "numpy", "scipy", "pandas", "statsmodels")


def _read_table(path: str) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise FormatError(f"Input file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError as e:
        raise FormatError(f"{path} is empty", line=1) from e
    except pd.errors.ParserError as e:
        raise FormatError(f"{path}: {e}") from e
    frame.columns = [c.strip().lower() for c in frame.columns]
    # blank lines come back as NaN even with keep_default_na=False
    return frame.fillna("")


def _parse_column(frame: pd.DataFrame, column: str, path: str) -> np.ndarray:
    out = np.empty(len(frame))
    for i, raw in enumerate(frame[column]):
        # header is line 1
        line = i + 2
        text = raw.strip()
        if not text:
            raise FormatError(f"{path}:{line}: empty {column} field", line=line)
        try:
            out[i] = float(text)
        except ValueError as e:
            raise FormatError(f"{path}:{line}: cannot parse {column} value {raw!r}", line=line) from e
    return out


def _check_header(frame: pd.DataFrame, expected: list, path: str) -> None:
    if list(frame.columns) != expected:
        raise FormatError(f"{path}: expected header {','.join(expected)}, got {','.join(frame.columns)}", line=1)
    if frame.empty:
        raise FormatError(f"{path} has a header but no rows", line=2)


def ingest_csv(path: str) -> PriceSeries:
    """Read a ``date,close`` file into a PriceSeries, keeping the dates as labels."""
    frame = _read_table(path)
    _check_header(frame, PRICE_COLUMNS, path)
    closes = _parse_column(frame, "close", path)
    try:
        prices = PriceSeries(closes, labels=tuple(d.strip() for d in frame["date"]))
    except DomainError as e:
        if e.index is None:
            raise
        raise DomainError(f"{path}:{e.index + 2}: {e}", index=e.index) from e
    logger.info("Read %d prices from %s", len(prices), path)
    return prices


def read_returns_csv(path: str) -> ReturnSeries:
    """Read a ``t,return`` file."""
    frame = _read_table(path)
    _check_header(frame, RETURN_COLUMNS, path)
    values = _parse_column(frame, "return", path)
    try:
        returns = ReturnSeries(values)
    except DomainError as e:
        raise DomainError(f"{path}:{(e.index or 0) + 2}: {e}", index=e.index) from e
    logger.info("Read %d returns from %s", len(returns), path)
    return returns


def read_series(path: str) -> Union[PriceSeries, ReturnSeries]:
    """Read either CSV layout, chosen by the header row."""
    frame = _read_table(path)
    if list(frame.columns) == RETURN_COLUMNS:
        return read_returns_csv(path)
    return ingest_csv(path)


def read_forecast_pairs(path: str) -> Dict[str, np.ndarray]:
    """Read an ``actual,small,large`` file of realized values and two models' forecasts."""
    frame = _read_table(path)
    _check_header(frame, FORECAST_PAIR_COLUMNS, path)
    return {column: _parse_column(frame, column, path) for column in FORECAST_PAIR_COLUMNS}


def _write(frame: pd.DataFrame, path: Union[str, TextIO]) -> None:
    if isinstance(path, str):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    if isinstance(path, str):
        logger.info("Wrote %s", path)


def write_returns_csv(returns: ReturnSeries, path: Union[str, TextIO]) -> None:
    """Write a t,return table with t counted from 1."""
    _write(pd.DataFrame({"t": np.arange(1, len(returns) + 1), "return": returns.values}), path)


def write_prices_csv(prices: PriceSeries, path: Union[str, TextIO]) -> None:
    """Write a date,close table; unlabelled prices get 1..n as dates."""
    labels = prices.labels or tuple(str(i) for i in range(1, len(prices) + 1))
    _write(pd.DataFrame({"date": list(labels), "close": prices.values}), path)


def write_frame(frame: pd.DataFrame, path: str) -> None:
    _write(frame, path)


def package_versions() -> Dict[str, str]:
    """Installed versions of novas and its numeric dependencies, 'unknown' when not installed."""
    out = {}
    for name in _VERSIONED:
        try:
            out[name] = version(name)
        except PackageNotFoundError:
            out[name] = "unknown"
    return out


def write_manifest(path: str, settings: Dict[str, Any]) -> None:
    """Record package versions and run settings as sorted JSON (no timestamps)."""
    payload = {"versions": package_versions(), "settings": settings}
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    logger.info("Wrote %s", path)
