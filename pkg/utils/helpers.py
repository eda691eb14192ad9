import math
import re
from typing import Iterable, Optional, Tuple

import numpy as np

from core.exceptions import InputError

LEVEL_COLUMN_PATTERN = re.compile(r"^q_(?P<level>.+)$")
COVERAGE_COLUMN_PREFIX = "cov_"


def as_finite_vector(values, name="vector", allow_empty=False) -> np.ndarray:
    """Convert input to a 1-d float array and reject NaN/inf entries"""
    try:
        array = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as e:
        raise InputError(f"{name} must be numeric: {e}") from e

    if array.ndim == 0:
        array = array.reshape(1)
    if array.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {array.shape}")
    if array.size == 0 and not allow_empty:
        raise InputError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(array)):
        raise InputError(f"{name} contains non-finite entries")
    return array


def as_finite_scalar(value, name="value") -> float:
    try:
        number = float(value)
    except (TypeError, ValueError) as e:
        raise InputError(f"{name} must be a real number: {e}") from e
    if not math.isfinite(number):
        raise InputError(f"{name} must be finite, got {value}")
    return number


def check_same_length(left: np.ndarray, right: np.ndarray, left_name: str, right_name: str):
    if left.shape != right.shape:
        raise InputError(
            f"Length mismatch: {left_name} has {left.size} entries, {right_name} has {right.size}"
        )


def format_float(value: float) -> str:
    """Shortest decimal string that parses back to the same double"""
    return repr(float(value))


def format_level(level: float) -> str:
    return format_float(level)


def parse_level_column(column: str) -> Optional[Tuple[str, str]]:
    """Split a `q_<level>` header into (column, level text); None for other columns"""
    match = LEVEL_COLUMN_PATTERN.match(column.strip())
    if not match:
        return None
    return column, match.group("level")


def level_column_name(level: float) -> str:
    return f"q_{format_level(level)}"


def coverage_column_name(level: float) -> str:
    return f"{COVERAGE_COLUMN_PREFIX}{format_level(level)}"


def parse_eta_grid(text: str) -> list:
    """Parse a comma separated list of positive learning rates"""
    grid = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            eta = float(item)
        except ValueError as e:
            raise InputError(f"Invalid learning rate '{item}' in grid") from e
        if not math.isfinite(eta) or eta <= 0:
            raise InputError(f"Learning rates must be positive and finite, got {item}")
        grid.append(eta)
    if not grid:
        raise InputError("Learning-rate grid is empty")
    return grid


def parse_float_list(text: Optional[str], name: str) -> Optional[list]:
    if text is None:
        return None
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        values.append(as_finite_scalar(item, name))
    return values


def log_grid(start: int, stop: int, num: int) -> Iterable[int]:
    """Distinct integers spaced evenly on a log scale between start and stop"""
    points = np.unique(np.round(np.geomspace(start, stop, num)).astype(int))
    return [int(p) for p in points]
