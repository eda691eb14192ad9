from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional, Tuple

import numpy as np

from core.exceptions import InputError


@dataclass(frozen=True)
class QuantileLevels:
    """Strictly increasing quantile levels inside (0, 1)"""

    values: Tuple[float, ...]

    def __post_init__(self):
        try:
            levels = tuple(float(v) for v in self.values)
        except (TypeError, ValueError) as e:
            raise InputError(f"Quantile levels must be numeric: {e}") from e

        if not levels:
            raise InputError("At least one quantile level is required")
        for level in levels:
            if not np.isfinite(level) or not 0.0 < level < 1.0:
                raise InputError(f"Quantile level {level} is outside (0, 1)")
        for lower, upper in zip(levels, levels[1:]):
            if not lower < upper:
                raise InputError(
                    f"Quantile levels must be strictly increasing, got {lower} before {upper}"
                )
        object.__setattr__(self, "values", levels)

    @classmethod
    def of(cls, *levels) -> "QuantileLevels":
        if len(levels) == 1 and not np.isscalar(levels[0]):
            levels = tuple(levels[0])
        return cls(tuple(levels))

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def d_a(self) -> float:
        """Smallest distance from any level to 0 or 1"""
        return min(min(level, 1.0 - level) for level in self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def index_of(self, level: float, atol: float = 1e-12) -> int:
        for index, value in enumerate(self.values):
            if abs(value - level) <= atol:
                return index
        raise InputError(f"Quantile level {level} is not among {list(self.values)}")

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass
class Forecast:
    """One step's forecast as produced by a tracker variant.

    `q` is the revealed forecast. `raw` is b + hidden before any ordering.
    `played` is the offset the variant plays internally and `gradient_point`
    is the forecast vector whose coverage drives the update.
    """

    base: np.ndarray
    q: np.ndarray
    raw: np.ndarray
    played: np.ndarray
    gradient_point: np.ndarray


@dataclass
class TrackerState:
    hidden: np.ndarray
    played: np.ndarray
    delay_buffer: Deque[Tuple[np.ndarray, np.ndarray]] = field(default_factory=deque)
    step_index: int = 1
    lr_window: Deque[np.ndarray] = field(default_factory=deque)


@dataclass
class StepRecord:
    t: int
    base: np.ndarray
    y: float
    q: np.ndarray
    raw: np.ndarray
    played: np.ndarray
    hidden: np.ndarray
    coverage: np.ndarray
    gradient: np.ndarray
    loss: float
    eta: float


@dataclass
class PredictionInterval:
    """Half-open interval (lower, upper] with miscoverage target alpha"""

    alpha: float
    lower: float
    upper: float

    @property
    def is_empty(self) -> bool:
        return not self.lower < self.upper

    def contains(self, y: float) -> bool:
        return self.lower < y <= self.upper

    def is_within(self, other: "PredictionInterval") -> bool:
        if self.is_empty:
            return True
        return other.lower <= self.lower and self.upper <= other.upper


@dataclass
class SeriesData:
    levels: QuantileLevels
    times: List[str]
    base: np.ndarray
    y: np.ndarray
    level_columns: List[str]
    time_column: str = "t"
    repaired_steps: int = 0
    source: Optional[str] = None

    @property
    def horizon(self) -> int:
        return int(self.y.size)

    def pairs(self):
        return zip(self.base, self.y)
