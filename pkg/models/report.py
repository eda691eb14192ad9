from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from utils.helpers import format_level


@dataclass
class RegretResult:
    value: float
    played_loss: float
    comparator_loss: float
    comparator: List[float]
    comparator_kind: str
    fallback: bool = False

    def to_dict(self) -> Dict:
        return {
            "value": self.value,
            "played_loss": self.played_loss,
            "comparator_loss": self.comparator_loss,
            "comparator": list(self.comparator),
            "comparator_kind": self.comparator_kind,
            "comparator_fallback": self.fallback,
        }


@dataclass
class BoundCheck:
    name: str
    value: float
    observed: float
    applies: bool

    @property
    def held(self) -> bool:
        return self.observed <= self.value

    def to_dict(self) -> Dict:
        return {
            "value": self.value,
            "observed": self.observed,
            "held": self.held,
            "applies": self.applies,
        }


@dataclass
class RunReport:
    variant: str
    levels: List[float]
    horizon: int
    coverage: List[float]
    calibration_error: float
    quantile_loss: float
    crossing_fraction: float
    pit_entropy: Optional[float]
    pit_degenerate_steps: int
    regret: Optional[RegretResult]
    average_gradient_norm: float
    residual_bound: float
    bounds: Dict[str, BoundCheck] = field(default_factory=dict)
    repaired_steps: int = 0
    generated_at: Optional[str] = None

    @property
    def coverage_gaps(self) -> List[float]:
        return [abs(c - a) for c, a in zip(self.coverage, self.levels)]

    @property
    def max_coverage_gap(self) -> float:
        return max(self.coverage_gaps) if self.coverage_gaps else 0.0

    def to_dict(self) -> Dict:
        report = {
            "variant": self.variant,
            "levels": list(self.levels),
            "horizon": self.horizon,
            "coverage": {format_level(a): c for a, c in zip(self.levels, self.coverage)},
            "calibration_error": self.calibration_error,
            "max_coverage_gap": self.max_coverage_gap,
            "quantile_loss": self.quantile_loss,
            "crossing_fraction": self.crossing_fraction,
            "pit_entropy": self.pit_entropy,
            "pit_degenerate_steps": self.pit_degenerate_steps,
            "regret": self.regret.to_dict() if self.regret else None,
            "average_gradient_norm": self.average_gradient_norm,
            "residual_bound": self.residual_bound,
            "bounds": {name: check.to_dict() for name, check in self.bounds.items()},
            "repaired_base_steps": self.repaired_steps,
        }
        if self.generated_at is not None:
            report["generated_at"] = self.generated_at
        return report


@dataclass
class AdversarialScenario:
    kind: str
    levels: List[float]
    eta: float
    y: np.ndarray
    residual_bound: float
    failing_variants: List[str]
    params: Dict = field(default_factory=dict)
    cycle_length: Optional[int] = None
    eps: float = 0.0
    init_offset: Optional[List[float]] = None

    @property
    def horizon(self) -> int:
        return int(self.y.size)

    @property
    def base(self) -> np.ndarray:
        return np.zeros((self.horizon, len(self.levels)))


@dataclass
class ComparisonRow:
    variant: str
    coverage: List[float]
    max_gap: float
    calibration_bound: float
    within_bound: bool
    hidden_spread: float

    def to_dict(self) -> Dict:
        return {
            "variant": self.variant,
            "coverage": list(self.coverage),
            "max_gap": self.max_gap,
            "calibration_bound": self.calibration_bound,
            "within_bound": self.within_bound,
            "final_hidden_spread": self.hidden_spread,
        }
