from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import Config

HEURISTIC_DEFAULTS = Config.get_learning_rate_heuristic()


class VariantKind(str, Enum):
    QT_INDEPENDENT = "qt_independent"
    MULTIQT = "multiqt"
    MULTIQT_DELAYED = "multiqt_delayed"
    PROJECTED_GD = "projected_gd"
    POSTHOC_SORT = "posthoc_sort"
    POSTHOC_ISOTONIC = "posthoc_isotonic"
    MULTIQT_SORT = "multiqt_sort"
    MULTIQT_EPS = "multiqt_eps"


# Variants whose base forecasts must be ordered
ORDERED_FAMILY = {
    VariantKind.MULTIQT,
    VariantKind.MULTIQT_DELAYED,
    VariantKind.PROJECTED_GD,
    VariantKind.MULTIQT_SORT,
    VariantKind.MULTIQT_EPS,
}

# Variants covered by the calibration and regret guarantees
GUARANTEED_FAMILY = {VariantKind.MULTIQT, VariantKind.MULTIQT_DELAYED}

# Variants that evaluate the gradient at the unordered hidden iterate
HIDDEN_GRADIENT_FAMILY = {
    VariantKind.QT_INDEPENDENT,
    VariantKind.POSTHOC_SORT,
    VariantKind.POSTHOC_ISOTONIC,
}


class LearningRateHeuristic(BaseModel):
    """Trailing-residual learning rate: max(factor * quantile(window), floor)"""

    model_config = ConfigDict(frozen=True)

    window: int = Field(default=HEURISTIC_DEFAULTS["window"], gt=0)
    quantile: float = Field(default=HEURISTIC_DEFAULTS["quantile"], gt=0, le=1)
    factor: float = Field(default=HEURISTIC_DEFAULTS["factor"], gt=0)
    floor: float = Field(default=HEURISTIC_DEFAULTS["floor"], gt=0)


class VariantSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: VariantKind
    eta: Optional[float] = Field(default=None, gt=0, allow_inf_nan=False)
    heuristic: Optional[LearningRateHeuristic] = None
    delay: int = Field(default=0, ge=0)
    eps: float = Field(default=0.0, ge=0, allow_inf_nan=False)

    @model_validator(mode="after")
    def check_variant(self):
        if (self.eta is None) == (self.heuristic is None):
            raise ValueError("Exactly one of a fixed eta or the learning-rate heuristic is required")
        if self.delay > 0 and self.kind == VariantKind.PROJECTED_GD:
            raise ValueError("projected_gd does not support delayed feedback")
        if self.eps > 0 and self.kind != VariantKind.MULTIQT_EPS:
            raise ValueError(f"eps only applies to multiqt_eps, not {self.kind.value}")
        return self

    @property
    def requires_ordered_base(self) -> bool:
        return self.kind in ORDERED_FAMILY

    @property
    def is_guaranteed(self) -> bool:
        return self.kind in GUARANTEED_FAMILY

    @property
    def gradient_point(self) -> str:
        """Where the subgradient is evaluated: 'hidden' or 'played'"""
        return "hidden" if self.kind in HIDDEN_GRADIENT_FAMILY else "played"

    @property
    def label(self) -> str:
        parts = [self.kind.value]
        if self.delay:
            parts.append(f"D={self.delay}")
        if self.kind == VariantKind.MULTIQT_EPS:
            parts.append(f"eps={self.eps!r}")
        parts.append(f"eta={self.eta!r}" if self.eta is not None else "eta=heuristic")
        return " ".join(parts)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    input_path: Path
    output_dir: Path
    variant: VariantSpec
    init_offset: Optional[List[float]] = None
    repair_base: Optional[Literal["isotonic"]] = None
    pit_bins: int = Field(default=Config.PIT_CONFIG["bins"], ge=2)
    comparator: Literal["empirical", "zero"] = "empirical"
    write_plot_data: bool = True
    timestamp: bool = False
