"""Online descent engines behind one stepping interface.

Every variant keeps a hidden offset and plays an offset derived from it.
The variants differ in how the revealed forecast is built from b + hidden,
where the subgradient is evaluated, and what the hidden offset is reset to.

=================  ======================  ==================  =========================
kind               revealed forecast       gradient point      hidden update
=================  ======================  ==================  =========================
qt_independent     b + hidden              b + hidden          hidden - eta * g
multiqt(_delayed)  pava(b + hidden)        revealed            hidden - eta * g
projected_gd       pava(b + hidden)        revealed            played - eta * g
posthoc_sort       sort(b + hidden)        b + hidden          hidden - eta * g
posthoc_isotonic   pava(b + hidden)        b + hidden          hidden - eta * g
multiqt_sort       sort(b + hidden)        revealed            hidden - eta * g
multiqt_eps        eps-separated proj.     revealed            hidden - eta * g
=================  ======================  ==================  =========================
"""

import logging
from collections import deque
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import InputError
from core.isotonic import is_ordered, pava, separated_projection
from core.losses import aggregated_quantile_loss, coverage_indicators, gradient_at_forecast
from models.forecast import Forecast, PredictionInterval, QuantileLevels, StepRecord, TrackerState
from models.run_config import LearningRateHeuristic, VariantKind, VariantSpec
from utils.helpers import as_finite_scalar, as_finite_vector


def adaptive_eta(lr_window: Iterable[np.ndarray], heuristic: Optional[LearningRateHeuristic] = None) -> float:
    """Learning rate from the trailing window of absolute residuals, pooled over levels"""
    heuristic = heuristic or LearningRateHeuristic()
    rows = list(lr_window)
    if not rows:
        return heuristic.floor
    residuals = np.concatenate(rows)
    return max(heuristic.factor * float(np.quantile(residuals, heuristic.quantile)), heuristic.floor)


class TrackerService:
    def __init__(self, spec: VariantSpec, levels: QuantileLevels):
        self.spec = spec
        self.levels = levels

    def initial_state(self, init_offset=None) -> TrackerState:
        """Fresh state; hidden starts at zero unless an ordered offset is given"""
        if init_offset is None:
            hidden = np.zeros(self.levels.size)
        else:
            hidden = as_finite_vector(init_offset, "init_offset")
            if hidden.size == 1 and self.levels.size > 1:
                hidden = np.full(self.levels.size, hidden[0])
            if hidden.size != self.levels.size:
                raise InputError(
                    f"init_offset has {hidden.size} entries for {self.levels.size} levels"
                )
            if self.spec.requires_ordered_base and not is_ordered(hidden):
                raise InputError("init_offset must be non-decreasing for ordered variants")

        window = self.spec.heuristic.window if self.spec.heuristic else 0
        return TrackerState(
            hidden=hidden.copy(),
            played=hidden.copy(),
            delay_buffer=deque(),
            step_index=1,
            lr_window=deque(maxlen=window),
        )

    def current_eta(self, state: TrackerState) -> float:
        if self.spec.eta is not None:
            return self.spec.eta
        return adaptive_eta(state.lr_window, self.spec.heuristic)

    def forecast(self, state: TrackerState, b) -> Forecast:
        """Forecast for the current step; state is left untouched"""
        b = self._check_base(b)
        raw = b + state.hidden
        kind = self.spec.kind

        if kind in (VariantKind.MULTIQT, VariantKind.MULTIQT_DELAYED, VariantKind.PROJECTED_GD):
            q = pava(raw)
        elif kind == VariantKind.MULTIQT_EPS:
            q = separated_projection(raw, self.spec.eps)
        elif kind in (VariantKind.MULTIQT_SORT, VariantKind.POSTHOC_SORT):
            q = np.sort(raw)
        elif kind == VariantKind.POSTHOC_ISOTONIC:
            q = pava(raw)
        else:
            q = raw.copy()

        if self.spec.gradient_point == "hidden":
            return Forecast(base=b, q=q, raw=raw, played=state.hidden.copy(), gradient_point=raw)
        return Forecast(base=b, q=q, raw=raw, played=q - b, gradient_point=q)

    def step(self, state: TrackerState, b, y: float, forecast: Optional[Forecast] = None) -> Tuple[TrackerState, StepRecord]:
        """Forecast, observe y, and return the next state with this step's record"""
        y = as_finite_scalar(y, "y")
        forecast = forecast or self.forecast(state, b)

        gradient = gradient_at_forecast(self.levels, forecast.gradient_point, y)
        eta = self.current_eta(state)

        delay_buffer = deque(state.delay_buffer)
        lr_window = deque(state.lr_window, maxlen=state.lr_window.maxlen)
        delay_buffer.append((gradient, np.abs(y - forecast.base)))

        # feedback for step t lands after the forecast of step t + D
        if len(delay_buffer) > self.spec.delay:
            arrived_gradient, arrived_residuals = delay_buffer.popleft()
            anchor = forecast.played if self.spec.kind == VariantKind.PROJECTED_GD else state.hidden
            hidden = anchor - eta * arrived_gradient
            if self.spec.heuristic is not None:
                lr_window.append(arrived_residuals)
        else:
            hidden = state.hidden.copy()

        record = StepRecord(
            t=state.step_index,
            base=forecast.base,
            y=y,
            q=forecast.q,
            raw=forecast.raw,
            played=forecast.played,
            hidden=state.hidden,
            coverage=coverage_indicators(forecast.q, y),
            gradient=gradient,
            loss=aggregated_quantile_loss(self.levels, forecast.q, y),
            eta=eta,
        )
        logging.debug(f"step {state.step_index}: q={forecast.q}, y={y}, eta={eta}")

        next_state = TrackerState(
            hidden=hidden,
            played=forecast.played,
            delay_buffer=delay_buffer,
            step_index=state.step_index + 1,
            lr_window=lr_window,
        )
        return next_state, record

    def update(self, state: TrackerState, b, y: float) -> TrackerState:
        return self.step(state, b, y)[0]

    def run(self, series: Iterable[Tuple[Sequence[float], float]], init_offset=None) -> List[StepRecord]:
        state = self.initial_state(init_offset)
        records = []
        for b, y in series:
            state, record = self.step(state, b, y)
            records.append(record)
        return records

    def _check_base(self, b) -> np.ndarray:
        b = as_finite_vector(b, "b")
        if b.size != self.levels.size:
            raise InputError(f"Base forecast has {b.size} entries for {self.levels.size} levels")
        if self.spec.requires_ordered_base and not is_ordered(b):
            raise InputError(f"Base forecast {b.tolist()} is crossed; {self.spec.kind.value} needs ordered input")
        return b


def run_series(spec: VariantSpec, levels: QuantileLevels, series, init_offset=None) -> List[StepRecord]:
    """Run one variant over a sequence of (b_t, y_t) pairs"""
    tracker = TrackerService(spec, levels)
    records = tracker.run(series, init_offset=init_offset)
    logging.info(f"Ran {spec.label} over {len(records)} steps")
    return records


def build_intervals(levels: QuantileLevels, q, alphas) -> List[PredictionInterval]:
    """Nested central intervals (q^{alpha/2}, q^{1-alpha/2}] for each miscoverage target"""
    q = as_finite_vector(q, "q")
    if q.size != levels.size:
        raise InputError(f"Forecast has {q.size} entries for {levels.size} levels")
    if not is_ordered(q):
        raise InputError("Prediction intervals need non-crossing forecasts")

    intervals = []
    for alpha in as_finite_vector(alphas, "alphas"):
        if not 0.0 < alpha < 1.0:
            raise InputError(f"Interval target {alpha} is outside (0, 1)")
        lower = q[levels.index_of(alpha / 2.0)]
        upper = q[levels.index_of(1.0 - alpha / 2.0)]
        intervals.append(PredictionInterval(alpha=float(alpha), lower=float(lower), upper=float(upper)))
    return intervals
