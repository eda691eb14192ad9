"""Deterministic observation sequences on which naive ordering fixes fail.

Every generator uses zero base forecasts, simulates the targeted variant
with the same arithmetic the trackers use, and places each observation at
the midpoint of the interval the construction asks for. Unbounded events
("above both", "below both") are placed eta / 2 beyond the extreme forecast.
"""

import logging
import math
from typing import Dict, List

import numpy as np

from config import Config
from core.exceptions import InputError, ScenarioError
from core.isotonic import separated_projection
from core.losses import gradient_at_forecast
from models.forecast import QuantileLevels
from models.report import AdversarialScenario, ComparisonRow
from models.run_config import VariantKind, VariantSpec
from services.metrics_service import calibration_bound, coverage_vector
from services.tracker_service import run_series

SORTED_CYCLE_LEVELS = (0.5, 0.75)
SORTED_CYCLE_EVENTS = ("above", "between", "between", "below", "below", "below", "between", "between")


def _check_eta(eta: float) -> float:
    if not eta > 0 or not math.isfinite(eta):
        raise InputError(f"eta must be positive, got {eta}")
    return float(eta)


def _check_count(value: int, name: str) -> int:
    if int(value) < 1:
        raise InputError(f"{name} must be at least 1, got {value}")
    return int(value)


def _place(event: str, q: np.ndarray, eta: float) -> float:
    low, high = float(np.min(q)), float(np.max(q))
    if event == "above":
        return high + eta / 2
    if event == "below":
        return low - eta / 2
    return (low + high) / 2


def gen_sorted_qt_cycle(eta: float = 1.0, repetitions: int = 1000) -> AdversarialScenario:
    """Eight-step cycle that returns independent trackers at 0.5 and 0.75 to zero"""
    eta = _check_eta(eta)
    repetitions = _check_count(repetitions, "repetitions")
    levels = QuantileLevels(SORTED_CYCLE_LEVELS)

    theta = np.zeros(levels.size)
    cycle = []
    for event in SORTED_CYCLE_EVENTS:
        y = _place(event, theta, eta)
        cycle.append(y)
        theta = theta - eta * gradient_at_forecast(levels, theta, y)

    y = np.tile(np.array(cycle), repetitions)
    return AdversarialScenario(
        kind="sorted_qt_cycle",
        levels=list(levels.values),
        eta=eta,
        y=y,
        residual_bound=float(np.max(np.abs(cycle))),
        failing_variants=["qt_independent", "posthoc_sort", "posthoc_isotonic"],
        params={"eta": eta, "repetitions": repetitions},
        cycle_length=len(cycle),
        init_offset=[0.0, 0.0],
    )


def gen_pgd_cycle(alpha: float = 0.2, beta: float = 0.3, eta: float = 1.0, q0: float = 0.0,
                  repetitions: int = 5000, mirrored: bool = False) -> AdversarialScenario:
    """Two-step cycle on which projected gradient descent pools back to q0.

    With alpha + beta = 0.5 the first observation sits above both forecasts
    and the second between them; projected GD covers at rates 0 and 0.5.
    The mirrored cycle needs alpha + beta = 1.5, starts below both, and
    covers at rates 0.5 and 1.
    """
    eta = _check_eta(eta)
    repetitions = _check_count(repetitions, "repetitions")
    levels = QuantileLevels((alpha, beta))
    target = 1.5 if mirrored else 0.5
    if abs(alpha + beta - target) > 1e-12:
        raise InputError(f"pgd_cycle needs alpha + beta = {target}, got {alpha + beta}")

    if mirrored:
        # between (q0 - eta(1 - alpha), q0 - eta(1 - beta)]
        cycle = [q0 - eta / 2, q0 - eta * (2 - alpha - beta) / 2]
    else:
        # between (q0 + eta alpha, q0 + eta beta]
        cycle = [q0 + eta / 2, q0 + eta * (alpha + beta) / 2]

    y = np.tile(np.array(cycle), repetitions)
    return AdversarialScenario(
        kind="pgd_cycle",
        levels=list(levels.values),
        eta=eta,
        y=y,
        residual_bound=float(np.max(np.abs(cycle))),
        failing_variants=["projected_gd"],
        params={"alpha": alpha, "beta": beta, "eta": eta, "q0": q0,
                "repetitions": repetitions, "mirrored": mirrored},
        cycle_length=2,
        init_offset=[float(q0), float(q0)],
    )


def gen_multiqt_sort_divergence(alpha: float = 0.3, beta: float = 0.7, eta: float = 1.0,
                                horizon: int = 10000) -> AdversarialScenario:
    """Sequence that crosses the hidden offsets once, then keeps y inside the sorted pair"""
    eta = _check_eta(eta)
    horizon = _check_count(horizon, "horizon")
    levels = QuantileLevels((alpha, beta))

    theta = np.zeros(levels.size)
    y = []
    crossed_at = None
    ties = 0
    while len(y) < horizon:
        q = np.sort(theta)
        if crossed_at is None:
            if theta[0] > theta[1]:
                crossed_at = len(y)
                anchor = _place("between", q, eta)
            elif q[0] == q[1]:
                ties += 1
                if ties > 1:
                    raise InputError(
                        f"Levels ({alpha}, {beta}) return to a tie without crossing when b = 0"
                    )
                anchor = _place("above", q, eta)
            else:
                anchor = _place("between", q, eta)
        # once crossed the sorted pair only widens around the anchor
        y.append(anchor)
        theta = theta - eta * gradient_at_forecast(levels, q, anchor)

    logging.info(f"Sort divergence: hidden offsets crossed after {crossed_at} steps")
    y = np.array(y)
    return AdversarialScenario(
        kind="multiqt_sort_divergence",
        levels=list(levels.values),
        eta=eta,
        y=y,
        residual_bound=float(np.max(np.abs(y))),
        failing_variants=["multiqt_sort"],
        params={"alpha": alpha, "beta": beta, "eta": eta, "horizon": horizon, "crossed_at": crossed_at},
        init_offset=[0.0, 0.0],
    )


def gen_eps_separated_divergence(alpha: float = 0.25, beta: float = 0.75, eta: float = 1.0,
                                 eps: float = 1.0, horizon: int = 10000) -> AdversarialScenario:
    """Sequence placing every y inside the forced eps gap of the projected pair"""
    eta = _check_eta(eta)
    horizon = _check_count(horizon, "horizon")
    levels = QuantileLevels((alpha, beta))
    if not eps > 0:
        raise InputError(f"eps must be positive, got {eps}")

    theta = np.zeros(levels.size)
    y = np.empty(horizon)
    for t in range(horizon):
        q = separated_projection(theta, eps)
        y[t] = _place("between", q, eta)
        theta = theta - eta * gradient_at_forecast(levels, q, y[t])

    return AdversarialScenario(
        kind="eps_separated_divergence",
        levels=list(levels.values),
        eta=eta,
        y=y,
        residual_bound=float(np.max(np.abs(y))),
        failing_variants=["multiqt_eps"],
        params={"alpha": alpha, "beta": beta, "eta": eta, "eps": eps, "horizon": horizon},
        eps=float(eps),
        init_offset=[0.0, 0.0],
    )


SCENARIOS = {
    "sorted_qt_cycle": gen_sorted_qt_cycle,
    "pgd_cycle": gen_pgd_cycle,
    "multiqt_sort_divergence": gen_multiqt_sort_divergence,
    "eps_separated_divergence": gen_eps_separated_divergence,
}


def build_scenario(name: str, **params) -> AdversarialScenario:
    """Build a named scenario, filling unset parameters from the config defaults"""
    if name not in SCENARIOS:
        raise ScenarioError(name, SCENARIOS)
    settings = Config.get_scenario_defaults(name)
    unknown = sorted(key for key, value in params.items() if value is not None and key not in settings)
    if unknown:
        raise InputError(f"Scenario '{name}' does not take {', '.join(unknown)}")
    settings.update({key: value for key, value in params.items() if value is not None})
    try:
        return SCENARIOS[name](**settings)
    except TypeError as e:
        raise InputError(f"Invalid parameters for scenario '{name}': {e}") from e


def _variant_for(kind: str, scenario: AdversarialScenario) -> VariantSpec:
    eps = scenario.eps if kind == VariantKind.MULTIQT_EPS.value else 0.0
    return VariantSpec(kind=kind, eta=scenario.eta, eps=eps)


def comparison_report(scenario: AdversarialScenario) -> List[ComparisonRow]:
    """Coverage of each failing variant next to MultiQT on the same stream"""
    levels = QuantileLevels(tuple(scenario.levels))
    init = scenario.init_offset or [0.0] * levels.size
    bound = calibration_bound(
        levels, scenario.residual_bound, scenario.eta, scenario.horizon, float(np.linalg.norm(init))
    )

    rows = []
    for kind in scenario.failing_variants + [VariantKind.MULTIQT.value]:
        records = run_series(_variant_for(kind, scenario), levels, zip(scenario.base, scenario.y), init)
        coverage = coverage_vector(records)
        max_gap = float(np.max(np.abs(coverage - levels.as_array())))
        final_hidden = records[-1].hidden
        rows.append(ComparisonRow(
            variant=kind,
            coverage=coverage.tolist(),
            max_gap=max_gap,
            calibration_bound=bound,
            within_bound=max_gap <= bound,
            hidden_spread=float(final_hidden.max() - final_hidden.min()),
        ))
        logging.info(f"{scenario.kind}: {kind} coverage {coverage.tolist()}")
    return rows


def comparison_summary(scenario: AdversarialScenario, rows: List[ComparisonRow]) -> Dict:
    return {
        "scenario": scenario.kind,
        "levels": scenario.levels,
        "params": scenario.params,
        "horizon": scenario.horizon,
        "residual_bound": scenario.residual_bound,
        "rows": [row.to_dict() for row in rows],
    }
