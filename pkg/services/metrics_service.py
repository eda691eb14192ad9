"""Evaluation metrics and bound calculators over completed runs."""

import logging
import math
from typing import Sequence, Tuple

import numpy as np

from config import Config
from core.exceptions import InputError
from core.isotonic import crossing_mask
from core.losses import pinball_matrix
from models.forecast import QuantileLevels, StepRecord
from models.report import BoundCheck, RegretResult, RunReport
from models.run_config import VariantKind, VariantSpec
from utils.helpers import as_finite_scalar, as_finite_vector


def _require_records(records: Sequence[StepRecord]):
    if not records:
        raise InputError("Metrics need at least one step record")


def _stack(records: Sequence[StepRecord], attribute: str) -> np.ndarray:
    return np.vstack([getattr(record, attribute) for record in records])


# =============================================================================
# Coverage and calibration
# =============================================================================


def coverage_vector(records: Sequence[StepRecord]) -> np.ndarray:
    _require_records(records)
    return _stack(records, "coverage").mean(axis=0)


def empirical_coverage(records: Sequence[StepRecord], levels: QuantileLevels, level: float) -> float:
    """Fraction of steps with y <= q at the given level"""
    return float(coverage_vector(records)[levels.index_of(level)])


def calibration_error(records: Sequence[StepRecord], levels: QuantileLevels) -> float:
    """Mean absolute gap between empirical coverage and level"""
    return float(np.mean(np.abs(coverage_vector(records) - levels.as_array())))


def average_quantile_loss(records: Sequence[StepRecord], levels: QuantileLevels) -> float:
    """Aggregated loss averaged over steps and levels"""
    _require_records(records)
    return float(np.mean([record.loss for record in records]) / levels.size)


def crossing_fraction(raw_forecasts) -> float:
    """Fraction of steps where some lower level exceeds a higher one"""
    matrix = np.asarray(raw_forecasts, dtype=float)
    if matrix.size == 0:
        return 0.0
    return float(crossing_mask(np.atleast_2d(matrix)).mean())


def average_gradient_norm(records: Sequence[StepRecord]) -> float:
    _require_records(records)
    return float(np.linalg.norm(_stack(records, "gradient").mean(axis=0)))


def residual_bound(records: Sequence[StepRecord]) -> float:
    """Largest observed |y_t - b_t^alpha| over the run"""
    _require_records(records)
    base = _stack(records, "base")
    y = np.array([record.y for record in records])
    return float(np.max(np.abs(y[:, None] - base)))


# =============================================================================
# PIT entropy
# =============================================================================


def pit_cdf(levels: QuantileLevels, q, y: float) -> Tuple[float, bool]:
    """Interpolated CDF of the forecast distribution at y.

    Linear between quantiles, exponential tails whose rate matches the
    density of the nearest distinct pair. A forecast with every level tied
    at v is treated as a point mass with unit-rate tails. Returns the value
    and whether that degenerate case was hit.
    """
    alphas = levels.as_array()
    q = np.sort(as_finite_vector(q, "q"))
    y = as_finite_scalar(y, "y")
    lowest, highest = alphas[0], alphas[-1]

    if q[0] == q[-1]:
        v = q[0]
        if y < v:
            return float(lowest * math.exp(y - v)), True
        if y == v:
            return float(highest), True
        return float(1.0 - (1.0 - highest) * math.exp(-(y - v))), True

    distinct = np.flatnonzero(np.diff(q) > 0)
    if y < q[0]:
        i = distinct[0]
        density = (alphas[i + 1] - alphas[i]) / (q[i + 1] - q[i])
        rate = density / lowest
        return float(lowest * math.exp(rate * (y - q[0]))), False
    if y > q[-1]:
        i = distinct[-1]
        density = (alphas[i + 1] - alphas[i]) / (q[i + 1] - q[i])
        rate = density / (1.0 - highest)
        return float(1.0 - (1.0 - highest) * math.exp(-rate * (y - q[-1]))), False

    tied = np.flatnonzero(q == y)
    if tied.size:
        return float(alphas[tied[-1]]), False
    j = int(np.searchsorted(q, y, side="right"))
    weight = (y - q[j - 1]) / (q[j] - q[j - 1])
    return float(alphas[j - 1] + weight * (alphas[j] - alphas[j - 1])), False


def pit_values(levels: QuantileLevels, forecasts, observations) -> Tuple[np.ndarray, int]:
    """PIT value per step and the number of degenerate (all tied) steps"""
    if levels.size < Config.PIT_CONFIG["min_levels"]:
        raise InputError(
            f"PIT needs at least {Config.PIT_CONFIG['min_levels']} levels, got {levels.size}"
        )
    values = []
    degenerate = 0
    for q, y in zip(forecasts, observations):
        value, tied = pit_cdf(levels, q, y)
        values.append(value)
        degenerate += int(tied)
    return np.array(values), degenerate


def histogram_entropy(values, bins: int = 10) -> float:
    """Shannon entropy of an equal-width histogram on [0, 1], normalized by log(bins)"""
    if bins < 2:
        raise InputError(f"bins must be at least 2, got {bins}")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InputError("Entropy needs at least one value")

    index = np.clip(np.floor(values * bins).astype(int), 0, bins - 1)
    p = np.bincount(index, minlength=bins) / values.size
    p = p[p > 0]
    return float(min(max(-np.sum(p * np.log(p)) / math.log(bins), 0.0), 1.0))


def pit_entropy(records: Sequence[StepRecord], levels: QuantileLevels, bins: int = 10) -> float:
    _require_records(records)
    values, degenerate = pit_values(
        levels, [record.q for record in records], [record.y for record in records]
    )
    if degenerate:
        logging.warning(f"{degenerate} steps had fully tied forecasts; used unit-rate PIT tails")
    return histogram_entropy(values, bins)


# =============================================================================
# Regret
# =============================================================================


def empirical_quantile_comparator(levels: QuantileLevels, residuals: np.ndarray) -> np.ndarray:
    """Per-level type-1 empirical quantiles of the residuals y_t - b_t^alpha"""
    return np.array([
        np.quantile(residuals[:, i], alpha, method="inverted_cdf")
        for i, alpha in enumerate(levels)
    ])


def comparator_is_feasible(base: np.ndarray, comparator: np.ndarray) -> bool:
    return not np.any(crossing_mask(base + comparator))


def compute_regret(
    records: Sequence[StepRecord],
    levels: QuantileLevels,
    comparator=None,
    mode: str = "empirical",
) -> RegretResult:
    """Average played loss minus the average loss of a fixed feasible offset"""
    _require_records(records)
    base = _stack(records, "base")
    revealed = _stack(records, "q")
    y = np.array([record.y for record in records])
    alphas = levels.as_array()

    if comparator is not None:
        theta = as_finite_vector(comparator, "comparator")
        if theta.size != levels.size:
            raise InputError(f"Comparator has {theta.size} entries for {levels.size} levels")
        kind = "custom"
    elif mode == "empirical":
        theta = empirical_quantile_comparator(levels, y[:, None] - base)
        kind = "empirical"
    elif mode == "zero":
        theta = np.zeros(levels.size)
        kind = "zero"
    else:
        raise InputError(f"Unknown comparator mode '{mode}'")

    fallback = False
    if not comparator_is_feasible(base, theta):
        logging.warning(f"Comparator {theta.tolist()} crosses some base forecast; falling back to zero offsets")
        theta = np.zeros(levels.size)
        fallback = True

    played_loss = float(pinball_matrix(alphas, revealed, y).sum(axis=1).mean())
    comparator_loss = float(pinball_matrix(alphas, base + theta, y).sum(axis=1).mean())
    return RegretResult(
        value=played_loss - comparator_loss,
        played_loss=played_loss,
        comparator_loss=comparator_loss,
        comparator=theta.tolist(),
        comparator_kind=kind,
        fallback=fallback,
    )


# =============================================================================
# Bound calculators
# =============================================================================


def _check_bound_inputs(residual_bound: float, eta: float, horizon: int, init_norm: float = 0.0):
    if residual_bound < 0 or not math.isfinite(residual_bound):
        raise InputError(f"Residual bound must be non-negative, got {residual_bound}")
    if eta <= 0 or not math.isfinite(eta):
        raise InputError(f"Learning rate must be positive, got {eta}")
    if horizon < 1:
        raise InputError(f"Horizon must be at least 1, got {horizon}")
    if init_norm < 0:
        raise InputError(f"Initial offset norm must be non-negative, got {init_norm}")


def calibration_bound(levels: QuantileLevels, residual_bound: float, eta: float, horizon: int, init_norm: float = 0.0) -> float:
    """Per-level coverage gap bound for MultiQT with a fixed learning rate"""
    _check_bound_inputs(residual_bound, eta, horizon, init_norm)
    size = levels.size
    return 2 * init_norm / (eta * horizon) + math.sqrt(
        size / horizon + 2 * residual_bound * size ** 1.5 / (eta * levels.d_a * horizon)
    )


def delayed_calibration_bound(levels: QuantileLevels, residual_bound: float, eta: float, horizon: int, delay: int, init_norm: float = 0.0) -> float:
    _check_bound_inputs(residual_bound, eta, horizon, init_norm)
    if delay < 0:
        raise InputError(f"Delay must be non-negative, got {delay}")
    size = levels.size
    return (
        2 * init_norm / (eta * horizon)
        + math.sqrt(
            size * (2 * delay + 1) / horizon
            + 2 * residual_bound * size ** 1.5 / (eta * levels.d_a * horizon)
        )
        + delay * math.sqrt(size) / horizon
    )


def regret_bound(levels: QuantileLevels, residual_bound: float, eta: float, horizon: int, init_norm: float = 0.0) -> float:
    """Regret bound against any comparator whose entries lie within the residual bound"""
    return delayed_regret_bound(levels, residual_bound, eta, horizon, 0, init_norm)


def delayed_regret_bound(levels: QuantileLevels, residual_bound: float, eta: float, horizon: int, delay: int, init_norm: float = 0.0) -> float:
    _check_bound_inputs(residual_bound, eta, horizon, init_norm)
    if delay < 0:
        raise InputError(f"Delay must be non-negative, got {delay}")
    size = levels.size
    distance = residual_bound * math.sqrt(size) + init_norm
    return distance ** 2 / (2 * eta * horizon) + 2 * eta * size * (delay + 1)


def tracker_coverage_bound(theta1: float, residual_bound: float, eta: float, horizon: int) -> float:
    """Coverage gap bound of the single-level Quantile Tracker"""
    _check_bound_inputs(residual_bound, eta, horizon)
    return (2 * abs(theta1) + residual_bound + eta) / (eta * horizon)


def projection_distance_bound(levels: QuantileLevels, eta: float) -> float:
    """Bound on |played - hidden| when the base forecasts are point forecasts"""
    if eta <= 0:
        raise InputError(f"Learning rate must be positive, got {eta}")
    return eta * levels.size ** 1.5 / math.sqrt(3)


def point_forecast_calibration_bound(levels: QuantileLevels, residual_bound: float, eta: float, horizon: int, init_norm: float = 0.0) -> float:
    _check_bound_inputs(residual_bound, eta, horizon, init_norm)
    size = levels.size
    d_a = levels.d_a
    return (
        2 * init_norm / (eta * horizon)
        + math.sqrt(size) / horizon
        + size ** 1.5 / (2 * d_a * horizon)
        + residual_bound * size ** 1.5 / (d_a * eta * horizon)
        + size ** 1.5 / (horizon * math.sqrt(3))
    )


def optimal_regret_eta(residual_bound: float, horizon: int, delay: int = 0) -> float:
    """Learning rate minimizing the regret bound"""
    if residual_bound <= 0 or horizon < 1 or delay < 0:
        raise InputError("Optimal learning rate needs R > 0, T >= 1 and D >= 0")
    return residual_bound / (2 * math.sqrt((delay + 1) * horizon))


def tradeoff_eta(horizon: int, scale: float = 1.0) -> float:
    """Learning rate balancing the calibration and regret bounds, scale * T^(-1/3)"""
    if horizon < 1 or scale <= 0:
        raise InputError("Trade-off learning rate needs T >= 1 and a positive scale")
    return scale * horizon ** (-1.0 / 3.0)


# =============================================================================
# Run report
# =============================================================================


def build_report(
    records: Sequence[StepRecord],
    levels: QuantileLevels,
    spec: VariantSpec,
    init_offset=None,
    pit_bins: int = 10,
    comparator_mode: str = "empirical",
    repaired_steps: int = 0,
) -> RunReport:
    """Collect every metric and applicable bound for a finished run"""
    _require_records(records)
    horizon = len(records)
    coverage = coverage_vector(records)
    gaps = np.abs(coverage - levels.as_array())
    bound_r = residual_bound(records)
    init = np.zeros(levels.size) if init_offset is None else np.broadcast_to(
        as_finite_vector(init_offset, "init_offset"), (levels.size,)
    )
    init_norm = float(np.linalg.norm(init))

    pit = None
    degenerate = 0
    if levels.size >= Config.PIT_CONFIG["min_levels"]:
        values, degenerate = pit_values(levels, [r.q for r in records], [r.y for r in records])
        pit = histogram_entropy(values, pit_bins)

    regret = compute_regret(records, levels, mode=comparator_mode)

    bounds = {}
    if spec.eta is not None:
        eta = spec.eta
        if spec.delay:
            calibration = delayed_calibration_bound(levels, bound_r, eta, horizon, spec.delay, init_norm)
            regret_limit = delayed_regret_bound(levels, bound_r, eta, horizon, spec.delay, init_norm)
        else:
            calibration = calibration_bound(levels, bound_r, eta, horizon, init_norm)
            regret_limit = regret_bound(levels, bound_r, eta, horizon, init_norm)
        bounds["calibration"] = BoundCheck("calibration", calibration, float(gaps.max()), spec.is_guaranteed)
        bounds["regret"] = BoundCheck("regret", regret_limit, regret.value, spec.is_guaranteed)
        if levels.size == 1 and spec.delay == 0:
            bounds["tracker_coverage"] = BoundCheck(
                "tracker_coverage",
                tracker_coverage_bound(float(init[0]), bound_r, eta, horizon),
                float(gaps.max()),
                spec.kind in (VariantKind.QT_INDEPENDENT, VariantKind.MULTIQT),
            )
        for check in bounds.values():
            if check.applies and not check.held:
                logging.warning(f"Bound '{check.name}' violated: observed {check.observed} > {check.value}")
    else:
        logging.info("Learning-rate heuristic in use; fixed-eta bounds are not reported")

    return RunReport(
        variant=spec.label,
        levels=list(levels.values),
        horizon=horizon,
        coverage=coverage.tolist(),
        calibration_error=float(gaps.mean()),
        quantile_loss=average_quantile_loss(records, levels),
        crossing_fraction=crossing_fraction(_stack(records, "raw")),
        pit_entropy=pit,
        pit_degenerate_steps=degenerate,
        regret=regret,
        average_gradient_norm=average_gradient_norm(records),
        residual_bound=bound_r,
        bounds=bounds,
        repaired_steps=repaired_steps,
    )
