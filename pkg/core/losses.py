"""Quantile losses, the MultiQT gradient and interval scores."""

import math

import numpy as np

from core.exceptions import InputError
from core.isotonic import is_ordered
from models.forecast import QuantileLevels
from utils.helpers import as_finite_scalar, as_finite_vector


def _check_level(alpha: float, name: str = "alpha") -> float:
    alpha = as_finite_scalar(alpha, name)
    if not 0.0 < alpha < 1.0:
        raise InputError(f"{name} must lie in (0, 1), got {alpha}")
    return alpha


def _check_forecast(levels: QuantileLevels, q, name: str = "q") -> np.ndarray:
    q = as_finite_vector(q, name)
    if q.size != levels.size:
        raise InputError(
            f"Length mismatch: {name} has {q.size} entries for {levels.size} levels"
        )
    return q


def quantile_loss(alpha: float, q: float, y: float) -> float:
    alpha = _check_level(alpha)
    q = as_finite_scalar(q, "q")
    y = as_finite_scalar(y, "y")
    residual = y - q
    if residual >= 0:
        return alpha * residual
    return (1.0 - alpha) * -residual


def pinball_matrix(alphas: np.ndarray, q: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Elementwise quantile loss with broadcasting; rows are steps, columns levels"""
    residual = np.asarray(y, dtype=float)[..., None] - np.asarray(q, dtype=float)
    return np.where(residual >= 0, alphas * residual, (alphas - 1.0) * residual)


def aggregated_quantile_loss(levels: QuantileLevels, q, y: float) -> float:
    q = _check_forecast(levels, q)
    y = as_finite_scalar(y, "y")
    return float(np.sum(pinball_matrix(levels.as_array(), q, np.float64(y))))


def coverage_indicators(q, y: float) -> np.ndarray:
    """1{y <= q} per entry, closed inequality"""
    return (y <= np.asarray(q, dtype=float)).astype(np.int8)


def gradient_at_forecast(levels: QuantileLevels, q, y: float) -> np.ndarray:
    return coverage_indicators(q, y) - levels.as_array()


def multiqt_gradient(levels: QuantileLevels, b, theta, y: float) -> np.ndarray:
    """Subgradient cov - alpha of the aggregated loss at offset theta"""
    b = _check_forecast(levels, b, "b")
    theta = _check_forecast(levels, theta, "theta")
    y = as_finite_scalar(y, "y")
    return gradient_at_forecast(levels, b + theta, y)


def interval_score(beta: float, lo: float, hi: float, y: float) -> float:
    beta = _check_level(beta, "beta")
    lo = as_finite_scalar(lo, "lo")
    hi = as_finite_scalar(hi, "hi")
    y = as_finite_scalar(y, "y")
    if lo > hi:
        raise InputError(f"Interval lower end {lo} exceeds upper end {hi}")
    distance = max(lo - y, y - hi, 0.0)
    return (hi - lo) + (2.0 / beta) * distance


def weighted_interval_score(levels: QuantileLevels, q, betas, y: float) -> float:
    """Sum over beta of beta * interval_score on (q^{beta/2}, q^{1-beta/2})"""
    q = _check_forecast(levels, q)
    if not is_ordered(q):
        raise InputError("Weighted interval score needs non-crossing forecasts")
    y = as_finite_scalar(y, "y")

    total = 0.0
    for beta in as_finite_vector(betas, "betas"):
        beta = _check_level(beta, "beta")
        lower = q[levels.index_of(beta / 2.0)]
        upper = q[levels.index_of(1.0 - beta / 2.0)]
        total += beta * interval_score(beta, lower, upper, y)
    return total


def restorativity_radius(levels: QuantileLevels, residual_bound: float) -> float:
    """Radius beyond which the gradient points away from the origin"""
    residual_bound = as_finite_scalar(residual_bound, "residual_bound")
    return residual_bound * levels.size ** 1.5 / levels.d_a


def restorativity_margin(levels: QuantileLevels, residual_bound: float, radius: float) -> float:
    """Lower bound on <theta, g(theta)> for every theta with norm >= radius"""
    residual_bound = as_finite_scalar(residual_bound, "residual_bound")
    return radius * levels.d_a / math.sqrt(levels.size) - residual_bound * levels.size


def inward_flow_gap(q, y: float) -> float:
    """Gap between the last miscovering and first covering forecast.

    Returns inf when y lies outside the forecast range, in which case every
    entry moves in the same direction.
    """
    q = as_finite_vector(q, "q")
    covered = np.flatnonzero(y <= q)
    if covered.size == 0 or covered[0] == 0:
        return math.inf
    first = covered[0]
    return float(q[first] - q[first - 1])


def inward_flow_holds(levels: QuantileLevels, b, theta, y: float, step: float) -> bool:
    """Whether moving theta by -step * gradient keeps b + theta ordered"""
    b = _check_forecast(levels, b, "b")
    theta = _check_forecast(levels, theta, "theta")
    q = b + theta
    if not is_ordered(q):
        raise InputError("Inward flow is checked from an ordered forecast")
    g = gradient_at_forecast(levels, q, y)
    return is_ordered(q - step * g)
