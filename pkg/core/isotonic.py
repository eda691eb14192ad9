"""Euclidean projections onto the isotonic cone and its translates.

All projections run the Pool Adjacent Violators Algorithm with uniform
weights. Blocks are stored as (sum, count) pairs and merged left to right.
"""

import numpy as np

from core.exceptions import InputError
from utils.helpers import as_finite_scalar, as_finite_vector, check_same_length


def pava(x) -> np.ndarray:
    """Project x onto the set of vectors with non-decreasing entries"""
    values = as_finite_vector(x, "x")
    sums = []
    counts = []

    for value in values:
        block_sum = float(value)
        block_count = 1
        # pool only strict violators
        while sums and sums[-1] / counts[-1] > block_sum / block_count:
            block_sum += sums.pop()
            block_count += counts.pop()
        sums.append(block_sum)
        counts.append(block_count)

    means = np.array(sums) / np.array(counts)
    return np.repeat(means, counts)


def project_shifted(x, b) -> np.ndarray:
    """Projection onto the translated cone K - b, i.e. pava(x + b) - b"""
    x = as_finite_vector(x, "x")
    b = as_finite_vector(b, "b")
    check_same_length(x, b, "x", "b")
    return pava(x + b) - b


def separated_projection(z, eps: float) -> np.ndarray:
    """Project z onto vectors whose consecutive entries differ by at least eps"""
    z = as_finite_vector(z, "z")
    eps = as_finite_scalar(eps, "eps")
    if eps < 0:
        raise InputError(f"eps must be non-negative, got {eps}")
    if eps == 0:
        return pava(z)

    shift = eps * np.arange(z.size)
    return pava(z - shift) + shift


def project_eps_separated(x, b, eps: float) -> np.ndarray:
    """Projection onto {z : z_i + b_i + eps <= z_{i+1} + b_{i+1}}"""
    x = as_finite_vector(x, "x")
    b = as_finite_vector(b, "b")
    check_same_length(x, b, "x", "b")
    return separated_projection(x + b, eps) - b


def is_ordered(values, eps: float = 0.0) -> bool:
    """Non-strict ordering check, optionally with a minimum separation"""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return True
    return bool(np.all(np.diff(values) >= eps))


def crossing_mask(matrix) -> np.ndarray:
    """Rows of a (T, m) matrix that contain at least one crossed pair"""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] < 2:
        return np.zeros(matrix.shape[0] if matrix.ndim else 0, dtype=bool)
    return np.any(np.diff(matrix, axis=1) < 0, axis=1)
