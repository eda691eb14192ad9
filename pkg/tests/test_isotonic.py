"""Isotonic projections: PAVA against an exhaustive pooling oracle and its
algebraic properties (idempotence, translation commutation, contraction)."""

import itertools

import numpy as np
import pytest

from core.exceptions import InputError
from core.isotonic import is_ordered, pava, project_eps_separated, project_shifted, separated_projection


def pooling_oracle(x):
    """Best ordered vector among all partitions of x into consecutive pooled blocks"""
    n = len(x)
    best, best_error = None, np.inf
    for cuts in itertools.product([False, True], repeat=n - 1):
        z = np.empty(n)
        start = 0
        for i in range(n):
            if i == n - 1 or cuts[i]:
                z[start:i + 1] = np.mean(x[start:i + 1])
                start = i + 1
        if np.all(np.diff(z) >= -1e-12):
            error = np.sum((x - z) ** 2)
            if error < best_error:
                best, best_error = z, error
    return best


# =============================================================================
# Examples
# =============================================================================


class TestPavaExamples:
    def test_ordered_input_is_unchanged(self):
        np.testing.assert_array_equal(pava([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_single_violation_is_pooled(self):
        np.testing.assert_allclose(pava([1.0, 3.0, 2.0]), [1.0, 2.5, 2.5])

    def test_two_point_reversal(self):
        np.testing.assert_allclose(pava([2.0, 1.0]), [1.5, 1.5])

    def test_ties_stay_bit_identical(self):
        x = np.array([0.1, 0.1, 0.30000000000000004, 0.30000000000000004])
        np.testing.assert_array_equal(pava(x), x)

    def test_cascading_merge(self):
        np.testing.assert_allclose(pava([3.0, 2.0, 1.0, 0.0]), [1.5, 1.5, 1.5, 1.5])

    def test_non_finite_entry_rejected(self):
        with pytest.raises(InputError):
            pava([1.0, np.nan])
        with pytest.raises(InputError):
            pava([np.inf, 0.0])

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            pava([])


class TestShiftedProjection:
    def test_already_ordered_after_shift(self):
        np.testing.assert_array_equal(project_shifted([0.0, 0.0], [1.0, 2.0]), [0.0, 0.0])

    def test_pools_without_shift(self):
        np.testing.assert_allclose(project_shifted([1.0, 0.0], [0.0, 0.0]), [0.5, 0.5])

    def test_commutes_with_translation_by_base(self, rng):
        for _ in range(200):
            n = rng.integers(1, 8)
            x = rng.normal(size=n)
            b = np.sort(rng.normal(size=n))
            np.testing.assert_allclose(project_shifted(x, b) + b, pava(x + b), atol=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(InputError):
            project_shifted([1.0, 2.0], [1.0])


class TestEpsSeparatedProjection:
    def test_zero_eps_matches_shifted_projection(self, rng):
        for _ in range(100):
            x = rng.normal(size=4)
            b = np.sort(rng.normal(size=4))
            np.testing.assert_array_equal(project_eps_separated(x, b, 0.0), project_shifted(x, b))

    def test_two_point_calculus(self):
        np.testing.assert_allclose(project_eps_separated([0.0, 0.0], [0.0, 0.0], 1.0), [-0.5, 0.5])

    def test_already_separated(self):
        np.testing.assert_allclose(project_eps_separated([0.0, 3.0], [0.0, 0.0], 1.0), [0.0, 3.0])

    def test_output_is_separated(self, rng):
        for _ in range(100):
            z = rng.normal(size=5)
            out = separated_projection(z, 0.3)
            assert np.all(np.diff(out) >= 0.3 - 1e-12)

    def test_negative_eps_rejected(self):
        with pytest.raises(InputError):
            project_eps_separated([0.0, 0.0], [0.0, 0.0], -0.1)


# =============================================================================
# Properties
# =============================================================================


class TestPavaProperties:
    def test_matches_pooling_oracle(self, rng):
        for _ in range(1000):
            n = rng.integers(1, 7)
            x = rng.normal(size=n) * rng.choice([0.1, 1.0, 10.0])
            assert np.linalg.norm(pava(x) - pooling_oracle(x)) <= 1e-9

    def test_pool_mean_and_kkt_conditions(self, rng):
        for _ in range(1000):
            n = rng.integers(1, 7)
            x = rng.normal(size=n)
            z = pava(x)
            start = 0
            for i in range(n):
                if i == n - 1 or z[i + 1] != z[i]:
                    block = slice(start, i + 1)
                    assert abs(np.mean(x[block]) - z[start]) <= 1e-9
                    assert np.all(np.cumsum(x[block] - z[block]) >= -1e-9)
                    start = i + 1

    def test_output_is_ordered_bit_exact(self, rng):
        for _ in range(1000):
            z = pava(rng.normal(size=rng.integers(1, 30)))
            assert is_ordered(z)

    def test_idempotent(self, rng):
        for _ in range(500):
            z = pava(rng.normal(size=rng.integers(1, 20)))
            np.testing.assert_array_equal(pava(z), z)

    def test_translation_commutation(self, rng):
        for _ in range(500):
            x = rng.normal(size=rng.integers(1, 10))
            c = rng.normal() * 5
            np.testing.assert_allclose(pava(x + c), pava(x) + c, atol=1e-12)

    def test_contraction(self, rng):
        for _ in range(500):
            n = rng.integers(1, 10)
            x, y = rng.normal(size=n), rng.normal(size=n)
            assert np.linalg.norm(pava(x) - pava(y)) <= np.linalg.norm(x - y) + 1e-12
