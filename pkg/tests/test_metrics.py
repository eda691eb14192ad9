"""Coverage, calibration, PIT entropy, regret and the bound calculators."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from core.exceptions import InputError
from models.forecast import QuantileLevels
from models.run_config import LearningRateHeuristic, VariantKind, VariantSpec
from services.metrics_service import (
    average_gradient_norm,
    average_quantile_loss,
    build_report,
    calibration_bound,
    calibration_error,
    compute_regret,
    coverage_vector,
    crossing_fraction,
    delayed_calibration_bound,
    delayed_regret_bound,
    empirical_coverage,
    empirical_quantile_comparator,
    histogram_entropy,
    optimal_regret_eta,
    pit_cdf,
    pit_entropy,
    pit_values,
    point_forecast_calibration_bound,
    projection_distance_bound,
    regret_bound,
    residual_bound,
    tracker_coverage_bound,
    tradeoff_eta,
)
from services.tracker_service import run_series


# =============================================================================
# Coverage and calibration
# =============================================================================


class TestCoverage:
    def test_single_level(self, make_records):
        levels = QuantileLevels((0.5,))
        records = make_records(levels, [[0.0]] * 4, [-1.0, 0.0, 1.0, 2.0])
        np.testing.assert_array_equal(coverage_vector(records), [0.5])
        assert empirical_coverage(records, levels, 0.5) == 0.5
        assert calibration_error(records, levels) == 0.0

    def test_boundary_counts_as_covered(self, make_records):
        levels = QuantileLevels((0.5,))
        records = make_records(levels, [[1.0]], [1.0])
        assert empirical_coverage(records, levels, 0.5) == 1.0

    def test_calibration_error_is_mean_gap(self, make_records):
        levels = QuantileLevels((0.25, 0.75))
        records = make_records(levels, [[0.0, 1.0]] * 2, [0.5, 2.0])
        np.testing.assert_array_equal(coverage_vector(records), [0.0, 0.5])
        assert calibration_error(records, levels) == pytest.approx(0.25)

    def test_unknown_level(self, make_records):
        levels = QuantileLevels((0.5,))
        with pytest.raises(InputError):
            empirical_coverage(make_records(levels, [[0.0]], [0.0]), levels, 0.9)

    def test_empty_records(self):
        with pytest.raises(InputError):
            coverage_vector([])

    def test_crossing_fraction(self):
        assert crossing_fraction([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]) == pytest.approx(1 / 3)
        assert crossing_fraction([[0.0], [1.0]]) == 0.0
        assert crossing_fraction([]) == 0.0

    def test_average_quantile_loss_per_level(self, make_records):
        levels = QuantileLevels((0.5,))
        records = make_records(levels, [[0.0], [0.0]], [2.0, -2.0])
        assert average_quantile_loss(records, levels) == pytest.approx(1.0)

        levels = QuantileLevels((0.25, 0.75))
        records = make_records(levels, [[0.0, 0.0]], [4.0])
        assert average_quantile_loss(records, levels) == pytest.approx((1.0 + 3.0) / 2)

    def test_average_gradient_norm(self, make_records):
        levels = QuantileLevels((0.5,))
        records = make_records(levels, [[0.0]] * 2, [-1.0, 1.0])
        assert average_gradient_norm(records) == 0.0
        records = make_records(levels, [[0.0]] * 2, [1.0, 1.0])
        assert average_gradient_norm(records) == pytest.approx(0.5)

    def test_residual_bound(self, make_records):
        levels = QuantileLevels((0.25, 0.75))
        records = make_records(levels, [[0.0, 1.0], [0.0, 1.0]], [3.0, -2.0], base=[[-1.0, 1.0], [0.0, 0.5]])
        assert residual_bound(records) == pytest.approx(4.0)


# =============================================================================
# PIT
# =============================================================================


class TestPit:
    levels = QuantileLevels((0.25, 0.5, 0.75))

    def test_interior_interpolation(self):
        assert pit_cdf(self.levels, [0.0, 1.0, 2.0], 1.0) == (0.5, False)
        assert pit_cdf(self.levels, [0.0, 1.0, 2.0], 0.5)[0] == pytest.approx(0.375)

    def test_tied_forecast_maps_to_largest_level(self):
        assert pit_cdf(self.levels, [0.0, 0.0, 1.0], 0.0)[0] == 0.5
        assert pit_cdf(self.levels, [0.0, 1.0, 2.0], 0.0)[0] == 0.25

    def test_exponential_tails(self):
        assert pit_cdf(self.levels, [0.0, 1.0, 2.0], -1.0)[0] == pytest.approx(0.25 * math.exp(-1.0))
        assert pit_cdf(self.levels, [0.0, 1.0, 2.0], 3.0)[0] == pytest.approx(1.0 - 0.25 * math.exp(-1.0))

    def test_crossed_forecast_is_sorted(self):
        assert pit_cdf(self.levels, [2.0, 1.0, 0.0], 1.0)[0] == 0.5

    def test_degenerate_forecast(self):
        value, degenerate = pit_cdf(self.levels, [1.0, 1.0, 1.0], 1.0)
        assert degenerate and value == 0.75
        assert pit_cdf(self.levels, [1.0, 1.0, 1.0], 0.0)[0] == pytest.approx(0.25 * math.exp(-1.0))

    def test_monotone_and_bounded(self, rng):
        for _ in range(100):
            size = int(rng.integers(3, 12))
            levels = QuantileLevels(tuple(np.sort(rng.choice(np.arange(1, 100), size=size, replace=False)) / 100))
            q = np.sort(rng.normal(size=size))
            ys = np.sort(rng.normal(size=1000) * 3)
            values = [pit_cdf(levels, q, y)[0] for y in ys]
            assert np.all(np.diff(values) >= -1e-15)
            assert all(0.0 <= v <= 1.0 for v in values)

    def test_too_few_levels(self):
        with pytest.raises(InputError):
            pit_values(QuantileLevels((0.25, 0.75)), [[0.0, 1.0]], [0.5])

    def test_calibrated_forecaster_has_high_entropy(self, rng):
        grid = (0.01, 0.025, 0.05) + tuple(round(0.05 * k, 2) for k in range(2, 19)) + (0.95, 0.975, 0.99)
        levels = QuantileLevels(grid)
        assert levels.size == 23
        mu = np.cumsum(rng.normal(size=10_000)) * 0.1
        y = mu + rng.normal(size=mu.size)
        forecasts = mu[:, None] + norm.ppf(levels.as_array())[None, :]
        values, degenerate = pit_values(levels, forecasts, y)
        assert degenerate == 0
        assert histogram_entropy(values, 10) >= 0.98

    def test_biased_forecaster_has_low_entropy(self, make_records, rng):
        levels = QuantileLevels((0.1, 0.5, 0.9))
        y = rng.normal(size=5000)
        forecasts = 10.0 + norm.ppf(levels.as_array())[None, :] + np.zeros((y.size, 1))
        records = make_records(levels, forecasts, y)
        assert pit_entropy(records, levels) <= 0.5


class TestHistogramEntropy:
    def test_uniform_bins(self):
        assert histogram_entropy(np.linspace(0.05, 0.95, 10), 10) == pytest.approx(1.0)

    def test_single_bin(self):
        assert histogram_entropy([0.31, 0.32, 0.33], 10) == 0.0

    def test_one_lands_in_last_bin(self):
        assert histogram_entropy([0.0, 1.0], 10) == pytest.approx(math.log(2) / math.log(10))

    def test_invalid_bins(self):
        with pytest.raises(InputError):
            histogram_entropy([0.5], 1)


# =============================================================================
# Regret
# =============================================================================


class TestRegret:
    def test_replaying_played_offset_gives_zero(self, make_records, rng):
        levels = QuantileLevels((0.25, 0.75))
        records = make_records(levels, [[-1.0, 1.0]] * 100, rng.normal(size=100))
        result = compute_regret(records, levels, comparator=[-1.0, 1.0])
        assert result.value == pytest.approx(0.0, abs=1e-12)
        assert result.comparator_kind == "custom"

    def test_empirical_comparator_is_type_one_quantile(self):
        levels = QuantileLevels((0.5,))
        np.testing.assert_array_equal(
            empirical_quantile_comparator(levels, np.array([[1.0], [2.0], [3.0], [4.0]])), [2.0]
        )

    def test_infeasible_comparator_falls_back(self, make_records):
        levels = QuantileLevels((0.25, 0.75))
        records = make_records(levels, [[0.0, 1.0]], [0.5], base=[[0.0, 1.0]])
        result = compute_regret(records, levels, comparator=[2.0, 0.0])
        assert result.fallback
        assert result.comparator == [0.0, 0.0]

    def test_unknown_mode(self, make_records):
        levels = QuantileLevels((0.5,))
        with pytest.raises(InputError):
            compute_regret(make_records(levels, [[0.0]], [0.0]), levels, mode="oracle")

    @pytest.mark.parametrize("eta", [0.01, 0.1, 1.0])
    @pytest.mark.parametrize("mode", ["empirical", "zero"])
    def test_regret_within_bound(self, bounded_streams, eta, mode):
        for levels, base, y, bound_r in bounded_streams[:4]:
            records = run_series(VariantSpec(kind=VariantKind.MULTIQT, eta=eta), levels, zip(base, y))
            result = compute_regret(records, levels, mode=mode)
            assert result.value <= regret_bound(levels, bound_r, eta, len(records))


# =============================================================================
# Bounds
# =============================================================================


class TestBounds:
    one = QuantileLevels((0.5,))

    def test_calibration_bound_example(self):
        assert calibration_bound(self.one, 1.0, 1.0, 100) == pytest.approx(math.sqrt(0.05))
        assert calibration_bound(self.one, 1.0, 1.0, 100, init_norm=1.0) == pytest.approx(0.02 + math.sqrt(0.05))

    def test_zero_delay_matches(self):
        levels = QuantileLevels((0.1, 0.5, 0.9))
        assert delayed_calibration_bound(levels, 3.0, 0.2, 500, 0) == pytest.approx(calibration_bound(levels, 3.0, 0.2, 500))
        assert delayed_regret_bound(levels, 3.0, 0.2, 500, 0) == pytest.approx(regret_bound(levels, 3.0, 0.2, 500))

    def test_regret_bound_example(self):
        assert regret_bound(self.one, 1.0, 1.0, 100) == pytest.approx(2.005)
        assert delayed_regret_bound(self.one, 1.0, 1.0, 100, 1) == pytest.approx(4.005)

    def test_other_bound_examples(self):
        assert tracker_coverage_bound(0.0, 1.0, 1.0, 100) == pytest.approx(0.02)
        assert projection_distance_bound(self.one, 1.0) == pytest.approx(1 / math.sqrt(3))
        assert point_forecast_calibration_bound(self.one, 1.0, 1.0, 100) == pytest.approx(
            0.04 + 1 / (100 * math.sqrt(3))
        )
        assert optimal_regret_eta(1.0, 100) == pytest.approx(0.05)
        assert optimal_regret_eta(1.0, 100, delay=3) == pytest.approx(0.025)
        assert tradeoff_eta(1000) == pytest.approx(0.1)

    def test_monotonicity(self):
        levels = QuantileLevels((0.1, 0.5, 0.9))
        horizons = [10, 100, 1000, 10_000]
        by_horizon = [calibration_bound(levels, 2.0, 0.5, t) for t in horizons]
        assert by_horizon == sorted(by_horizon, reverse=True)
        by_eta = [calibration_bound(levels, 2.0, eta, 1000) for eta in (0.01, 0.1, 1.0)]
        assert by_eta == sorted(by_eta, reverse=True)
        by_delay = [delayed_calibration_bound(levels, 2.0, 0.5, 1000, d) for d in range(4)]
        assert by_delay == sorted(by_delay)
        by_residual = [calibration_bound(levels, r, 0.5, 1000) for r in (0.0, 0.5, 2.0, 10.0)]
        assert by_residual == sorted(by_residual)

    @pytest.mark.parametrize(
        "args", [(-1.0, 1.0, 10), (1.0, 0.0, 10), (1.0, 1.0, 0), (float("inf"), 1.0, 10)]
    )
    def test_invalid_inputs(self, args):
        with pytest.raises(InputError):
            calibration_bound(self.one, *args)


# =============================================================================
# Report
# =============================================================================


class TestBuildReport:
    def test_fixed_eta_report(self, bounded_streams):
        levels, base, y, _ = bounded_streams[0]
        spec = VariantSpec(kind=VariantKind.MULTIQT, eta=0.2)
        records = run_series(spec, levels, zip(base[:2000], y[:2000]))
        report = build_report(records, levels, spec)
        assert set(report.bounds) == {"calibration", "regret"}
        assert report.bounds["calibration"].held
        assert report.pit_entropy is not None
        assert report.to_dict()["coverage"]["0.5"] == report.coverage[1]

    def test_single_level_adds_tracker_bound_and_skips_pit(self):
        levels = QuantileLevels((0.5,))
        spec = VariantSpec(kind=VariantKind.QT_INDEPENDENT, eta=0.5)
        records = run_series(spec, levels, [([0.0], float(v)) for v in np.linspace(-1, 1, 50)])
        report = build_report(records, levels, spec)
        assert "tracker_coverage" in report.bounds
        assert report.pit_entropy is None
        assert not report.bounds["calibration"].applies

    def test_heuristic_skips_bounds(self):
        levels = QuantileLevels((0.5,))
        spec = VariantSpec(kind=VariantKind.MULTIQT, heuristic=LearningRateHeuristic())
        records = run_series(spec, levels, [([0.0], 1.0)] * 10)
        assert build_report(records, levels, spec).bounds == {}
