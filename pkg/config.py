import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    # Environment
    QUANTCAL_SEED = os.getenv("QUANTCAL_SEED")
    LOG_LEVEL = os.getenv("QUANTCAL_LOG_LEVEL", "INFO")

    # Tracker Configuration
    TRACKER_CONFIG = {
        "default_variant": "multiqt",
        "default_eta": 0.1,
        "init_offset": 0.0
    }

    # Learning-rate heuristic: max(factor * Quantile_q(last `window` residuals), floor)
    LEARNING_RATE_HEURISTIC = {
        "window": 50,
        "quantile": 0.9,
        "factor": 0.01,
        "floor": 0.1
    }

    # Metrics Configuration
    PIT_CONFIG = {
        "bins": 10,
        "min_levels": 3
    }

    # Output Configuration
    OUTPUT_CONFIG = {
        "forecast_file": "forecasts.csv",
        "report_file": "report.json",
        "summary_file": "summary.md",
        "plot_file": "calibration_curve.csv",
        "sweep_file": "sweep.csv",
        "series_file": "series.csv",
        "comparison_file": "comparison.json",
        "comparison_summary_file": "comparison.md"
    }

    # Adversarial Scenario Defaults
    SCENARIO_DEFAULTS = {
        "sorted_qt_cycle": {
            "eta": 1.0,
            "repetitions": 1000
        },
        "pgd_cycle": {
            "alpha": 0.2,
            "beta": 0.3,
            "eta": 1.0,
            "q0": 0.0,
            "repetitions": 5000,
            "mirrored": False
        },
        "multiqt_sort_divergence": {
            "alpha": 0.3,
            "beta": 0.7,
            "eta": 1.0,
            "horizon": 10000
        },
        "eps_separated_divergence": {
            "alpha": 0.25,
            "beta": 0.75,
            "eta": 1.0,
            "eps": 1.0,
            "horizon": 10000
        }
    }

    # Synthetic Series Configuration
    SIMULATION_CONFIG = {
        "horizon": 1000,
        "levels": [0.1, 0.25, 0.5, 0.75, 0.9],
        "noise_scale": 1.0,
        "bias": 0.5,
        "spread": 0.6
    }

    # Logging Configuration
    LOGGING_CONFIG = {
        "level": LOG_LEVEL,
        "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    }

    @classmethod
    def validate_config(cls):
        """Validate that environment-provided configuration is usable"""
        errors = []

        if cls.QUANTCAL_SEED is not None:
            try:
                int(cls.QUANTCAL_SEED)
            except ValueError:
                errors.append(f"QUANTCAL_SEED must be an integer, got '{cls.QUANTCAL_SEED}'")

        if cls.LOGGING_CONFIG["level"].upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"QUANTCAL_LOG_LEVEL '{cls.LOGGING_CONFIG['level']}' is not a logging level")

        if errors:
            raise ValueError("Configuration errors: " + ", ".join(errors))

        return True

    @classmethod
    def get_seed(cls, override=None):
        """Seed for synthetic data, CLI value first then environment"""
        if override is not None:
            return int(override)
        if cls.QUANTCAL_SEED is not None:
            return int(cls.QUANTCAL_SEED)
        return None

    @classmethod
    def get_learning_rate_heuristic(cls):
        """Get learning-rate heuristic settings"""
        return cls.LEARNING_RATE_HEURISTIC

    @classmethod
    def get_output_file(cls, key):
        """Get an output file name"""
        return cls.OUTPUT_CONFIG[key]

    @classmethod
    def get_scenario_defaults(cls, scenario):
        """Get default parameters for an adversarial scenario"""
        return dict(cls.SCENARIO_DEFAULTS.get(scenario, {}))
