import json
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from jinja2 import Environment

from config import Config
from core.exceptions import InputError, SeriesFormatError
from core.isotonic import crossing_mask, pava
from core.losses import pinball_matrix
from core.templates import Template
from models.forecast import QuantileLevels, SeriesData, StepRecord
from models.report import RunReport
from models.run_config import RunConfig
from services.adversarial_generator import build_scenario, comparison_report, comparison_summary
from services.metrics_service import build_report, histogram_entropy, pit_values, tradeoff_eta
from services.tracker_service import run_series
from utils.helpers import coverage_column_name, format_float, level_column_name, parse_level_column

TIME_COLUMNS = ("t", "time", "time_index", "date")

_templates = Environment(trim_blocks=False, lstrip_blocks=False, keep_trailing_newline=True)


# =============================================================================
# Series files
# =============================================================================


def _parse_column(frame: pd.DataFrame, column: str, path) -> np.ndarray:
    values = np.empty(len(frame))
    for i, text in enumerate(frame[column]):
        text = text.strip()
        row = i + 2
        if not text:
            raise SeriesFormatError("missing value", path, row, column)
        try:
            value = float(text)
        except ValueError:
            raise SeriesFormatError(f"malformed number '{text}'", path, row, column)
        if not math.isfinite(value):
            raise SeriesFormatError(f"non-finite value '{text}'", path, row, column)
        values[i] = value
    return values


def _check_time_order(times: List[str], path):
    try:
        keys = [float(t) for t in times]
    except ValueError:
        keys = times
    else:
        if not all(math.isfinite(k) for k in keys):
            keys = times
    for i in range(1, len(keys)):
        if keys[i] == keys[i - 1]:
            raise SeriesFormatError(f"duplicate time '{times[i]}'", path, i + 2)
        if keys[i] < keys[i - 1]:
            raise SeriesFormatError(f"time '{times[i]}' is earlier than the previous row", path, i + 2)


def read_series(path, repair_base: Optional[str] = None, require_ordered: bool = True) -> SeriesData:
    """Read a wide CSV of (time, y, q_<level>...) into base forecasts and outcomes"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise SeriesFormatError(f"unreadable CSV: {e}", path)

    frame.columns = [str(c).strip() for c in frame.columns]
    if not len(frame.columns) or frame.columns[0] not in TIME_COLUMNS:
        raise SeriesFormatError(f"first column must be one of {', '.join(TIME_COLUMNS)}", path, 1)
    if "y" not in frame.columns:
        raise SeriesFormatError("missing 'y' column", path, 1)

    parsed = []
    for column in frame.columns:
        match = parse_level_column(column)
        if match is None:
            continue
        try:
            level = float(match[1])
        except ValueError:
            raise SeriesFormatError(f"level '{match[1]}' is not a number", path, 1, column)
        if not 0.0 < level < 1.0:
            raise SeriesFormatError(f"level {level} is outside (0, 1)", path, 1, column)
        parsed.append((level, column))
    if not parsed:
        raise SeriesFormatError("no q_<level> columns", path, 1)

    parsed.sort()
    try:
        levels = QuantileLevels(tuple(level for level, _ in parsed))
    except InputError as e:
        raise SeriesFormatError(str(e), path, 1)
    level_columns = [column for _, column in parsed]

    time_column = frame.columns[0]
    times = [t.strip() for t in frame[time_column]]
    for i, t in enumerate(times):
        if not t:
            raise SeriesFormatError("missing time", path, i + 2, time_column)
    _check_time_order(times, path)

    y = _parse_column(frame, "y", path)
    base = np.column_stack([_parse_column(frame, column, path) for column in level_columns]) \
        if len(frame) else np.empty((0, levels.size))

    crossed = np.flatnonzero(crossing_mask(base)) if len(frame) else np.array([], dtype=int)
    repaired = 0
    if crossed.size:
        if repair_base == "isotonic":
            for row in crossed:
                base[row] = pava(base[row])
            repaired = int(crossed.size)
            logging.warning(f"Repaired {repaired} crossed base forecasts in {path} by isotonic projection")
        elif require_ordered:
            raise SeriesFormatError(
                "crossed base forecasts (use --repair-base=isotonic)", path, int(crossed[0]) + 2
            )

    logging.info(f"Read {len(y)} steps with levels {list(levels.values)} from {path}")
    return SeriesData(
        levels=levels,
        times=times,
        base=base,
        y=y,
        level_columns=level_columns,
        time_column=time_column,
        repaired_steps=repaired,
        source=str(path),
    )


def write_series(path, times, y, base, levels: QuantileLevels, level_columns=None, coverage=None, time_column="t"):
    """Write the wide layout with shortest round-trip decimals"""
    level_columns = level_columns or [level_column_name(level) for level in levels]
    columns = [time_column, "y"] + list(level_columns)
    if coverage is not None:
        columns += [coverage_column_name(level) for level in levels]

    rows = []
    for i, t in enumerate(times):
        row = [str(t), format_float(y[i])] + [format_float(v) for v in base[i]]
        if coverage is not None:
            row += [str(int(c)) for c in coverage[i]]
        rows.append(row)

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, lineterminator="\n")


def write_forecasts(path, series: SeriesData, records: List[StepRecord]):
    write_series(
        path,
        series.times,
        series.y,
        np.vstack([record.q for record in records]),
        series.levels,
        level_columns=series.level_columns,
        coverage=np.vstack([record.coverage for record in records]),
        time_column=series.time_column,
    )


def write_json(path, payload: Dict):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def write_plot_data(path, report: RunReport):
    """Calibration curve points: (level, desired coverage, actual coverage)"""
    frame = pd.DataFrame({
        "level": [format_float(level) for level in report.levels],
        "desired": [format_float(level) for level in report.levels],
        "actual": [format_float(c) for c in report.coverage],
    })
    frame.to_csv(path, index=False, lineterminator="\n")


def write_summary(path, report: RunReport):
    rows = [
        (format_float(level), coverage, gap)
        for level, coverage, gap in zip(report.levels, report.coverage, report.coverage_gaps)
    ]
    text = _templates.from_string(Template.run_summary).render(report=report, rows=rows)
    Path(path).write_text(text, encoding="utf-8")


# =============================================================================
# Commands
# =============================================================================


def cli_run(config: RunConfig) -> RunReport:
    """Recalibrate one series and write forecasts, report and plot data"""
    series = read_series(
        config.input_path, config.repair_base, require_ordered=config.variant.requires_ordered_base
    )
    if series.horizon == 0:
        raise InputError(f"{config.input_path} has no rows")

    records = run_series(config.variant, series.levels, series.pairs(), config.init_offset)
    report = build_report(
        records,
        series.levels,
        config.variant,
        init_offset=config.init_offset,
        pit_bins=config.pit_bins,
        comparator_mode=config.comparator,
        repaired_steps=series.repaired_steps,
    )
    if config.timestamp:
        report.generated_at = datetime.now(timezone.utc).isoformat()

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_forecasts(out / Config.get_output_file("forecast_file"), series, records)
    write_json(out / Config.get_output_file("report_file"), report.to_dict())
    write_summary(out / Config.get_output_file("summary_file"), report)
    if config.write_plot_data:
        write_plot_data(out / Config.get_output_file("plot_file"), report)

    logging.info(f"Wrote run outputs for {report.variant} to {out}")
    return report


def cli_sweep(config: RunConfig, eta_grid: List[float]) -> pd.DataFrame:
    """One report row per learning rate, written as CSV"""
    if not eta_grid:
        raise InputError("Learning-rate grid is empty")
    series = read_series(
        config.input_path, config.repair_base, require_ordered=config.variant.requires_ordered_base
    )
    if series.horizon == 0:
        raise InputError(f"{config.input_path} has no rows")

    rows = []
    for eta in eta_grid:
        spec = config.variant.model_copy(update={"eta": float(eta), "heuristic": None})
        records = run_series(spec, series.levels, series.pairs(), config.init_offset)
        report = build_report(
            records, series.levels, spec,
            init_offset=config.init_offset,
            pit_bins=config.pit_bins,
            comparator_mode=config.comparator,
            repaired_steps=series.repaired_steps,
        )
        rows.append({
            "eta": eta,
            "calibration_error": report.calibration_error,
            "max_coverage_gap": report.max_coverage_gap,
            "quantile_loss": report.quantile_loss,
            "regret": report.regret.value,
            "calibration_bound": report.bounds["calibration"].value,
            "regret_bound": report.bounds["regret"].value,
            "regret_eta_term": 2 * eta * series.levels.size * (spec.delay + 1),
            "reference_eta": tradeoff_eta(series.horizon, scale=max(report.residual_bound, 1e-12)),
        })

    table = pd.DataFrame(rows)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / Config.get_output_file("sweep_file"), index=False, lineterminator="\n", float_format=None)
    logging.info(f"Swept {len(eta_grid)} learning rates over {series.horizon} steps")
    return table


def cli_adversarial(name: str, params: Dict, output_dir) -> Dict:
    """Generate a named scenario, write its series and the variant comparison"""
    scenario = build_scenario(name, **params)
    levels = QuantileLevels(tuple(scenario.levels))
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    times = [str(t) for t in range(1, scenario.horizon + 1)]
    write_series(out / Config.get_output_file("series_file"), times, scenario.y, scenario.base, levels)

    summary = comparison_summary(scenario, comparison_report(scenario))
    write_json(out / Config.get_output_file("comparison_file"), summary)
    text = _templates.from_string(Template.comparison_summary).render(summary=summary)
    (out / Config.get_output_file("comparison_summary_file")).write_text(text, encoding="utf-8")
    logging.info(f"Wrote scenario {name} with {scenario.horizon} steps to {out}")
    return summary


def evaluate_forecast_file(path, pit_bins: int = 10) -> Dict:
    """Metrics for an already corrected forecast file; no base forecasts, so no regret"""
    series = read_series(path, require_ordered=False)
    if series.horizon == 0:
        raise InputError(f"{path} has no rows")

    levels = series.levels
    alphas = levels.as_array()
    coverage = (series.y[:, None] <= series.base).mean(axis=0)
    gaps = np.abs(coverage - alphas)
    metrics = {
        "levels": list(levels.values),
        "horizon": series.horizon,
        "coverage": {format_float(a): float(c) for a, c in zip(alphas, coverage)},
        "calibration_error": float(gaps.mean()),
        "max_coverage_gap": float(gaps.max()),
        "quantile_loss": float(pinball_matrix(alphas, series.base, series.y).mean()),
        "crossing_fraction": float(crossing_mask(series.base).mean()),
        "pit_entropy": None,
        "pit_degenerate_steps": 0,
    }
    if levels.size >= Config.PIT_CONFIG["min_levels"]:
        values, degenerate = pit_values(levels, series.base, series.y)
        metrics["pit_entropy"] = histogram_entropy(values, pit_bins)
        metrics["pit_degenerate_steps"] = degenerate
    return metrics


def simulate_series(path, horizon: int, levels: QuantileLevels, seed: Optional[int] = None,
                    noise_scale: float = 1.0, bias: float = 0.5, spread: float = 0.6) -> SeriesData:
    """Seasonal series with biased, too-narrow logistic base quantiles"""
    if horizon < 1:
        raise InputError(f"horizon must be at least 1, got {horizon}")
    rng = np.random.default_rng(seed)
    t = np.arange(1, horizon + 1)
    signal = 10.0 + 3.0 * np.sin(2 * np.pi * t / 52.0)
    y = signal + noise_scale * rng.standard_normal(horizon)

    alphas = levels.as_array()
    logistic = np.log(alphas / (1.0 - alphas))
    base = signal[:, None] + bias + spread * noise_scale * logistic[None, :]

    times = [str(v) for v in t]
    write_series(path, times, y, base, levels)
    logging.info(f"Simulated {horizon} steps with seed {seed} into {path}")
    return SeriesData(levels=levels, times=times, base=base, y=y,
                      level_columns=[level_column_name(a) for a in levels], source=str(path))
