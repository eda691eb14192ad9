"""quantcal: online recalibration of multi-level quantile forecasts"""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Annotated, Optional

import typer
from pydantic import ValidationError

from config import Config
from core.exceptions import InputError, QuantcalError, ScenarioError
from models.forecast import QuantileLevels
from models.run_config import LearningRateHeuristic, RunConfig, VariantKind, VariantSpec
from services.adversarial_generator import SCENARIOS
from services.runner_service import (
    cli_adversarial,
    cli_run,
    cli_sweep,
    evaluate_forecast_file,
    simulate_series,
    write_json,
)
from utils.helpers import parse_eta_grid, parse_float_list

app = typer.Typer(help="Online recalibration of multi-level quantile forecasts.", no_args_is_help=True)


class RepairMode(str, Enum):
    ISOTONIC = "isotonic"


class ComparatorMode(str, Enum):
    EMPIRICAL = "empirical"
    ZERO = "zero"


InputOption = Annotated[Path, typer.Option("--input", "-i", help="Wide CSV: time, y, q_<level> columns.")]
OutOption = Annotated[Path, typer.Option("--out", "-o", help="Output directory.")]
VariantOption = Annotated[VariantKind, typer.Option("--variant", help="Tracker variant.")]
EtaOption = Annotated[Optional[float], typer.Option("--eta", help="Fixed learning rate.")]
HeuristicOption = Annotated[bool, typer.Option("--eta-heuristic", help="Use the trailing-residual learning rate.")]
DelayOption = Annotated[int, typer.Option("--delay", help="Feedback delay D in steps.")]
EpsOption = Annotated[float, typer.Option("--eps", help="Separation for multiqt_eps.")]
RepairOption = Annotated[Optional[RepairMode], typer.Option("--repair-base", help="Project crossed base forecasts.")]
InitOption = Annotated[Optional[str], typer.Option("--init-offset", help="Initial hidden offset, one value or comma list.")]
BinsOption = Annotated[int, typer.Option("--pit-bins", help="PIT histogram bins.")]
ComparatorOption = Annotated[ComparatorMode, typer.Option("--comparator", help="Regret comparator.")]


@app.callback()
def main(
    log_level: Annotated[Optional[str], typer.Option("--log-level", help="Logging level.")] = None,
):
    try:
        Config.validate_config()
    except ValueError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=1)
    logging.basicConfig(
        level=(log_level or Config.LOGGING_CONFIG["level"]).upper(),
        format=Config.LOGGING_CONFIG["format"],
    )


def _fail(action: str, error: Exception):
    logging.error(f"Error {action}: {error}")
    typer.echo(f"Error: {error}", err=True)
    raise typer.Exit(code=1)


def _variant(variant, eta, eta_heuristic, delay, eps) -> VariantSpec:
    if eta is not None and eta_heuristic:
        raise typer.BadParameter("Use either --eta or --eta-heuristic, not both")
    if eta is None and not eta_heuristic:
        eta = Config.TRACKER_CONFIG["default_eta"]
    try:
        return VariantSpec(
            kind=variant,
            eta=eta,
            heuristic=LearningRateHeuristic() if eta_heuristic else None,
            delay=delay,
            eps=eps,
        )
    except ValidationError as e:
        raise typer.BadParameter(str(e))


def _run_config(input_path, out, spec, repair_base, init_offset, pit_bins, comparator, plot_data=True, timestamp=False) -> RunConfig:
    try:
        return RunConfig(
            input_path=input_path,
            output_dir=out,
            variant=spec,
            init_offset=parse_float_list(init_offset, "init_offset") or [Config.TRACKER_CONFIG["init_offset"]],
            repair_base=repair_base.value if repair_base else None,
            pit_bins=pit_bins,
            comparator=comparator.value,
            write_plot_data=plot_data,
            timestamp=timestamp,
        )
    except (ValidationError, InputError) as e:
        raise typer.BadParameter(str(e))


@app.command()
def run(
    input_path: InputOption,
    out: OutOption,
    variant: VariantOption = VariantKind(Config.TRACKER_CONFIG["default_variant"]),
    eta: EtaOption = None,
    eta_heuristic: HeuristicOption = False,
    delay: DelayOption = 0,
    eps: EpsOption = 0.0,
    repair_base: RepairOption = None,
    init_offset: InitOption = None,
    pit_bins: BinsOption = Config.PIT_CONFIG["bins"],
    comparator: ComparatorOption = ComparatorMode.EMPIRICAL,
    plot_data: Annotated[bool, typer.Option("--plot-data/--no-plot-data", help="Write calibration-curve CSV.")] = True,
    timestamp: Annotated[bool, typer.Option("--timestamp", help="Embed a generation time in the report.")] = False,
):
    """Recalibrate a series and write corrected forecasts plus a report."""
    spec = _variant(variant, eta, eta_heuristic, delay, eps)
    config = _run_config(input_path, out, spec, repair_base, init_offset, pit_bins, comparator, plot_data, timestamp)
    try:
        report = cli_run(config)
    except (QuantcalError, OSError) as e:
        _fail("running recalibration", e)

    typer.echo(f"{report.variant}: calibration error {report.calibration_error:.6f}, "
               f"quantile loss {report.quantile_loss:.6f}")
    for name, check in report.bounds.items():
        typer.echo(f"  {name} bound {check.value:.6f} observed {check.observed:.6f} "
                   f"{'held' if check.held else 'violated'}")


@app.command()
def sweep(
    input_path: InputOption,
    out: OutOption,
    eta_grid: Annotated[str, typer.Option("--eta-grid", help="Comma separated learning rates.")],
    variant: VariantOption = VariantKind(Config.TRACKER_CONFIG["default_variant"]),
    delay: DelayOption = 0,
    eps: EpsOption = 0.0,
    repair_base: RepairOption = None,
    init_offset: InitOption = None,
    pit_bins: BinsOption = Config.PIT_CONFIG["bins"],
    comparator: ComparatorOption = ComparatorMode.EMPIRICAL,
):
    """Run one variant over a grid of learning rates."""
    try:
        grid = parse_eta_grid(eta_grid)
    except InputError as e:
        raise typer.BadParameter(str(e))
    spec = _variant(variant, grid[0], False, delay, eps)
    config = _run_config(input_path, out, spec, repair_base, init_offset, pit_bins, comparator)
    try:
        table = cli_sweep(config, grid)
    except (QuantcalError, OSError) as e:
        _fail("sweeping learning rates", e)
    typer.echo(table.to_string(index=False))


@app.command()
def adversarial(
    scenario: Annotated[str, typer.Option("--scenario", help=f"One of: {', '.join(SCENARIOS)}.")],
    out: OutOption,
    alpha: Annotated[Optional[float], typer.Option("--alpha")] = None,
    beta: Annotated[Optional[float], typer.Option("--beta")] = None,
    eta: Annotated[Optional[float], typer.Option("--eta")] = None,
    eps: Annotated[Optional[float], typer.Option("--eps")] = None,
    q0: Annotated[Optional[float], typer.Option("--q0")] = None,
    repetitions: Annotated[Optional[int], typer.Option("--repetitions")] = None,
    horizon: Annotated[Optional[int], typer.Option("--horizon")] = None,
    mirrored: Annotated[Optional[bool], typer.Option("--mirrored/--no-mirrored")] = None,
):
    """Generate a counterexample stream and compare variants on it."""
    if scenario not in SCENARIOS:
        raise typer.BadParameter(str(ScenarioError(scenario, SCENARIOS)), param_hint="--scenario")
    params = {
        "alpha": alpha, "beta": beta, "eta": eta, "eps": eps, "q0": q0,
        "repetitions": repetitions, "horizon": horizon, "mirrored": mirrored,
    }
    accepted = Config.get_scenario_defaults(scenario)
    unknown = [f"--{key}" for key, value in params.items() if value is not None and key not in accepted]
    if unknown:
        raise typer.BadParameter(f"{scenario} does not take {', '.join(unknown)}")

    try:
        summary = cli_adversarial(scenario, params, out)
    except (QuantcalError, OSError) as e:
        _fail(f"generating scenario {scenario}", e)

    for row in summary["rows"]:
        coverage = " / ".join(f"{c:.4f}" for c in row["coverage"])
        typer.echo(f"{row['variant']:>18}: {coverage}  max gap {row['max_gap']:.4f}")


@app.command()
def metrics(
    input_path: InputOption,
    pit_bins: BinsOption = Config.PIT_CONFIG["bins"],
    out: Annotated[Optional[Path], typer.Option("--out", "-o", help="Write metrics JSON here.")] = None,
):
    """Evaluate an already corrected forecast file."""
    try:
        result = evaluate_forecast_file(input_path, pit_bins)
        if out is not None:
            write_json(out, result)
    except (QuantcalError, OSError) as e:
        _fail("evaluating forecasts", e)
    typer.echo(json.dumps(result, indent=2))


@app.command()
def simulate(
    out: Annotated[Path, typer.Option("--out", "-o", help="CSV file to write.")],
    horizon: Annotated[int, typer.Option("--horizon")] = Config.SIMULATION_CONFIG["horizon"],
    levels: Annotated[Optional[str], typer.Option("--levels", help="Comma separated levels.")] = None,
    seed: Annotated[Optional[int], typer.Option("--seed", help="Overrides QUANTCAL_SEED.")] = None,
):
    """Write a synthetic miscalibrated series for trying the engine."""
    settings = Config.SIMULATION_CONFIG
    try:
        values = parse_float_list(levels, "levels") or settings["levels"]
        quantile_levels = QuantileLevels(tuple(values))
    except InputError as e:
        raise typer.BadParameter(str(e), param_hint="--levels")

    try:
        simulate_series(
            out, horizon, quantile_levels, seed=Config.get_seed(seed),
            noise_scale=settings["noise_scale"], bias=settings["bias"], spread=settings["spread"],
        )
    except (QuantcalError, OSError) as e:
        _fail("simulating series", e)
    typer.echo(f"Wrote {horizon} steps to {out}")


if __name__ == "__main__":
    app()
