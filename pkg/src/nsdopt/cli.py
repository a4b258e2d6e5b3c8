"""nsdopt CLI - run and sweep distributed optimization experiments."""

import json
import logging
from pathlib import Path

import click
from dotenv import load_dotenv

from nsdopt import __version__
from nsdopt.config import (
    STARTER_CONFIG,
    ConfigError,
    ConfigNotFoundError,
    ExperimentConfig,
    load_experiment,
)
from nsdopt.models import write_sweep_csv
from nsdopt.network import NetworkError
from nsdopt.objectives import DimensionTooSmallError

# Load .env file if present (supports NSDOPT_WORKERS in .env)
load_dotenv()

CONFIG_EXIT = 2


def _parse_list(value: str | None, kind: type) -> list | None:
    if value is None:
        return None
    value = value.strip()
    if not value:
        return []
    try:
        return [kind(item) for item in value.split(",") if item.strip()]
    except ValueError as e:
        raise click.BadParameter(f"cannot parse {value!r}: {e}") from e


def _load(config_path: Path) -> ExperimentConfig:
    try:
        return load_experiment(config_path)
    except ConfigNotFoundError as e:
        click.secho(f"Error: {e}", fg="red", err=True)
        raise SystemExit(CONFIG_EXIT)
    except ConfigError as e:
        click.secho(f"Error: invalid configuration {e.path}", fg="red", err=True)
        for line in e.errors:
            click.echo(f"  {line}", err=True)
        raise SystemExit(CONFIG_EXIT)


@click.group()
@click.version_option(version=__version__, prog_name="nsdopt")
@click.option("--verbose", "-v", count=True, help="Log progress (-vv for per-iteration detail)")
def cli(verbose: int):
    """Simulate non-smooth distributed convex optimization.

    nsdopt runs distributed randomized smoothing, multi-step primal-dual and
    the naive subgradient baseline on a simulated network, and checks the
    measured gaps against their convergence bounds and lower envelopes.
    """
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.argument("path", type=click.Path(path_type=Path), default="experiment.json")
@click.option("--force", "-f", is_flag=True, help="Overwrite existing config")
def init(path: Path, force: bool):
    """Write a starter experiment config (5-node ring, MSPD)."""
    if path.exists() and not force:
        click.secho(f"Config already exists: {path}", fg="yellow")
        if not click.confirm("Overwrite?"):
            click.echo("Aborted.")
            return
    path.write_text(json.dumps(STARTER_CONFIG, indent=2) + "\n")
    click.echo(f"  Created {path}")
    click.echo("")
    click.echo("Next steps:")
    click.echo(f"  nsdopt run {path} --print-constants")
    click.echo(f"  nsdopt run {path}")


@cli.command()
@click.argument("config_path", type=click.Path(path_type=Path))
@click.option("--seeds", help="Comma-separated seeds (overrides the config)")
@click.option("--out", type=click.Path(path_type=Path), help="Output directory")
@click.option("--print-constants", is_flag=True, help="Print derived constants and exit")
@click.option("--no-bounds", is_flag=True, help="Skip the optimum solve and bound report")
def run(config_path: Path, seeds: str | None, out: Path | None, print_constants: bool,
        no_bounds: bool):
    """Run an experiment: one trace per seed plus bounds and summary."""
    from nsdopt.experiment import print_constants as derive_constants
    from nsdopt.experiment import run_experiment

    config = _load(config_path)
    seed_list = _parse_list(seeds, int)
    if seed_list == []:
        raise click.BadParameter("at least one seed is required", param_hint="--seeds")

    try:
        if print_constants:
            for key, value in derive_constants(config).items():
                click.echo(f"{key}={value}")
            return
        result = run_experiment(config, seeds=seed_list, output_dir=out,
                                with_bounds=not no_bounds)
    except (NetworkError, DimensionTooSmallError, ValueError) as e:
        click.secho(f"Error: {e}", fg="red", err=True)
        raise SystemExit(CONFIG_EXIT)

    summary = result.summary
    click.echo(f"Algorithm: {summary.algorithm}")
    click.echo(f"Seeds: {', '.join(str(s) for s in summary.seeds)}")
    click.echo(f"Simulated time: {summary.total_time:g} (closed form {summary.closed_form_time:g})")
    if summary.final_gap_mean is not None:
        click.echo(f"Final gap: {summary.final_gap_mean:.6g} ± {summary.final_gap_stderr:.2g}")
        if summary.upper_violations or summary.envelope_violations:
            click.secho(
                f"Bound violations: {summary.upper_violations} upper, "
                f"{summary.envelope_violations} envelope",
                fg="yellow",
            )
        else:
            click.secho("No bound violations", fg="green")
    click.echo(f"Results written to {result.output_dir}")


@cli.command()
@click.argument("config_path", type=click.Path(path_type=Path))
@click.option(
    "--axis",
    type=click.Choice(["epsilon", "dimension", "eigengap"]),
    required=True,
    help="Parameter to sweep",
)
@click.option("--values", "values_", required=True, help="Comma-separated positive values")
@click.option("--out", type=click.Path(path_type=Path), help="Write the table to this CSV file")
def sweep(config_path: Path, axis: str, values_: str, out: Path | None):
    """Closed-form time-to-ε of each algorithm along one axis."""
    from nsdopt.experiment import sweep as run_sweep

    config = _load(config_path)
    values = _parse_list(values_, float)
    try:
        rows = run_sweep(config, axis, values)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--values") from e
    click.echo(write_sweep_csv(rows, out), nl=False)


@cli.group()
def config():
    """Inspect experiment configs."""
    pass


@config.command("show")
@click.argument("config_path", type=click.Path(path_type=Path))
def config_show(config_path: Path):
    """Show the validated configuration with resolved paths."""
    config = _load(config_path)
    click.echo(f"Problem: {config.problem.kind} (d={config.problem.d}, R={config.problem.R})")
    if config.problem.kind == "worst_case_local":
        click.echo(f"Network: prescribed eigengap {config.problem.params['eigengap']}, "
                   f"tau={config.network.tau}")
    elif config.network.kind == "file":
        click.echo(f"Network: {config.network.file} (tau={config.network.tau})")
    else:
        click.echo(f"Network: {config.network.kind}{config.network.n} (tau={config.network.tau})")
    constants = "auto" if config.algorithm.constants == "auto" else "explicit"
    click.echo(f"Algorithm: {config.algorithm.name} (constants: {constants})")
    click.echo(f"Epsilon: {config.epsilon}")
    click.echo(f"Seeds: {', '.join(str(s) for s in config.seeds)}")
    click.echo(f"Output: {config.output_dir}")
