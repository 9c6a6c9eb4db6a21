"""
RE-ABC engine: CLI entrypoint.

Usage:
    python -m src.main generate                         # write data/gaussian_obs.csv
    python -m src.main pilot --config configs/x.ini     # pilot summary, schedule, particle count
    python -m src.main run --config configs/x.ini       # trace CSV + summary report
    python -m src.main diagnose --trace runs/x/trace.csv [--truth 3.0]
    python -m src.main cost-scan --config configs/x.ini # cost per effective sample across eps

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

import click
from rich import box
from rich.console import Console
from rich.table import Table

from src.contracts.config import RunConfig, load_config
from src.contracts.errors import ConfigError, ReAbcError
from src.contracts.schemas import EXIT_CONFIG_ERROR, EXIT_RUNTIME_FAILURE, GAUSSIAN_DATA_PATH, SUMMARY_FILENAME

console = Console()


def _report_table(title: str, report: dict[str, Any]) -> Table:
    table = Table(title=title, box=box.ROUNDED, show_header=True, header_style="bold magenta")
    table.add_column("key", style="bold")
    table.add_column("value", justify="right")
    for key, value in report.items():
        if isinstance(value, float):
            text = f"{value:.6g}"
        elif isinstance(value, (list, tuple)):
            text = ", ".join(f"{v:.4g}" if isinstance(v, float) else str(v) for v in value)
        else:
            text = str(value)
        table.add_row(key, text)
    return table


def _load(command: str, config_path: str, seed: Optional[int], workers: Optional[int], out: Optional[str]) -> RunConfig:
    return load_config(config_path, command).with_overrides(seed=seed, workers=workers, out=out)


def _fail(code: int, message: str) -> None:
    console.print(f"[red]error:[/red] {message}")
    raise SystemExit(code)


def _guarded(fn, *args):
    """Run a command body, mapping config and input errors to exit 2, algorithm failures to exit 3."""
    try:
        return fn(*args)
    except ConfigError as exc:
        _fail(EXIT_CONFIG_ERROR, str(exc))
    except ReAbcError as exc:
        _fail(EXIT_RUNTIME_FAILURE, f"{type(exc).__name__}: {exc}")
    except (ValueError, FileNotFoundError) as exc:
        _fail(EXIT_CONFIG_ERROR, str(exc))


def _run_options(fn):
    fn = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")(fn)
    fn = click.option("--workers", type=int, default=None, help="Worker threads (overrides config).")(fn)
    fn = click.option("--seed", type=click.IntRange(min=0), default=None, help="Seed (overrides config).")(fn)
    fn = click.option("--config", "config_path", type=click.Path(), required=True, help="INI run config.")(fn)
    return fn


@click.group()
def cli():
    """RE-ABC: rare-event SMC likelihood estimates inside pseudo-marginal MCMC."""
    pass


@cli.command()
@click.option("--out", "path", type=click.Path(dir_okay=False), default=GAUSSIAN_DATA_PATH, show_default=True)
def generate(path: str):
    """Write the seeded Gaussian dataset."""
    console.rule("[bold]Data Generation[/bold]")
    from src.data_generator.generate import main

    main(path)
    console.print("[green]Data generation complete.[/green]\n")


@cli.command()
@_run_options
def run(config_path: str, seed: Optional[int], workers: Optional[int], out: Optional[str]):
    """Run rejection, ABC-MCMC or RE-ABC as configured."""
    from src.experiments.run import cmd_run

    config = _guarded(_load, "run", config_path, seed, workers, out)
    console.rule(f"[bold]Run: {config.method} on {config.model.kind}[/bold]")
    outcome = _guarded(cmd_run, config)
    console.print(_report_table("Summary", outcome.report))
    for path in outcome.paths:
        console.print(f"  wrote {path}")
    console.print("[green]Run complete.[/green]\n")


@cli.command()
@_run_options
def pilot(config_path: str, seed: Optional[int], workers: Optional[int], out: Optional[str]):
    """Tune proposal, threshold schedule and particle count."""
    from src.experiments.pilot import cmd_pilot

    config = _guarded(_load, "pilot", config_path, seed, workers, out)
    console.rule(f"[bold]Pilot: {config.model.kind}[/bold]")
    outcome = _guarded(cmd_pilot, config)
    console.print(_report_table("Pilot", {
        "mean": outcome.summary.mean.tolist(),
        "covariance": outcome.summary.covariance.reshape(-1).tolist(),
        "epsilon": outcome.epsilon,
        "schedule_stages": len(outcome.schedule),
        "particles": outcome.particles,
    }))
    for path in outcome.paths:
        console.print(f"  wrote {path}")
    console.print("[green]Pilot complete.[/green]\n")


@cli.command()
@click.option("--trace", "trace_path", type=click.Path(), required=True, help="Trace CSV to summarise.")
@click.option("--truth", type=str, default=None, help="True parameter value(s), comma-separated.")
@click.option("--burn-in", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Also write summary.txt here.")
def diagnose(trace_path: str, truth: Optional[str], burn_in: int, out: Optional[str]):
    """ESS, acceptance rate, time per effective sample and RMSE of a trace."""
    from src.analytics.diagnostics import run as run_diagnostics
    from src.pipeline.export import header_lines, write_key_values

    console.rule("[bold]Diagnostics[/bold]")
    try:
        truth_values = [float(v) for v in truth.split(",")] if truth else None
        report = run_diagnostics(trace_path, truth=truth_values, burn_in=burn_in)
    except (ValueError, FileNotFoundError) as exc:
        _fail(EXIT_CONFIG_ERROR, str(exc))
    console.print(_report_table("Trace diagnostics", report))
    if out is not None:
        path = write_key_values(report, Path(out) / SUMMARY_FILENAME, header_lines({"trace": trace_path}, None))
        console.print(f"  wrote {path}")


@cli.command(name="cost-scan")
@_run_options
def cost_scan(config_path: str, seed: Optional[int], workers: Optional[int], out: Optional[str]):
    """Simulator calls and time per effective sample across an eps grid."""
    from src.analytics.cost_scan import run as run_cost_scan

    config = _guarded(_load, "cost-scan", config_path, seed, workers, out)
    console.rule("[bold]Cost scan[/bold]")
    rows, fit = _guarded(run_cost_scan, config)
    console.print(rows)
    console.print(_report_table("Scaling fits", fit.as_dict()))
    console.print("[green]Cost scan complete.[/green]\n")


if __name__ == "__main__":
    cli()
