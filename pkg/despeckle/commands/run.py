"""despeckle run: execute a configured despeckling experiment."""

import math
from pathlib import Path
from typing import Optional

import click

from despeckle.handlers import reports_errors
from despeckle_core.logging import setup_loguru
from despeckle_core.pipeline import PipelineConfig, RunReport, load_pipeline_config, run_pipeline

DEFAULT_OUTPUT = "despeckle-out"


def load_config(config_path: str, profile: Optional[str], output: Optional[str], **run_updates) -> PipelineConfig:
    """Load the run configuration, applying command-line overrides to its ``run`` section."""
    config = load_pipeline_config(config_path, profile)
    updates = dict(run_updates)
    updates["output_dir"] = output or config.run.output_dir or DEFAULT_OUTPUT
    return config.model_copy(update={"run": config.run.model_copy(update=updates)})


def _fmt(value: Optional[float], spec: str) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return format(value, spec)


def print_summary(report: RunReport) -> None:
    click.echo(f"{'algorithm':<10} {'N':>4} {'SNR dB':>8} {'CNR':>7} {'ENL':>9} {'time s':>8}  status")
    m = report.input_metrics
    click.echo(f"{'input':<10} {1:>4} {_fmt(m.mean_snr_db, '.2f'):>8} {_fmt(m.mean_cnr, '.3f'):>7} "
               f"{_fmt(m.mean_enl, '.2f'):>9} {'-':>8}  ok")
    for cell in report.cells:
        if cell.metrics is None:
            click.echo(f"{cell.algorithm:<10} {cell.n_frames:>4} {'-':>8} {'-':>7} {'-':>9} {'-':>8}  {cell.error}")
            continue
        m = cell.metrics
        status = "ok" if cell.converged else "not converged"
        click.echo(
            f"{cell.algorithm:<10} {cell.n_frames:>4} {_fmt(m.mean_snr_db, '.2f'):>8} {_fmt(m.mean_cnr, '.3f'):>7} "
            f"{_fmt(m.mean_enl, '.2f'):>9} {_fmt(cell.elapsed_seconds, '.3f'):>8}  {status}"
        )


@click.command("run")
@click.option(
    "-c",
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, path_type=str),
    help="Run configuration (.ini file or directory of .ini files).",
)
@click.option("-p", "--profile", default=None, help="Override profile, e.g. acceptance.")
@click.option(
    "-o",
    "--output",
    default=None,
    type=click.Path(path_type=str),
    help="Output directory (default: run.output_dir or ./despeckle-out).",
)
@click.pass_context
@reports_errors
def run_cmd(ctx: click.Context, config_path: str, profile: Optional[str], output: Optional[str]) -> None:
    """Register, separate and score a B-scan stack for every configured (algorithm, N)."""
    config = load_config(config_path, profile, output)
    out_dir = Path(config.run.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    obj = ctx.obj or {}
    setup_loguru(level=obj.get("log_level"), json_format=obj.get("json_logs", False), log_file=str(out_dir / "run.log"))

    report = run_pipeline(config)
    print_summary(report)
    for warning in report.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"Report written to: {out_dir / 'report.csv'}")
