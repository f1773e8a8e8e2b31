"""despeckle bench: time the estimators over the configured subset sizes."""

import csv
from pathlib import Path
from typing import Optional

import click

from despeckle.commands.run import load_config
from despeckle.handlers import reports_errors
from despeckle_core.pipeline import run_pipeline

TIMING_HEADER = ["algorithm", "n_frames", "elapsed_s"]


@click.command("bench")
@click.option(
    "-c",
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, path_type=str),
    help="Run configuration (.ini file or directory of .ini files).",
)
@click.option("-p", "--profile", default=None, help="Override profile.")
@click.option("-o", "--output", default=None, type=click.Path(path_type=str), help="Output directory.")
@reports_errors
def bench_cmd(config_path: str, profile: Optional[str], output: Optional[str]) -> None:
    """Run every cell one at a time and write timing.csv."""
    config = load_config(config_path, profile, output, timing=True, write_images=False)
    report = run_pipeline(config)

    path = Path(config.run.output_dir) / "timing.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMING_HEADER)
        for cell in report.cells:
            elapsed = "" if cell.elapsed_seconds is None else repr(float(cell.elapsed_seconds))
            writer.writerow([cell.algorithm, cell.n_frames, elapsed])
            click.echo(f"{cell.algorithm:<8} N={cell.n_frames:<4} {elapsed or cell.error}")
    click.echo(f"Timings written to: {path}")
