"""Despeckle CLI: entry point for the `despeckle` console script."""

from typing import Optional

import click

from despeckle.commands import bench_cmd, metrics_cmd, run_cmd, synth_cmd
from despeckle_core.logging import default_log_level, setup_loguru


@click.group(invoke_without_command=True)
@click.version_option(package_name="despeckle-core")
@click.option(
    "--log-level",
    default=None,
    type=click.Choice(["TRACE", "DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    help="Verbosity (default: $DESPECKLE_LOG_LEVEL or INFO).",
)
@click.option("--json-logs", is_flag=True, default=False, help="Emit log records as JSON.")
@click.pass_context
def cli(ctx: click.Context, log_level: Optional[str], json_logs: bool) -> None:
    """Despeckle CLI: ICA-based speckle reduction of repeated B-scans."""
    level = (log_level or default_log_level()).upper()
    ctx.obj = {"log_level": level, "json_logs": json_logs}
    setup_loguru(level=level, json_format=json_logs)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


cli.add_command(run_cmd)
cli.add_command(synth_cmd)
cli.add_command(metrics_cmd)
cli.add_command(bench_cmd)


def main() -> None:
    """Entry point for [project.scripts] despeckle = despeckle.main:main."""
    cli()


if __name__ == "__main__":
    main()
