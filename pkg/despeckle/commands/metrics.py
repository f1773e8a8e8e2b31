"""despeckle metrics: ROI quality metrics of a single image."""

from typing import Optional

import click

from despeckle.handlers import reports_errors
from despeckle_core.imageio import read_pgm
from despeckle_core.metrics import evaluate, load_rois
from despeckle_core.speckle import log_compress


@click.command("metrics")
@click.option("-i", "--image", required=True, type=click.Path(exists=True, path_type=str), help="PGM image.")
@click.option(
    "-r",
    "--rois",
    default=None,
    type=click.Path(exists=True, path_type=str),
    help="ROI file (kind x y w h); default: the phantom ROIs.",
)
@click.option("--log", "log_domain", is_flag=True, default=False, help="Score the log-compressed image.")
@reports_errors
def metrics_cmd(image: str, rois: Optional[str], log_domain: bool) -> None:
    """Print SNR, CNR and ENL for every feature ROI and their means."""
    img = read_pgm(image)
    if log_domain:
        img, _ = log_compress(img)
    report = evaluate(img, load_rois(rois))

    click.echo(f"{'roi':>4} {'SNR dB':>9} {'CNR':>8} {'ENL':>10}")
    for row in report.rows:
        click.echo(f"{row.roi_id:>4} {row.snr_db:>9.3f} {row.cnr:>8.3f} {row.enl:>10.3f}")
    click.echo(f"{'mean':>4} {report.mean_snr_db:>9.3f} {report.mean_cnr:>8.3f} {report.mean_enl:>10.3f}")
    for warning in report.warnings:
        click.echo(f"warning: {warning}", err=True)
