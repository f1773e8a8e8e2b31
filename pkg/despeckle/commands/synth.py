"""despeckle synth: write a synthetic speckled stack with its ground truth."""

import csv
import math
from pathlib import Path
from typing import Optional, Tuple

import click

from despeckle.handlers import reports_errors
from despeckle_core.imageio import read_pgm, write_pgm, write_stack_dir
from despeckle_core.speckle import SpeckleConfig, generate_speckle_stack, make_phantom


def parse_jitter(ctx: click.Context, param: click.Parameter, value: str) -> Tuple[float, float, float]:
    """``"dx,dy,theta"``: max |dx|, |dy| in pixels and |theta| in degrees."""
    try:
        parts = tuple(float(v) for v in value.split(","))
    except ValueError:
        parts = ()
    if len(parts) != 3 or any(p < 0 or math.isnan(p) for p in parts):
        raise click.BadParameter("expected three non-negative numbers 'px,px,deg'")
    return parts


@click.command("synth")
@click.option(
    "--clean",
    default=None,
    type=click.Path(exists=True, path_type=str),
    help="Clean PGM image (default: the built-in phantom).",
)
@click.option("--looks", default=4.0, show_default=True, type=click.FloatRange(min=0, min_open=True))
@click.option("--frames", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--jitter", default="0,0,0", show_default=True, callback=parse_jitter, help="px,px,deg bounds.")
@click.option("--seed", default=0, show_default=True, type=click.IntRange(min=0, max=2**64 - 1))
@click.option("-o", "--out", "out_dir", required=True, type=click.Path(path_type=str), help="Output directory.")
@reports_errors
def synth_cmd(
    clean: Optional[str],
    looks: float,
    frames: int,
    jitter: Tuple[float, float, float],
    seed: int,
    out_dir: str,
) -> None:
    """Speckle a clean image N times with rigid jitter.

    Frames go to OUT/frames (acquisition order = filename order); clean.pgm and the ground-truth
    transforms.csv go to OUT.
    """
    image = read_pgm(clean) if clean else make_phantom()
    config = SpeckleConfig(
        looks=looks, n_frames=frames, jitter_dx=jitter[0], jitter_dy=jitter[1], jitter_theta=jitter[2], seed=seed
    )
    stack, transforms = generate_speckle_stack(image, config)

    out = Path(out_dir)
    paths = write_stack_dir(stack, out / "frames")
    write_pgm(image, out / "clean.pgm")
    with (out / "transforms.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "dx", "dy", "theta_deg"])
        for i, t in enumerate(transforms):
            writer.writerow([i, repr(t.dx), repr(t.dy), repr(t.theta_deg)])
    click.echo(f"Wrote {len(paths)} frames to: {out.absolute()}")
