from pathlib import Path
from typing import List, Union

import numpy as np
from loguru import logger
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from despeckle_core.exceptions import InvalidInputError
from despeckle_core.schemas import Image, ImageStack

PathLike = Union[str, Path]

PGM_SUFFIXES = (".pgm",)
_MAX_8BIT = 255.0
_MAX_16BIT = 65535.0


def read_pgm(path: PathLike) -> Image:
    """
    Read an 8- or 16-bit binary PGM normalized to [0, 1].

    Raises:
        InvalidInputError: when the file is missing, unreadable or not grayscale.
    """
    p = Path(path)
    if not p.is_file():
        raise InvalidInputError(message=f"Image not found: {p}")
    try:
        with PILImage.open(p) as im:
            mode = im.mode
            values = np.asarray(im, dtype=np.float64)
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise InvalidInputError(message=f"Cannot read {p}: {e}") from e

    # the PGM decoder rescales other maxvals onto the full 8/16-bit range
    if mode == "L":
        return Image.from_array(values / _MAX_8BIT)
    if mode in ("I", "I;16", "I;16B"):
        return Image.from_array(values / _MAX_16BIT)
    raise InvalidInputError(message=f"{p} is not a grayscale PGM (mode {mode})")


def write_pgm(img: Image, path: PathLike) -> Path:
    """Write ``img`` as a 16-bit binary PGM, creating parent directories."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    data = np.rint(img.pixels * _MAX_16BIT).astype(np.uint16)
    PILImage.fromarray(data).save(p, format="PPM")
    return p


def list_frames(directory: PathLike) -> List[Path]:
    """PGM files of ``directory`` sorted by filename, i.e. in acquisition order."""
    d = Path(directory)
    if not d.is_dir():
        raise InvalidInputError(message=f"Input directory not found: {d}")
    return sorted(f for f in d.iterdir() if f.suffix.lower() in PGM_SUFFIXES)


def read_stack_dir(directory: PathLike) -> ImageStack:
    """
    Load every PGM of ``directory`` into an ImageStack.

    Raises:
        InvalidInputError: for a missing/empty directory or frames of differing dimensions.
    """
    files = list_frames(directory)
    if not files:
        raise InvalidInputError(message=f"No PGM frames in {directory}")
    logger.info(f"reading {len(files)} frames from {directory}")
    return ImageStack.from_images([read_pgm(f) for f in files])


def write_stack_dir(stack: ImageStack, directory: PathLike, prefix: str = "frame") -> List[Path]:
    width = max(3, len(str(len(stack) - 1)))
    return [write_pgm(img, Path(directory) / f"{prefix}_{i:0{width}d}.pgm") for i, img in enumerate(stack.images())]
