"""Contains helper function used all over the package."""

import datetime
import os

import humanize
import numpy as np

from .errors import DimensionMismatchError, DomainError

PACKAGE_PATH = os.path.split(os.path.abspath(__file__))[0]

# Values below this are treated as an exact fit everywhere in the package.
EXACT_FIT = 1e-12


def getVersion():
    """READ Version from file."""
    if not os.path.isfile(os.path.join(PACKAGE_PATH, "VERSION")):
        return "unknown"
    with open(os.path.join(PACKAGE_PATH, "VERSION"), encoding="utf-8") as f:
        return f.read().strip()


def as_points(x, n: int):
    """Return x as an (M, n) float array and whether a single point was given."""
    points = np.asarray(x, dtype=np.float64)
    single = points.ndim == 1
    if single:
        points = points.reshape(1, -1)
    if points.ndim != 2 or points.shape[1] != n:
        raise DimensionMismatchError(
            f"expected points of dimension {n}, got array of shape {np.shape(x)}"
        )
    return points, single


def check_in_cube(points, low: float = -1.0, high: float = 1.0):
    """Raise DomainError if any coordinate lies outside [low, high]."""
    if points.size and (np.any(points < low) or np.any(points > high)):
        raise DomainError(f"coordinates must lie in [{low:g}, {high:g}]")
    if not np.all(np.isfinite(points)):
        raise DomainError("coordinates must be finite")


def format_float(value: float) -> str:
    """Print a float with 17 significant digits so it reads back bit-exactly."""
    return f"{value:.17g}"


def row_seed(seed: int, index: int) -> int:
    """Derive the seed of a study row from the base seed."""
    return seed + index


def elapsed(seconds: float) -> str:
    """Human readable elapsed time."""
    return humanize.precisedelta(
        datetime.timedelta(seconds=seconds), minimum_unit="milliseconds"
    )


def point_count(count: int) -> str:
    """Human readable number of points."""
    return humanize.intcomma(count)
