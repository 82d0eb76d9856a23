"""Domain geometry, grid sup norms, Lipschitz estimates and the test-function corpus.

The approximation domain is the cube I^n = [-1, 1]^n. The sup norm of a
function is estimated as the maximum over a finite lattice; this is a lower
bound on the true maximum over I^n. All oracles are vectorised: they map an
(M, n) array of points to an (M,) array of values.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatchError,
    InvalidOracleError,
    ResourceExhaustedError,
)
from .helpers import point_count

logger = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], np.ndarray]

DEFAULT_MAX_POINTS = 4_000_000
DEFAULT_POINTS_PER_DIM = {1: 1025, 2: 129, 3: 33}


@dataclass(frozen=True, eq=False)
class Grid:
    """A set of measurement points in I^n.

    Tensor grids hold the p^n points of the lattice
    ``linspace(-1, 1, p)`` along every axis, enumerated lexicographically
    with the first axis varying slowest (``numpy.meshgrid(..., indexing="ij")``).
    The first point in this order wins argmax ties. Scattered grids (built
    with ``Grid.from_points``) carry an arbitrary point set and have
    ``points_per_dim`` set to None.
    """

    n: int
    points_per_dim: Optional[int]
    lattice: np.ndarray = field(repr=False)

    @classmethod
    def from_points(cls, points) -> "Grid":
        """Wrap an explicit (M, n) point set as a scattered grid."""
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] == 0:
            raise DimensionMismatchError("a grid needs a non-empty (M, n) point array")
        return cls(n=points.shape[1], points_per_dim=None, lattice=points)

    @property
    def size(self) -> int:
        """Number of points."""
        return self.lattice.shape[0]

    @property
    def is_tensor(self) -> bool:
        """Whether this is a full tensor-product lattice."""
        return self.points_per_dim is not None

    def axis(self) -> np.ndarray:
        """Coordinates along one axis of a tensor grid."""
        if not self.is_tensor:
            raise ConfigError("scattered grids have no axis")
        return np.linspace(-1.0, 1.0, self.points_per_dim)


@dataclass(frozen=True, eq=False)
class TargetFunction:
    """A named function on I^n with analytic metadata.

    ``smoothness_m`` is the declared Sobolev order; membership in the Sobolev
    ball is asserted analytically per corpus entry, never computed.
    """

    name: str
    n: int
    oracle: Oracle = field(repr=False)
    smoothness_m: int
    lipschitz_L: Optional[float] = None
    sobolev_scaled: bool = False
    description: str = ""

    def __call__(self, points) -> np.ndarray:
        """Evaluate the oracle on an (M, n) array of points."""
        return self.oracle(points)


def default_points_per_dim(n: int) -> int:
    """Measurement density used when no grid size is configured."""
    return DEFAULT_POINTS_PER_DIM.get(n, 9)


def make_grid(n: int, p: int, max_points: int = DEFAULT_MAX_POINTS) -> Grid:
    """Build the tensor lattice of p points per axis over I^n, endpoints included."""
    if n < 1 or p < 2:
        raise ConfigError(f"grid needs n >= 1 and p >= 2, got n={n}, p={p}")
    total = p**n
    if total > max_points:
        raise ResourceExhaustedError(
            f"grid of {point_count(total)} points exceeds the budget of "
            f"{point_count(max_points)}; lower grid_points or evaluate in streaming chunks"
        )
    axis = np.linspace(-1.0, 1.0, p)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    lattice = np.stack([m.reshape(-1) for m in mesh], axis=1)
    logger.debug("Built %dD grid with %s points", n, point_count(total))
    return Grid(n=n, points_per_dim=p, lattice=lattice)


def evaluate_oracle(oracle, points: np.ndarray) -> np.ndarray:
    """Evaluate an oracle on points, insisting on finite values of the right shape."""
    values = np.asarray(oracle(points), dtype=np.float64)
    if values.shape != (points.shape[0],):
        raise InvalidOracleError(
            f"oracle returned shape {values.shape}, expected ({points.shape[0]},)"
        )
    if not np.all(np.isfinite(values)):
        bad = int(np.argmin(np.isfinite(values)))
        raise InvalidOracleError(f"oracle is not finite at {points[bad].tolist()}")
    return values


def sup_norm(values: np.ndarray) -> float:
    """Maximum absolute value of a table."""
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values)))


def sup_norm_diff(f, g, grid: Grid) -> float:
    """Estimate ||f - g|| as the maximum of |f - g| over the grid.

    This is a lower bound on the true sup norm over I^n.
    """
    diff = evaluate_oracle(f, grid.lattice) - evaluate_oracle(g, grid.lattice)
    return sup_norm(diff)


def estimate_lipschitz(f, grid: Grid) -> float:
    """Largest difference quotient over axis-adjacent lattice pairs.

    A lower bound on the Lipschitz constant; callers prefer an analytic
    ``lipschitz_L`` when the target carries one.
    """
    if not grid.is_tensor or grid.points_per_dim < 3:
        raise ConfigError("Lipschitz estimation needs a tensor grid with p >= 3")
    p = grid.points_per_dim
    values = evaluate_oracle(f, grid.lattice).reshape((p,) * grid.n)
    spacing = np.diff(grid.axis())
    best = 0.0
    for axis in range(grid.n):
        shape = [1] * grid.n
        shape[axis] = p - 1
        quotients = np.abs(np.diff(values, axis=axis)) / spacing.reshape(shape)
        best = max(best, float(quotients.max()))
    return best


# ---------------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------------

# Scale factors put the W^{1,inf} norm (sup norm plus sup norms of the first
# partial derivatives) of the bump functions at exactly 1.
_BUMP_SCALE = 1.0 / (1.0 + 2.0 * math.sqrt(2.0) * math.exp(-0.5))
_RADIAL_SCALE = 1.0 / (1.0 + 3.0 * math.sqrt(2.0) * math.exp(-0.5))


def _tanh2x(x):
    return np.tanh(2.0 * x[:, 0])


def _bump1d(x):
    return _BUMP_SCALE * np.exp(-4.0 * x[:, 0] ** 2)


def _cos2d(x):
    return 0.5 * np.cos(np.pi * (x[:, 0] + x[:, 1]) / 2.0)


def _radial3d(x):
    return _RADIAL_SCALE * np.exp(-np.sum(x**2, axis=1))


def _planted_tanh(x):
    return 0.8 * np.tanh(1.5 * x[:, 0] + 0.2)


def _plane2d(x):
    return (3.0 * x[:, 0] + 4.0 * x[:, 1]) / 7.0


def _zero(x):
    return np.zeros(x.shape[0])


def _const2d(x):
    return np.full(x.shape[0], 0.3)


CORPUS = {
    f.name: f
    for f in (
        TargetFunction(
            "tanh2x", 1, _tanh2x, 2, lipschitz_L=2.0, description="tanh(2x)"
        ),
        TargetFunction(
            "bump1d",
            1,
            _bump1d,
            1,
            lipschitz_L=_BUMP_SCALE * 2.0 * math.sqrt(2.0) * math.exp(-0.5),
            sobolev_scaled=True,
            description="exp(-4x^2), rescaled into the Sobolev ball",
        ),
        TargetFunction(
            "cos2d",
            2,
            _cos2d,
            2,
            lipschitz_L=math.pi * math.sqrt(2.0) / 4.0,
            description="0.5 cos(pi (x + y) / 2)",
        ),
        TargetFunction(
            "radial3d",
            3,
            _radial3d,
            1,
            lipschitz_L=_RADIAL_SCALE * math.sqrt(2.0) * math.exp(-0.5),
            sobolev_scaled=True,
            description="exp(-|x|^2), rescaled into the Sobolev ball",
        ),
        TargetFunction(
            "planted_tanh",
            1,
            _planted_tanh,
            2,
            lipschitz_L=1.2,
            description="0.8 tanh(1.5x + 0.2), a member of S_{1,1}",
        ),
        TargetFunction(
            "plane2d",
            2,
            _plane2d,
            2,
            lipschitz_L=5.0 / 7.0,
            description="(3x + 4y) / 7",
        ),
        TargetFunction(
            "zero1d", 1, _zero, 2, lipschitz_L=0.0, sobolev_scaled=True, description="0"
        ),
        TargetFunction(
            "zero2d", 2, _zero, 2, lipschitz_L=0.0, sobolev_scaled=True, description="0"
        ),
        TargetFunction(
            "const2d",
            2,
            _const2d,
            2,
            lipschitz_L=0.0,
            sobolev_scaled=True,
            description="0.3",
        ),
    )
}

# The four smooth entries every identity check is quantified over.
CORE_CORPUS = ("tanh2x", "bump1d", "cos2d", "radial3d")


def get_function(name: str) -> TargetFunction:
    """Look up a corpus function by name."""
    try:
        return CORPUS[name]
    except KeyError:
        known = ", ".join(sorted(CORPUS))
        raise ConfigError(f"unknown function '{name}', known: {known}") from None
