"""Fully connected layer networks: certified invertible feature chains with residual heads.

A layer network of depth l pushes its input through a chain of maps
G_j(y) = sigma(A_j y + b_j), each injective with a certified left inverse,
and fits approximation layer j on the features (G_j o ... o G_1)(x) with the
residual algorithm of the cascade module. When the layer width is below the
input dimension, the first n - N_l + 1 coordinates are first collapsed onto
one coordinate along a Hilbert curve of level k.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from .cascade import CascadeModel, ErrorTrace, FeatureMode, ResidualTrainer
from .core_math import (
    Grid,
    TargetFunction,
    estimate_lipschitz,
    evaluate_oracle,
    make_grid,
    sup_norm_diff,
)
from .errors import (
    BoundViolationError,
    CertificationError,
    ConfigError,
    DimensionMismatchError,
)
from .helpers import as_points
from .hilbert import lift_coords, project_coords
from .shallow import Activation, FitConfig

logger = logging.getLogger(__name__)

DEFAULT_TAU = 1e-2
DEFAULT_TOL = 1e-8
PREACTIVATION_BAND = 4.0
MAX_ATTEMPTS = 32
CERTIFICATION_POINTS = 4096
BOUND_SLACK = 1e-6


@dataclass(frozen=True)
class Certificate:
    """Outcome of an invertibility check of a layer map."""

    min_singular_value: float
    reconstruction_error: float
    tol: float

    @property
    def passed(self) -> bool:
        """Whether the reconstruction error is within tolerance."""
        return self.reconstruction_error <= self.tol


@dataclass(frozen=True, eq=False)
class LayerMap:
    """An injective map y -> sigma(A y + b) from R^in_dim to R^out_dim."""

    matrix: np.ndarray
    bias: np.ndarray
    activation: Activation
    certificate: Optional[Certificate] = None
    pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        """Validate shapes and activation."""
        matrix = np.asarray(self.matrix, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if matrix.ndim != 2 or bias.shape != (matrix.shape[0],):
            raise DimensionMismatchError("layer map needs an (out, in) matrix and out biases")
        if matrix.shape[0] < matrix.shape[1]:
            raise DimensionMismatchError(
                f"layer map cannot be injective from {matrix.shape[1]} to {matrix.shape[0]} dims"
            )
        if not self.activation.is_invertible:
            raise ConfigError(
                f"activation {self.activation.name} is not allowed in an invertible layer"
            )
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "pinv", np.linalg.pinv(matrix))

    @classmethod
    def from_matrix(
        cls,
        matrix,
        bias,
        activation: Optional[Activation] = None,
        tau: float = DEFAULT_TAU,
        tol: float = DEFAULT_TOL,
        grid: Optional[Grid] = None,
    ) -> "LayerMap":
        """Build a layer map and certify it; rank deficiency below tau is an error.

        The certificate is computed on ``grid`` (default: the certification
        lattice over I^in_dim). A failed reconstruction check is recorded in
        the certificate, not raised.
        """
        if not tau > 0:
            raise ConfigError(f"tau must be positive, got {tau}")
        layer = cls(matrix, bias, activation or Activation())
        sigma_min = layer.min_singular_value()
        if sigma_min < tau:
            raise CertificationError(
                f"smallest singular value {sigma_min:.3g} is below tau = {tau:g}"
            )
        grid = grid or certification_grid(layer.in_dim)
        certificate = verify_invertibility(layer, grid, tol)
        return cls(layer.matrix, layer.bias, layer.activation, certificate)

    @property
    def in_dim(self) -> int:
        """Input dimension."""
        return self.matrix.shape[1]

    @property
    def out_dim(self) -> int:
        """Output dimension."""
        return self.matrix.shape[0]

    def min_singular_value(self) -> float:
        """Smallest singular value of the matrix."""
        return float(np.linalg.svd(self.matrix, compute_uv=False).min())

    def apply(self, y) -> np.ndarray:
        """Apply the map to an (M, in_dim) array."""
        return self.activation.value(y @ self.matrix.T + self.bias)

    def invert(self, v) -> np.ndarray:
        """Left inverse on the image: inverse activation, then the pseudo-inverse."""
        return (self.activation.inverse(v) - self.bias) @ self.pinv.T


def certification_grid(in_dim: int) -> Grid:
    """Tensor lattice over I^in_dim with about CERTIFICATION_POINTS points."""
    p = max(2, int(math.floor(CERTIFICATION_POINTS ** (1.0 / in_dim) + 1e-9)))
    return make_grid(in_dim, p)


def verify_invertibility(layer: LayerMap, grid: Grid, tol: float) -> Certificate:
    """Recompute the reconstruction error max |G^-(G(y)) - y|_2 over the grid.

    Outputs that reach the saturation boundary of the activation make the
    inverse undefined; the certificate then fails with an infinite error.
    """
    if grid.n != layer.in_dim:
        raise DimensionMismatchError(
            f"certification grid is {grid.n}D, layer takes {layer.in_dim} inputs"
        )
    sigma_min = layer.min_singular_value()
    outputs = layer.apply(grid.lattice)
    low, high = layer.activation.range()
    if np.any(outputs <= low) or np.any(outputs >= high):
        logger.warning("Layer output saturates the activation; inverse undefined")
        return Certificate(sigma_min, math.inf, tol)
    recovered = layer.invert(outputs)
    error = float(np.max(np.linalg.norm(recovered - grid.lattice, axis=1)))
    return Certificate(sigma_min, error, tol)


def make_invertible_layer(
    in_dim: int,
    out_dim: int,
    rng_seed,
    tau: float = DEFAULT_TAU,
    activation: Optional[Activation] = None,
    tol: float = DEFAULT_TOL,
    band: float = PREACTIVATION_BAND,
    max_attempts: int = MAX_ATTEMPTS,
) -> LayerMap:
    """Sample a random layer map that passes certification.

    Rows of the Gaussian matrix and bias are shrunk so that
    |a_i|_1 + |b_i| <= band, which keeps every pre-activation over I^in_dim
    inside [-band, band].
    """
    if not tau > 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    if not out_dim >= in_dim >= 1:
        raise ConfigError(f"need out_dim >= in_dim >= 1, got {in_dim} -> {out_dim}")
    activation = activation or Activation()
    if not activation.is_invertible:
        raise ConfigError(f"activation {activation.name} is not allowed in an invertible layer")
    rng = np.random.default_rng(rng_seed)
    grid = certification_grid(in_dim)
    for attempt in range(1, max_attempts + 1):
        matrix = rng.standard_normal((out_dim, in_dim))
        bias = rng.standard_normal(out_dim)
        reach = np.abs(matrix).sum(axis=1) + np.abs(bias)
        shrink = np.minimum(1.0, band / reach)
        matrix *= shrink[:, None]
        bias *= shrink
        try:
            layer = LayerMap.from_matrix(matrix, bias, activation, tau, tol, grid)
        except CertificationError as err:
            logger.debug("Attempt %d rejected: %s", attempt, err)
            continue
        if layer.certificate.passed:
            logger.debug(
                "Layer %d -> %d certified after %d attempts, sigma_min %.3g",
                in_dim,
                out_dim,
                attempt,
                layer.certificate.min_singular_value,
            )
            return layer
        logger.debug(
            "Attempt %d rejected: reconstruction error %.3g",
            attempt,
            layer.certificate.reconstruction_error,
        )
    raise CertificationError(
        f"no certified {in_dim} -> {out_dim} layer after {max_attempts} attempts "
        f"(tau = {tau:g}, tol = {tol:g})"
    )


@dataclass(frozen=True)
class Reduction:
    """Collapse of the first dims coordinates onto a level-k Hilbert coordinate.

    ``lipschitz_L`` is the constant the projection term was computed with.
    """

    dims: int
    level: int
    lipschitz_L: Optional[float] = None


@dataclass(frozen=True, eq=False)
class LayerNetModel:
    """A trained layer network; ``head`` holds the approximation layers."""

    n: int
    chain: Tuple[LayerMap, ...]
    head: CascadeModel
    reduction: Optional[Reduction] = None

    def __post_init__(self):
        """Validate that chain and head fit together."""
        if len(self.chain) != self.head.depth:
            raise ConfigError("a layer network needs one chain map per approximation layer")
        reduced_n = self.n if self.reduction is None else self.n - self.reduction.dims + 1
        if self.chain[0].in_dim != reduced_n:
            raise DimensionMismatchError(
                f"chain starts at {self.chain[0].in_dim} dims, input gives {reduced_n}"
            )

    @property
    def depth(self) -> int:
        """Number of layers."""
        return self.head.depth

    @property
    def widths(self) -> Tuple[int, ...]:
        """Chain width per layer."""
        return tuple(layer.out_dim for layer in self.chain)

    @property
    def errors(self) -> Tuple[float, ...]:
        """Measured per-layer errors."""
        return self.head.errors

    @property
    def scales(self) -> Tuple[float, ...]:
        """Normalised errors weighting layers 2..l."""
        return self.head.scales

    @property
    def certificates(self) -> Tuple[Certificate, ...]:
        """Certificates of the chain maps."""
        return tuple(layer.certificate for layer in self.chain)

    @property
    def parameter_count(self) -> int:
        """Trainable parameters of the approximation layers."""
        return self.head.parameter_count

    def trace(self) -> ErrorTrace:
        """Error trace of the approximation layers."""
        return self.head.trace()

    def features(self, x):
        """Chain features of every layer for an (M, n) array of inputs."""
        points, _ = as_points(x, self.n)
        if self.reduction is not None:
            points = project_coords(points, self.reduction.dims, self.reduction.level)
        return chain_features(self.chain, points)

    def eval(self, x):
        """Evaluate the network on a point or an (M, n) array."""
        points, single = as_points(x, self.n)
        approx = self.head.eval_bases(self.features(points))
        return float(approx[0]) if single else approx

    __call__ = eval


def chain_features(chain, points):
    """Outputs of every prefix of the chain, one table per layer."""
    tables = []
    current = points
    for layer in chain:
        current = layer.apply(current)
        tables.append(current)
    return tables


def eval_layernet(model: LayerNetModel, x):
    """Evaluate a layer network on a point or an array of points."""
    return model.eval(x)


def build_chain(
    n: int,
    width: int,
    layers: int,
    cfg: FitConfig,
    tau: float = DEFAULT_TAU,
    tol: float = DEFAULT_TOL,
    activation: Optional[Activation] = None,
):
    """Sample the certified chain n -> width -> ... -> width of the given depth."""
    chain = []
    for j in range(layers):
        try:
            chain.append(
                make_invertible_layer(
                    n if j == 0 else width,
                    width,
                    rng_seed=(cfg.rng_seed, j),
                    tau=tau,
                    activation=activation,
                    tol=tol,
                )
            )
        except CertificationError as err:
            raise CertificationError(f"layer {j + 1}: {err}", layer_index=j + 1) from err
    return chain


def _check_chain(chain, n: int, width: int, layers: int):
    shapes = [(layer.in_dim, layer.out_dim) for layer in chain]
    expected = [(n if j == 0 else width, width) for j in range(layers)]
    if shapes != expected:
        raise DimensionMismatchError(f"chain has shapes {shapes}, expected {expected}")
    for j, layer in enumerate(chain):
        if not layer.certificate.passed:
            raise CertificationError(
                f"layer {j + 1} carries a failed certificate", layer_index=j + 1
            )


def train_layernet_ge(
    f,
    grid: Grid,
    layers: int,
    width: int,
    cfg: FitConfig,
    tau: float = DEFAULT_TAU,
    tol: float = DEFAULT_TOL,
    mode: FeatureMode = FeatureMode.X_PLUS_PREV_APPROX,
    chain_activation: Optional[Activation] = None,
    chain: Optional[Sequence[LayerMap]] = None,
):
    """Train a layer network with width >= input dimension; returns (model, trace).

    A certified ``chain`` of matching shape may be passed in place of the
    sampled one.
    """
    if layers < 1:
        raise ConfigError(f"a layer network needs at least one layer, got {layers}")
    if width < grid.n:
        raise ConfigError(
            f"width {width} is below the input dimension {grid.n}; use train_layernet_lt"
        )
    if chain is None:
        chain = build_chain(grid.n, width, layers, cfg, tau, tol, chain_activation)
    else:
        _check_chain(chain, grid.n, width, layers)
    tables = chain_features(chain, grid.lattice)
    inputs = [grid.lattice] + tables[:-1]
    for j, (layer, table) in enumerate(zip(chain, inputs)):
        certificate = verify_invertibility(layer, Grid.from_points(table), tol)
        if not certificate.passed:
            raise CertificationError(
                f"layer {j + 1} fails reconstruction on its inputs "
                f"({certificate.reconstruction_error:.3g} > {tol:g})",
                layer_index=j + 1,
            )

    values = evaluate_oracle(f, grid.lattice)
    trainer = ResidualTrainer(tables, values, width, mode, cfg)
    head = trainer.train(layers)
    model = LayerNetModel(grid.n, tuple(chain[: head.depth]), head)
    logger.info(
        "Trained layer network %d -> %d x %d: grid error %.6g",
        grid.n,
        width,
        head.depth,
        head.trace().final_error,
    )
    return model, model.trace()


@dataclass(frozen=True)
class BoundReport:
    """Decomposition of the error of a width-deficient network.

    ``projection_term_paper`` is L sqrt(d) / 2^(k+1), measured in the unit
    cube coordinates of the Hilbert cells; ``projection_term_scaled`` is the
    same term for cells in I^n, twice as large, and is the one the measured
    error is checked against.
    """

    projection_term_paper: float
    projection_term_scaled: float
    reduced_error: float
    total_measured: float
    lipschitz_used: float
    lipschitz_source: str
    bound_holds: bool = True

    def as_record(self) -> dict:
        """The structured record of the report."""
        return {
            "projection_term_paper": self.projection_term_paper,
            "projection_term_scaled": self.projection_term_scaled,
            "reduced_error": self.reduced_error,
            "total_measured": self.total_measured,
            "lipschitz_used": self.lipschitz_used,
            "lipschitz_source": self.lipschitz_source,
        }


def projection_terms(lipschitz: float, dims: int, level: int):
    """Unit-cube and I^n versions of L sqrt(d) / 2^(k+1)."""
    unit = lipschitz * math.sqrt(dims) / 2.0 ** (level + 1)
    return unit, 2.0 * unit


def _lipschitz_for(f, grid: Grid):
    if isinstance(f, TargetFunction) and f.lipschitz_L is not None:
        return f.lipschitz_L, "analytic"
    estimate = estimate_lipschitz(f, grid)
    logger.warning(
        "No analytic Lipschitz constant, using the grid estimate %.6g (a lower bound)",
        estimate,
    )
    return estimate, "estimated"


def train_layernet_reduced(
    f,
    grid: Grid,
    layers: int,
    width: int,
    level: int,
    cfg: FitConfig,
    tau: float = DEFAULT_TAU,
    tol: float = DEFAULT_TOL,
    mode: FeatureMode = FeatureMode.X_PLUS_PREV_APPROX,
    chain_activation: Optional[Activation] = None,
):
    """Train on Hilbert-collapsed inputs with 1 <= width <= n.

    The first d = n - width + 1 coordinates collapse onto one Hilbert
    coordinate; the reduced target f(lift(z)) is learned by a layer network of
    full width over I^width on the image of the grid under the projection.
    Returns (model, trace, bound_report).
    """
    n = grid.n
    if not 1 <= width <= n:
        raise ConfigError(f"reduced width must lie in [1, {n}], got {width}")
    dims = n - width + 1
    lipschitz, source = _lipschitz_for(f, grid)

    reduced_grid = Grid.from_points(np.unique(project_coords(grid.lattice, dims, level), axis=0))
    logger.info(
        "Collapsing %d of %d coordinates at level %d: %d reduced points",
        dims,
        n,
        level,
        reduced_grid.size,
    )

    def reduced_target(z):
        return evaluate_oracle(f, lift_coords(z, dims, level, n))

    inner, trace = train_layernet_ge(
        reduced_target, reduced_grid, layers, width, cfg, tau, tol, mode, chain_activation
    )
    model = LayerNetModel(n, inner.chain, inner.head, Reduction(dims, level, float(lipschitz)))
    total = sup_norm_diff(f, model, grid)
    unit, scaled = projection_terms(lipschitz, dims, level)
    holds = total <= scaled + trace.final_error + BOUND_SLACK
    report = BoundReport(
        projection_term_paper=unit,
        projection_term_scaled=scaled,
        reduced_error=trace.final_error,
        total_measured=total,
        lipschitz_used=lipschitz,
        lipschitz_source=source,
        bound_holds=holds,
    )
    if not holds:
        message = (
            f"measured error {total:.6g} exceeds projection term {scaled:.6g} "
            f"plus reduced error {trace.final_error:.6g}"
        )
        if source == "analytic":
            raise BoundViolationError(message)
        logger.warning("%s; the Lipschitz constant was estimated", message)
    return model, trace, report


def train_layernet_lt(
    f,
    grid: Grid,
    layers: int,
    width: int,
    level: int,
    cfg: FitConfig,
    tau: float = DEFAULT_TAU,
    tol: float = DEFAULT_TOL,
    mode: FeatureMode = FeatureMode.X_PLUS_PREV_APPROX,
    chain_activation: Optional[Activation] = None,
):
    """Train a layer network with width below the input dimension.

    Returns (model, trace, bound_report).
    """
    if not 1 <= width < grid.n:
        raise ConfigError(
            f"width must lie in [1, {grid.n - 1}] for a {grid.n}D input, got {width}"
        )
    return train_layernet_reduced(
        f, grid, layers, width, level, cfg, tau, tol, mode, chain_activation
    )
