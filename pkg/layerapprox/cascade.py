"""Layer-wise residual training with multiplicative error bookkeeping.

Layer j is fitted to the residual left by layers 1..j-1, normalised to unit
grid sup norm by the measured error of the previous layer. With measured
errors e_0, e_1, ... the composite approximant is

    F_l = g_1 + e_0 g_2 + e_0 e_1 g_3 + ...

and on the training grid f - F_l = (e_0 e_1 ... e_{l-1}) r_{l+1}, where the
normalised residual r_{l+1} has sup norm 1. The grid error of F_l is
therefore exactly the product of the per-layer errors.
"""

from dataclasses import dataclass
from enum import Enum
import logging
from typing import List, Optional, Tuple

import numpy as np

from .core_math import Grid, evaluate_oracle, sup_norm
from .errors import (
    ConfigError,
    DegenerateResidualError,
    DimensionMismatchError,
    DomainError,
    InvalidOracleError,
)
from .helpers import EXACT_FIT, as_points
from .shallow import FitConfig, ShallowNet, fit_table

logger = logging.getLogger(__name__)


class FeatureMode(Enum):
    """What layers after the first see besides the base coordinates."""

    X_ONLY = "x_only"
    X_PLUS_PREV_APPROX = "x_plus_prev_approx"
    X_PLUS_PREV_LAYER = "x_plus_prev_layer"

    @classmethod
    def from_name(cls, name: str) -> "FeatureMode":
        """Look up a mode by name, case-insensitively."""
        try:
            return cls(name.lower())
        except ValueError:
            known = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown feature mode '{name}', known: {known}") from None

    def input_dim(self, n: int, prev_width: int, layer_index: int) -> int:
        """Input dimension of the layer with 0-based index layer_index."""
        if layer_index == 0 or self is FeatureMode.X_ONLY:
            return n
        if self is FeatureMode.X_PLUS_PREV_APPROX:
            return n + 1
        return n + prev_width


def _layer_features(mode, layer_index, base, approx, prev_hidden):
    if layer_index == 0 or mode is FeatureMode.X_ONLY:
        return base
    if mode is FeatureMode.X_PLUS_PREV_APPROX:
        return np.hstack([base, approx[:, None]])
    return np.hstack([base, prev_hidden])


class _Stepper:
    """Runs layers in order over a table, tracking the running approximant.

    Training and evaluation both go through this class so that they perform
    exactly the same floating point operations. Bases are one table shared by
    all layers or a list with one table per layer.
    """

    def __init__(self, bases, mode: FeatureMode):
        self.bases = bases
        self.mode = mode
        self.index = 0
        self.weight = 1.0
        self.approx: Optional[np.ndarray] = None
        self.hidden: Optional[np.ndarray] = None

    def features(self) -> np.ndarray:
        """Feature table of the next layer."""
        base = self.bases[self.index] if isinstance(self.bases, list) else self.bases
        return _layer_features(self.mode, self.index, base, self.approx, self.hidden)

    def output(self, net: ShallowNet):
        """Hidden outputs and network output of net on the next features."""
        hidden = net.hidden(self.features())
        return hidden, hidden @ net.outer_coeffs

    def advance(self, hidden, out, error: float):
        """Fold a layer output into the running approximant."""
        self.approx = out if self.approx is None else self.approx + self.weight * out
        self.weight *= error
        self.hidden = hidden
        self.index += 1


@dataclass(frozen=True)
class ErrorTrace:
    """Measured per-layer errors and their running products.

    ``per_layer[0]`` is the initial error e_0 of the first layer against f;
    ``per_layer[j]`` for j >= 1 is the error of layer j+1 against its
    normalised residual.
    """

    per_layer: Tuple[float, ...]
    cumulative: Tuple[float, ...]

    @classmethod
    def from_errors(cls, errors) -> "ErrorTrace":
        """Build the trace by sequential multiplication."""
        cumulative = []
        running = None
        for e in errors:
            running = e if running is None else running * e
            cumulative.append(running)
        return cls(tuple(errors), tuple(cumulative))

    @property
    def initial_error(self) -> float:
        """Error of the first layer against the target."""
        return self.per_layer[0]

    @property
    def final_error(self) -> float:
        """Grid error of the full composite approximant."""
        return self.cumulative[-1]


@dataclass(frozen=True, eq=False)
class CascadeModel:
    """A trained residual stack over n base coordinates."""

    n: int
    mode: FeatureMode
    layers: Tuple[ShallowNet, ...]
    errors: Tuple[float, ...]

    def __post_init__(self):
        """Validate layer wiring."""
        if not self.layers or len(self.errors) != len(self.layers):
            raise ConfigError("a cascade needs one measured error per layer")
        prev_width = 0
        for j, net in enumerate(self.layers):
            expected = self.mode.input_dim(self.n, prev_width, j)
            if net.n != expected:
                raise DimensionMismatchError(
                    f"layer {j + 1} takes {net.n} inputs, mode {self.mode.value} gives {expected}"
                )
            prev_width = net.units

    @property
    def depth(self) -> int:
        """Number of layers."""
        return len(self.layers)

    @property
    def scales(self) -> Tuple[float, ...]:
        """Normalised errors e_0..e_{l-2} that weight layers 2..l."""
        return self.errors[:-1]

    @property
    def widths(self) -> Tuple[int, ...]:
        """Units per layer."""
        return tuple(net.units for net in self.layers)

    @property
    def parameter_count(self) -> int:
        """Trainable parameters over all layers."""
        return sum(net.parameter_count for net in self.layers)

    def trace(self) -> ErrorTrace:
        """Error trace of the model."""
        return ErrorTrace.from_errors(self.errors)

    def prefix(self, depth: int) -> "CascadeModel":
        """The model made of the first depth layers."""
        if not 1 <= depth <= self.depth:
            raise ConfigError(f"prefix depth must lie in [1, {self.depth}], got {depth}")
        return CascadeModel(self.n, self.mode, self.layers[:depth], self.errors[:depth])

    def eval(self, x):
        """Evaluate the composite approximant on a point or an (M, n) array."""
        points, single = as_points(x, self.n)
        approx = self.eval_bases(points)
        return float(approx[0]) if single else approx

    def eval_bases(self, bases) -> np.ndarray:
        """Evaluate on precomputed base tables, one shared table or one per layer."""
        stepper = _Stepper(bases, self.mode)
        for net, error in zip(self.layers, self.errors):
            hidden, out = stepper.output(net)
            stepper.advance(hidden, out, error)
        return stepper.approx

    __call__ = eval


class ResidualTrainer:
    """Trains a cascade one layer at a time on explicit tables.

    ``bases`` is one (M, n) table read by every layer, or a list of tables
    with one entry per layer that may be trained. ``residuals[j]`` is the
    normalised residual the layer with 0-based index j was fitted to;
    ``residuals[0]`` is the target table itself.
    """

    def __init__(
        self,
        bases,
        targets,
        width: int,
        mode: FeatureMode,
        cfg: FitConfig,
    ):
        self.logger = logging.getLogger(__name__)
        if isinstance(bases, (list, tuple)):
            self.bases = [np.asarray(b, dtype=np.float64) for b in bases]
            tables = self.bases
        else:
            self.bases = np.asarray(bases, dtype=np.float64)
            tables = [self.bases]
        targets = np.asarray(targets, dtype=np.float64).reshape(-1)
        for table in tables:
            if table.ndim != 2 or table.shape != (targets.shape[0], tables[0].shape[1]):
                raise DimensionMismatchError(
                    "bases must be (M, n) tables with M matching the targets"
                )
        if width < 1:
            raise ConfigError(f"layer width must be at least 1, got {width}")
        if sup_norm(targets) > 1.0 + EXACT_FIT:
            raise DomainError(
                f"target sup norm {sup_norm(targets):.6g} exceeds 1; rescale the target first"
            )
        self.width = width
        self.mode = mode
        self.cfg = cfg
        self.layers: List[ShallowNet] = []
        self.errors: List[float] = []
        self.residuals: List[np.ndarray] = [targets]
        self.stepper = _Stepper(self.bases, mode)
        self.done = False

    @property
    def n(self) -> int:
        """Base dimension."""
        tables = self.bases if isinstance(self.bases, list) else [self.bases]
        return tables[0].shape[1]

    @property
    def max_depth(self) -> Optional[int]:
        """Number of layers the per-layer bases allow, None when unlimited."""
        return len(self.bases) if isinstance(self.bases, list) else None

    def add_layer(self) -> float:
        """Fit the next layer to the current residual; returns its measured error."""
        if self.done:
            raise DegenerateResidualError("the previous layer fitted exactly; nothing left to fit")
        j = len(self.layers)
        residual = self.residuals[-1]
        features = self.stepper.features()
        scale = sup_norm(residual)
        net, err = fit_table(
            features, residual, self.width, self.cfg.with_seed(self.cfg.rng_seed + j)
        )
        if err >= scale:
            if scale > 0:
                self.logger.warning(
                    "Layer %d did not beat the zero network (%.6g >= %.6g), using zero",
                    j + 1,
                    err,
                    scale,
                )
            net = ShallowNet.zeros(features.shape[1], self.width, self.cfg.get_activation())
        hidden, out = self.stepper.output(net)
        err = sup_norm(residual - out)
        self.layers.append(net)
        self.errors.append(err)
        self.stepper.advance(hidden, out, err)
        self.logger.info("Layer %d: error %.6g, cumulative %.6g", j + 1, err, self.stepper.weight)
        if err < EXACT_FIT:
            self.done = True
            self.logger.info("Layer %d fitted exactly, stopping", j + 1)
            return err
        nxt = (residual - out) / err
        if not np.all(np.isfinite(nxt)):
            raise InvalidOracleError(f"residual after layer {j + 1} is not finite")
        self.residuals.append(nxt)
        return err

    def train(self, depth: int) -> CascadeModel:
        """Add layers until depth is reached or a layer fits exactly."""
        if depth < 1:
            raise ConfigError(f"a cascade needs at least one layer, got {depth}")
        if self.max_depth is not None and depth > self.max_depth:
            raise ConfigError(
                f"bases were given for {self.max_depth} layers, {depth} requested"
            )
        while len(self.layers) < depth and not self.done:
            self.add_layer()
        return self.model()

    def model(self) -> CascadeModel:
        """The model built so far."""
        return CascadeModel(self.n, self.mode, tuple(self.layers), tuple(self.errors))


def train_cascade(
    f,
    grid: Grid,
    layers: int,
    width: int,
    mode: FeatureMode,
    cfg: FitConfig,
):
    """Train a residual cascade of up to `layers` layers of `width` units on the grid.

    Requires the grid sup norm of f to be at most 1. Returns the model and
    its ErrorTrace.
    """
    values = evaluate_oracle(f, grid.lattice)
    trainer = ResidualTrainer(grid.lattice, values, width, mode, cfg)
    model = trainer.train(layers)
    logger.info(
        "Trained %d layer cascade (%s): grid error %.6g",
        model.depth,
        mode.value,
        model.trace().final_error,
    )
    return model, model.trace()


def eval_cascade(model: CascadeModel, x):
    """Evaluate a cascade on a point or an array of points."""
    return model.eval(x)


def residual_oracle(model: CascadeModel, f, j: int):
    """Normalised residual after the first j layers, as an oracle.

    r_{j+1} = (r_j - g_j) / e_{j-1} with r_1 = f, recomputed from scratch on
    whatever points the oracle is called with.
    """
    if not 1 <= j <= model.depth:
        raise ConfigError(f"residual index must lie in [1, {model.depth}], got {j}")
    for i in range(j):
        if model.errors[i] < EXACT_FIT:
            raise DegenerateResidualError(
                f"layer {i + 1} fits exactly (error {model.errors[i]:.3g}); "
                "its residual cannot be normalised"
            )

    def oracle(points):
        points, _ = as_points(points, model.n)
        residual = evaluate_oracle(f, points)
        stepper = _Stepper(points, model.mode)
        for net, error in zip(model.layers[:j], model.errors[:j]):
            hidden, out = stepper.output(net)
            residual = (residual - out) / error
            stepper.advance(hidden, out, error)
        return residual

    return oracle
