"""Shallow networks x -> sum_k a_k sigma(<w_k, x> + b_k) and their trainer."""

from dataclasses import dataclass, field, replace
from enum import Enum
import logging
from typing import Optional

import numpy as np

from .core_math import Grid, evaluate_oracle, make_grid, sup_norm
from .errors import (
    ConfigError,
    DimensionMismatchError,
    DomainError,
    InvalidOracleError,
    TrainingDivergedError,
)
from .helpers import as_points

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class ActivationKind(Enum):
    """Smooth, non-polynomial activations."""

    LOGISTIC = "logistic"
    TANH = "tanh"
    SOFTPLUS = "softplus"


@dataclass(frozen=True)
class Activation:
    """An activation function with its derivative and, where it exists, its inverse."""

    kind: ActivationKind = ActivationKind.TANH

    @classmethod
    def from_name(cls, name: str) -> "Activation":
        """Look up an activation by its name."""
        try:
            return cls(ActivationKind(name))
        except ValueError:
            known = ", ".join(k.value for k in ActivationKind)
            raise ConfigError(f"unknown activation '{name}', known: {known}") from None

    @property
    def name(self) -> str:
        """Name of the activation kind."""
        return self.kind.value

    @property
    def is_invertible(self) -> bool:
        """Whether the activation is a bijection onto a bounded open interval."""
        return self.kind in (ActivationKind.LOGISTIC, ActivationKind.TANH)

    def value(self, z):
        """Apply the activation elementwise."""
        z = np.asarray(z, dtype=np.float64)
        if self.kind is ActivationKind.TANH:
            return np.tanh(z)
        if self.kind is ActivationKind.LOGISTIC:
            return 0.5 * (1.0 + np.tanh(0.5 * z))
        return np.logaddexp(0.0, z)

    def derivative(self, z):
        """First derivative, elementwise."""
        z = np.asarray(z, dtype=np.float64)
        if self.kind is ActivationKind.TANH:
            t = np.tanh(z)
            return 1.0 - t * t
        s = 0.5 * (1.0 + np.tanh(0.5 * z))
        if self.kind is ActivationKind.LOGISTIC:
            return s * (1.0 - s)
        return s

    def range(self):
        """Open interval the activation maps onto."""
        if self.kind is ActivationKind.TANH:
            return -1.0, 1.0
        if self.kind is ActivationKind.LOGISTIC:
            return 0.0, 1.0
        return 0.0, np.inf

    def inverse(self, y):
        """Inverse of the activation on its open range."""
        if not self.is_invertible:
            raise DomainError(f"activation {self.name} is not used as an invertible map")
        y = np.asarray(y, dtype=np.float64)
        low, high = self.range()
        if np.any(y <= low) or np.any(y >= high):
            raise DomainError(f"{self.name} inverse needs values in ({low:g}, {high:g})")
        if self.kind is ActivationKind.TANH:
            return np.arctanh(y)
        return 2.0 * np.arctanh(2.0 * y - 1.0)


@dataclass(frozen=True, eq=False)
class ShallowNet:
    """A member of the class S_{N,n}.

    Parameters are ordered [outer_coeffs, inner_biases, inner_weights] with
    the inner weights flattened row by row (unit by unit); this is the order
    of ``parameters()``, ``grad_params`` and the serialized form.
    """

    inner_weights: np.ndarray
    inner_biases: np.ndarray
    outer_coeffs: np.ndarray
    activation: Activation = field(default_factory=Activation)

    def __post_init__(self):
        """Validate shapes."""
        w = np.asarray(self.inner_weights, dtype=np.float64)
        if w.ndim != 2:
            raise DimensionMismatchError("inner_weights must be an (N, n) array")
        units = w.shape[0]
        b = np.asarray(self.inner_biases, dtype=np.float64).reshape(-1)
        a = np.asarray(self.outer_coeffs, dtype=np.float64).reshape(-1)
        if b.shape != (units,) or a.shape != (units,):
            raise DimensionMismatchError(
                f"{units} units need {units} biases and coefficients, "
                f"got {b.shape[0]} and {a.shape[0]}"
            )
        object.__setattr__(self, "inner_weights", w)
        object.__setattr__(self, "inner_biases", b)
        object.__setattr__(self, "outer_coeffs", a)

    @classmethod
    def zeros(cls, n: int, units: int, activation: Optional[Activation] = None):
        """The network with every parameter zero; it evaluates to 0 everywhere."""
        return cls(
            np.zeros((units, n)),
            np.zeros(units),
            np.zeros(units),
            activation or Activation(),
        )

    @classmethod
    def from_parameters(cls, theta, n: int, activation: Optional[Activation] = None):
        """Rebuild a net from its flat parameter vector."""
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.size % (n + 2):
            raise DimensionMismatchError(
                f"{theta.size} parameters do not split into units of {n + 2}"
            )
        units = theta.size // (n + 2)
        return cls(
            theta[2 * units :].reshape(units, n),
            theta[units : 2 * units],
            theta[:units],
            activation or Activation(),
        )

    @property
    def n(self) -> int:
        """Input dimension."""
        return self.inner_weights.shape[1]

    @property
    def units(self) -> int:
        """Number of hidden units N."""
        return self.inner_weights.shape[0]

    @property
    def parameter_count(self) -> int:
        """Trainable parameters, (n + 2) N."""
        return (self.n + 2) * self.units

    def parameters(self) -> np.ndarray:
        """Flat parameter vector."""
        return np.concatenate(
            [self.outer_coeffs, self.inner_biases, self.inner_weights.reshape(-1)]
        )

    def hidden(self, x) -> np.ndarray:
        """Hidden unit outputs sigma(<w_k, x> + b_k) for an (M, n) array of points."""
        points, _ = as_points(x, self.n)
        return self.activation.value(points @ self.inner_weights.T + self.inner_biases)

    def eval(self, x):
        """Evaluate the network on one point (returns a float) or on an (M, n) array."""
        points, single = as_points(x, self.n)
        out = self.hidden(points) @ self.outer_coeffs
        return float(out[0]) if single else out

    __call__ = eval

    def grad_params(self, x, residual_weight) -> np.ndarray:
        """Gradient of residual_weight * eval(x) with respect to the parameters.

        For an (M, n) array of points residual_weight is an (M,) array and the
        weighted gradients are summed.
        """
        points, _ = as_points(x, self.n)
        weights = np.broadcast_to(
            np.asarray(residual_weight, dtype=np.float64), (points.shape[0],)
        )
        z = points @ self.inner_weights.T + self.inner_biases
        s = self.activation.value(z)
        ds = self.activation.derivative(z) * weights[:, None]
        grad_a = s.T @ weights
        grad_b = self.outer_coeffs * ds.sum(axis=0)
        grad_w = self.outer_coeffs[:, None] * (ds.T @ points)
        return np.concatenate([grad_a, grad_b, grad_w.reshape(-1)])

    def pad(self, extra: int, rng: Optional[np.random.Generator] = None, scale=1.0):
        """Append units with outer coefficient 0; the function is unchanged.

        With an rng the new inner weights and biases are drawn uniformly from
        [-scale, scale], otherwise they are zero.
        """
        if extra < 0:
            raise ConfigError("cannot pad a network with a negative number of units")
        if extra == 0:
            return self
        if rng is None:
            new_w = np.zeros((extra, self.n))
            new_b = np.zeros(extra)
        else:
            new_w = rng.uniform(-scale, scale, size=(extra, self.n))
            new_b = rng.uniform(-scale, scale, size=extra)
        return ShallowNet(
            np.vstack([self.inner_weights, new_w]),
            np.concatenate([self.inner_biases, new_b]),
            np.concatenate([self.outer_coeffs, np.zeros(extra)]),
            self.activation,
        )


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings shared by every trainer in the package."""

    rng_seed: int = 0
    restarts: int = 8
    iterations: int = 5000
    step_size: float = 0.05
    step_decay: float = 1e-3
    init_scale: float = 2.0
    optimizer: str = "adam"
    activation: str = "tanh"
    mse_tolerance: float = 1e-16
    train_points_per_dim: Optional[int] = None

    def __post_init__(self):
        """Validate the configuration."""
        if self.restarts < 1 or self.iterations < 1:
            raise ConfigError("restarts and iterations must be at least 1")
        if not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if not 0 < self.step_decay <= 1:
            raise ConfigError("step_decay must lie in (0, 1]")
        if not self.init_scale > 0:
            raise ConfigError("init_scale must be positive")
        if self.optimizer not in ("adam", "gd"):
            raise ConfigError(f"unknown optimizer '{self.optimizer}', known: adam, gd")
        if self.train_points_per_dim is not None and self.train_points_per_dim < 2:
            raise ConfigError("train_points_per_dim must be at least 2")
        Activation.from_name(self.activation)

    def with_seed(self, seed: int) -> "FitConfig":
        """Copy of this configuration with another seed."""
        return replace(self, rng_seed=seed)

    def get_activation(self) -> Activation:
        """The configured activation."""
        return Activation.from_name(self.activation)


class _Diverged(Exception):
    pass


def _descend(net: ShallowNet, features, targets, cfg: FitConfig) -> ShallowNet:
    """Full-batch descent on the mean squared error over a table."""
    theta = net.parameters()
    n = net.n
    activation = net.activation
    count = features.shape[0]
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    for t in range(1, cfg.iterations + 1):
        current = ShallowNet.from_parameters(theta, n, activation)
        residual = current.hidden(features) @ current.outer_coeffs - targets
        mse = float(np.mean(residual * residual))
        if not np.isfinite(mse):
            raise _Diverged(f"loss became non-finite at iteration {t}")
        if mse < cfg.mse_tolerance:
            break
        grad = current.grad_params(features, residual * (2.0 / count))
        lr = cfg.step_size / (1.0 + (t - 1) * cfg.step_decay)
        if cfg.optimizer == "adam":
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
            m_hat = m / (1.0 - ADAM_BETA1**t)
            v_hat = v / (1.0 - ADAM_BETA2**t)
            theta = theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        else:
            theta = theta - lr * grad
        if not np.all(np.isfinite(theta)):
            raise _Diverged(f"parameters became non-finite at iteration {t}")
    return ShallowNet.from_parameters(theta, n, activation)


def _random_net(n: int, units: int, cfg: FitConfig, rng: np.random.Generator):
    return ShallowNet(
        rng.uniform(-cfg.init_scale, cfg.init_scale, size=(units, n)),
        rng.uniform(-cfg.init_scale, cfg.init_scale, size=units),
        np.zeros(units),
        cfg.get_activation(),
    )


def fit_table(
    features,
    targets,
    units: int,
    cfg: FitConfig,
    warm_start: Optional[ShallowNet] = None,
    select_on=None,
):
    """Fit a shallow net of the given width to a table of (features, targets).

    Candidates are, in order: the warm start padded with inert units, the
    padded warm start trained further, then ``cfg.restarts`` fresh random
    initializations. The candidate with the smallest sup-norm error on the
    selection table (the training table unless ``select_on`` is given) wins,
    ties going to the earlier candidate. Returns the net and that error.
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if features.ndim != 2 or features.shape[0] != targets.shape[0]:
        raise DimensionMismatchError("features must be (M, n) with M matching the targets")
    if units < 1:
        raise ConfigError(f"a shallow net needs at least one unit, got {units}")
    if not np.all(np.isfinite(targets)):
        raise InvalidOracleError("training targets contain non-finite values")
    n = features.shape[1]
    select_x, select_y = (features, targets) if select_on is None else select_on

    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(cfg.restarts + 1)
    starts = []
    if warm_start is not None:
        if warm_start.n != n or warm_start.units > units:
            raise DimensionMismatchError(
                f"warm start with {warm_start.units} units on {warm_start.n} inputs "
                f"cannot seed {units} units on {n} inputs"
            )
        extra = units - warm_start.units
        starts.append(("warm", warm_start.pad(extra)))
        warm_rng = np.random.default_rng(seeds[-1])
        starts.append(
            ("warm+train", warm_start.pad(extra, rng=warm_rng, scale=cfg.init_scale))
        )
    for r in range(cfg.restarts):
        rng = np.random.default_rng(seeds[r])
        starts.append((f"restart {r}", _random_net(n, units, cfg, rng)))

    best, best_err = None, np.inf
    for label, start in starts:
        try:
            net = start if label == "warm" else _descend(start, features, targets, cfg)
        except _Diverged as err:
            logger.warning("Candidate %s diverged: %s", label, err)
            continue
        # the padded warm start is scored unpadded so its error is reproduced exactly
        scored = warm_start if label == "warm" else net
        err = sup_norm(scored.hidden(select_x) @ scored.outer_coeffs - select_y)
        logger.debug("Candidate %s: sup error %.6g", label, err)
        if not np.isfinite(err):
            logger.warning("Candidate %s produced a non-finite error", label)
            continue
        if err < best_err:
            best, best_err = net, err
    if best is None:
        raise TrainingDivergedError(f"all {len(starts)} candidates diverged")
    return best, float(best_err)


def fit_shallow(
    f,
    grid: Grid,
    units: int,
    cfg: FitConfig,
    warm_start: Optional[ShallowNet] = None,
):
    """Fit a shallow net of width units to f; returns (net, measured sup-norm error on grid).

    Trains on the measurement grid unless ``cfg.train_points_per_dim`` asks
    for a separate training lattice; selection always uses the measurement
    grid.
    """
    values = evaluate_oracle(f, grid.lattice)
    if cfg.train_points_per_dim is None:
        train_x, train_y = grid.lattice, values
    else:
        train_x = make_grid(grid.n, cfg.train_points_per_dim).lattice
        train_y = evaluate_oracle(f, train_x)
    net, err = fit_table(
        train_x, train_y, units, cfg, warm_start, select_on=(grid.lattice, values)
    )
    logger.info("Fitted %d units on %dD target: sup error %.6g", units, grid.n, err)
    return net, err
