"""Tests for the residual cascade."""

import numpy as np
import pytest

from layerapprox.cascade import (
    CascadeModel,
    ErrorTrace,
    FeatureMode,
    ResidualTrainer,
    eval_cascade,
    residual_oracle,
    train_cascade,
)
from layerapprox.core_math import (
    CORE_CORPUS,
    TargetFunction,
    get_function,
    make_grid,
    sup_norm,
    sup_norm_diff,
)
from layerapprox.errors import (
    ConfigError,
    DegenerateResidualError,
    DimensionMismatchError,
    DomainError,
)
from layerapprox.settings import Settings
from layerapprox.shallow import FitConfig, ShallowNet


def random_net(rng, n, units):
    """Tanh net with parameters drawn from [-1, 1]."""
    return ShallowNet(
        rng.uniform(-1, 1, (units, n)), rng.uniform(-1, 1, units), rng.uniform(-1, 1, units)
    )


def test_zero_target_stops_after_first_layer(fast_cfg, small_grid):
    """An exact first layer ends training."""
    model, trace = train_cascade(
        get_function("zero2d"), small_grid(2), 4, 3, FeatureMode.X_ONLY, fast_cfg
    )
    assert model.depth == 1
    assert trace.per_layer == (0.0,)
    np.testing.assert_array_equal(model(small_grid(2).lattice), np.zeros(17 * 17))


@pytest.mark.parametrize("mode", list(FeatureMode))
@pytest.mark.parametrize("name", CORE_CORPUS)
def test_grid_error_is_product_of_layer_errors(name, mode, fast_cfg, small_grid):
    """The grid error of every prefix is the product of its measured errors."""
    f = get_function(name)
    grid = small_grid(f.n)
    for seed in range(3):
        model, trace = train_cascade(f, grid, 4, 4, mode, fast_cfg.with_seed(seed))
        for depth in range(1, model.depth + 1):
            measured = sup_norm_diff(f, model.prefix(depth), grid)
            expected = trace.cumulative[depth - 1]
            assert measured == pytest.approx(expected, rel=1e-9, abs=1e-15), (
                f"{name}, {mode.value}, seed {seed}, depth {depth}: "
                f"{measured} != {expected}"
            )
        assert all(
            b <= a for a, b in zip(trace.cumulative, trace.cumulative[1:])
        ), f"{name}, {mode.value}, seed {seed}: {trace.cumulative}"
        assert all(e <= 1.0 for e in trace.per_layer[1:])


def test_tanh_cascade_improves_with_depth(small_grid):
    """Four narrow layers on tanh(2x) reduce the error."""
    cfg = FitConfig(restarts=4, iterations=2000)
    _, trace = train_cascade(get_function("tanh2x"), small_grid(1), 4, 4, FeatureMode.X_ONLY, cfg)
    assert len(trace.cumulative) == 4
    assert all(b <= a for a, b in zip(trace.cumulative, trace.cumulative[1:]))
    assert trace.final_error < trace.initial_error


@pytest.mark.parametrize("name", ["tanh2x", "bump1d"])
def test_default_cascade_gains_a_decade_in_four_layers(name):
    """Width 8, depth 4 with the packaged defaults ends at a tenth of the layer-1 error."""
    settings = Settings()
    _, trace = train_cascade(
        get_function(name), settings.grid(1), 4, 8, settings.mode(), settings.fit_config()
    )
    assert all(b <= a for a, b in zip(trace.cumulative, trace.cumulative[1:]))
    assert trace.final_error <= 0.1 * trace.initial_error, f"{name}: {trace.cumulative}"

def test_single_layer_is_a_shallow_net():
    """A depth-1 cascade evaluates exactly like its only net."""
    rng = np.random.default_rng(7)
    net = random_net(rng, 3, 5)
    model = CascadeModel(3, FeatureMode.X_PLUS_PREV_LAYER, (net,), (0.25,))
    points = rng.uniform(-1, 1, (1000, 3))
    np.testing.assert_array_equal(eval_cascade(model, points), net.eval(points))
    assert model(points[0]) == net.eval(points[0])


def test_zero_first_scale_leaves_first_layer():
    """Later layers are weighted by the earlier errors."""
    rng = np.random.default_rng(8)
    layers = (random_net(rng, 2, 3), random_net(rng, 3, 3), random_net(rng, 3, 3))
    model = CascadeModel(2, FeatureMode.X_PLUS_PREV_APPROX, layers, (0.0, 0.3, 0.2))
    points = rng.uniform(-1, 1, (500, 2))
    np.testing.assert_array_equal(model(points), layers[0](points))
    assert model.scales == (0.0, 0.3)
    assert model.widths == (3, 3, 3)
    assert model.parameter_count == 4 * 3 + 5 * 3 + 5 * 3


def test_model_wiring_is_checked():
    """Layer input dimensions must match the feature mode."""
    rng = np.random.default_rng(9)
    with pytest.raises(DimensionMismatchError):
        CascadeModel(2, FeatureMode.X_ONLY, (random_net(rng, 2, 3), random_net(rng, 3, 3)), (0.5, 0.5))
    with pytest.raises(ConfigError):
        CascadeModel(2, FeatureMode.X_ONLY, (random_net(rng, 2, 3),), (0.5, 0.5))


@pytest.mark.parametrize(
    ("mode", "dims"),
    [
        (FeatureMode.X_ONLY, [2, 2, 2]),
        (FeatureMode.X_PLUS_PREV_APPROX, [2, 3, 3]),
        (FeatureMode.X_PLUS_PREV_LAYER, [2, 5, 5]),
    ],
)
def test_layer_inputs_follow_mode(mode, dims, small_grid):
    """Layers after the first see the extra features of their mode."""
    cfg = FitConfig(restarts=1, iterations=100)
    model, _ = train_cascade(get_function("cos2d"), small_grid(2), 3, 3, mode, cfg)
    assert [net.n for net in model.layers] == dims[: model.depth]
    assert [mode.input_dim(2, 3, j) for j in range(3)] == dims


def test_residual_oracle_is_normalised(fast_cfg, small_grid):
    """The residual after one layer has grid sup norm exactly 1."""
    f = get_function("bump1d")
    grid = small_grid(1)
    model, _ = train_cascade(f, grid, 3, 3, FeatureMode.X_ONLY, fast_cfg)
    assert model.depth == 3
    assert sup_norm(residual_oracle(model, f, 1)(grid.lattice)) == 1.0


def test_residual_oracle_matches_training_table(fast_cfg, small_grid):
    """Recomputing a residual from scratch gives the table used in training."""
    f = get_function("cos2d")
    grid = small_grid(2)
    for mode in FeatureMode:
        trainer = ResidualTrainer(grid.lattice, f(grid.lattice), 3, mode, fast_cfg)
        model = trainer.train(3)
        np.testing.assert_allclose(
            residual_oracle(model, f, 2)(grid.lattice), trainer.residuals[2], rtol=0, atol=1e-12
        )


def test_residual_oracle_errors(fast_cfg, small_grid):
    """Exact fits cannot be normalised and indices are range checked."""
    zero = get_function("zero1d")
    model, _ = train_cascade(zero, small_grid(1), 3, 2, FeatureMode.X_ONLY, fast_cfg)
    with pytest.raises(DegenerateResidualError):
        residual_oracle(model, zero, 1)
    for j in (0, 2):
        with pytest.raises(ConfigError):
            residual_oracle(model, zero, j)


def test_target_outside_unit_ball(fast_cfg, small_grid):
    """Targets with sup norm above 1 must be rescaled first."""
    big = TargetFunction("big", 1, lambda x: np.full(x.shape[0], 1.5), 1, 0.0)
    with pytest.raises(DomainError):
        train_cascade(big, small_grid(1), 2, 2, FeatureMode.X_ONLY, fast_cfg)


def test_trainer_argument_checks(fast_cfg):
    """Bad widths, depths and table shapes are rejected."""
    x = np.zeros((4, 1))
    with pytest.raises(ConfigError):
        ResidualTrainer(x, np.zeros(4), 0, FeatureMode.X_ONLY, fast_cfg)
    with pytest.raises(DimensionMismatchError):
        ResidualTrainer(x, np.zeros(5), 2, FeatureMode.X_ONLY, fast_cfg)
    with pytest.raises(ConfigError):
        ResidualTrainer([x, x], np.zeros(4), 2, FeatureMode.X_ONLY, fast_cfg).train(3)
    with pytest.raises(ConfigError):
        ResidualTrainer(x, np.zeros(4), 2, FeatureMode.X_ONLY, fast_cfg).train(0)


def test_error_trace_products():
    """Cumulative errors are running products."""
    trace = ErrorTrace.from_errors([0.5, 0.5, 0.25])
    assert trace.cumulative == (0.5, 0.25, 0.0625)
    assert trace.initial_error == 0.5
    assert trace.final_error == 0.0625


def test_feature_mode_names():
    """Modes parse case-insensitively."""
    assert FeatureMode.from_name("X_PLUS_PREV_LAYER") is FeatureMode.X_PLUS_PREV_LAYER
    with pytest.raises(ConfigError):
        FeatureMode.from_name("skip")
