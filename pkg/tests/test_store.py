"""Tests for saving and loading models."""

import json

import numpy as np
import pytest

from layerapprox.cascade import FeatureMode, train_cascade
from layerapprox.core_math import get_function
from layerapprox.errors import CertificationError, ReportIOError
from layerapprox.layernet import train_layernet_ge, train_layernet_lt
from layerapprox.shallow import FitConfig, fit_shallow
from layerapprox.store import ModelStore

QUICK = FitConfig(restarts=1, iterations=100)


@pytest.fixture
def points():
    """Random points of I^2."""
    return np.random.default_rng(0).uniform(-1, 1, (200, 2))


def test_shallow_round_trip(tmp_path, small_grid, points):
    """A saved net evaluates identically after loading."""
    net, _ = fit_shallow(get_function("cos2d"), small_grid(2), 3, QUICK)
    store = ModelStore()
    store.save(net, tmp_path / "models" / "net.json")
    loaded = store.load(tmp_path / "models" / "net.json")
    np.testing.assert_array_equal(loaded.parameters(), net.parameters())
    np.testing.assert_array_equal(loaded(points), net(points))


def test_cascade_round_trip(tmp_path, small_grid, points):
    """Mode, layers and errors survive storage."""
    model, _ = train_cascade(
        get_function("cos2d"), small_grid(2), 3, 2, FeatureMode.X_PLUS_PREV_LAYER, QUICK
    )
    store = ModelStore()
    store.save(model, tmp_path / "cascade.json")
    loaded = store.load(tmp_path / "cascade.json")
    assert loaded.mode is FeatureMode.X_PLUS_PREV_LAYER
    assert loaded.errors == model.errors
    np.testing.assert_array_equal(loaded(points), model(points))


def test_layernet_round_trip_recertifies(tmp_path, small_grid, points):
    """Layer maps are certified again on load and reproduce the stored values."""
    model, _, _ = train_layernet_lt(get_function("cos2d"), small_grid(2), 2, 1, 4, QUICK)
    store = ModelStore()
    store.save(model, tmp_path / "layernet.json")
    loaded = store.load(tmp_path / "layernet.json")
    assert loaded.reduction == model.reduction
    assert loaded.reduction.lipschitz_L == get_function("cos2d").lipschitz_L
    assert loaded.certificates == model.certificates
    np.testing.assert_array_equal(loaded(points), model(points))


def test_tampered_layer_fails_certification(small_grid):
    """A changed matrix no longer matches its certificate."""
    model, _ = train_layernet_ge(get_function("cos2d"), small_grid(2), 2, 3, QUICK)
    store = ModelStore()
    record = json.loads(json.dumps(store.record(model)))
    record["chain"][-1]["matrix"][0][0] += 0.1
    with pytest.raises(CertificationError) as info:
        store.from_record(record)
    assert info.value.layer_index == len(record["chain"])
    record["chain"][-1]["certificate"] = None
    with pytest.raises(CertificationError):
        store.from_record(record)


def test_bad_files(tmp_path):
    """Missing, malformed and unknown models are I/O errors."""
    store = ModelStore()
    with pytest.raises(ReportIOError):
        store.load(tmp_path / "missing.json")
    path = tmp_path / "model.json"
    path.write_text("[1, 2")
    with pytest.raises(ReportIOError):
        store.load(path)
    path.write_text(json.dumps({"format_version": 1, "kind": "forest"}))
    with pytest.raises(ReportIOError, match="forest"):
        store.load(path)
    path.write_text(json.dumps({"format_version": 99, "kind": "shallow"}))
    with pytest.raises(ReportIOError):
        store.load(path)
    with pytest.raises(TypeError):
        store.record("not a model")
