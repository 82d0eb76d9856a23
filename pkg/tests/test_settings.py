"""Tests for the layered run configuration."""

import json

import pytest

from layerapprox.cascade import FeatureMode
from layerapprox.errors import ConfigError
from layerapprox.settings import Settings, load_settings, save_settings


def test_defaults():
    """The packaged defaults resolve to a valid configuration."""
    settings = Settings()
    cfg = settings.fit_config()
    assert cfg.rng_seed == 0
    assert cfg.restarts == 8
    assert cfg.optimizer == "adam"
    assert settings.mode() is FeatureMode.X_ONLY
    assert settings.mode("layernet_mode") is FeatureMode.X_PLUS_PREV_APPROX
    assert settings.chain_activation().name == "tanh"
    assert settings.grid(2).points_per_dim == 129


def test_file_then_flags(tmp_path):
    """A config file overrides defaults and flags override the file."""
    path = tmp_path / "run.json"
    save_settings({"seed": 7, "restarts": 3, "grid_points": 5}, str(path))
    settings = Settings(str(path), {"seed": 11})
    assert settings["seed"] == 11
    assert settings["restarts"] == 3
    assert settings.grid(3).size == 125
    assert settings.as_dict()["iterations"] == 5000


def test_unknown_keys_are_rejected(tmp_path):
    """Every key needs a default."""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"sead": 1}))
    with pytest.raises(ConfigError, match="sead"):
        Settings(str(path))
    with pytest.raises(ConfigError):
        Settings(overrides={"colour": "red"})
    with pytest.raises(ConfigError):
        Settings()["colour"]


def test_invalid_files(tmp_path):
    """Unreadable, malformed and non-object files are configuration errors."""
    with pytest.raises(ConfigError):
        load_settings(str(tmp_path / "missing.json"))
    path = tmp_path / "run.json"
    path.write_text("{seed: 1}")
    with pytest.raises(ConfigError):
        load_settings(str(path))
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_settings(str(path))


def test_invalid_values():
    """Bad values surface when the configuration is resolved."""
    with pytest.raises(ConfigError):
        Settings(overrides={"restarts": "many"}).fit_config()
    with pytest.raises(ConfigError):
        Settings(overrides={"optimizer": "sgd"}).fit_config()
    with pytest.raises(ConfigError):
        Settings(overrides={"mode": "diagonal"}).mode()


def test_values_must_match_the_default_types(tmp_path):
    """Strings for lists, floats for integers and the like are rejected up front."""
    cases = [
        {"widths": "24"},
        {"functions": "tanh2x"},
        {"widths": [2, "4"]},
        {"restarts": 2.5},
        {"record_runtime": 1},
        {"seed": True},
        {"tau": "small"},
        {"grid_points": "9"},
        {"out": 3},
    ]
    path = tmp_path / "run.json"
    for values in cases:
        path.write_text(json.dumps(values))
        with pytest.raises(ConfigError, match=next(iter(values))):
            Settings(str(path))
    settings = Settings(overrides={"tau": 1, "grid_points": None, "widths": [3, 5]})
    assert settings["tau"] == 1
    assert settings["widths"] == [3, 5]
