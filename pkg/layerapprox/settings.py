"""Contains the resolved run configuration."""

import json
import logging
import os
from typing import Optional

from .cascade import FeatureMode
from .core_math import Grid, default_points_per_dim, make_grid
from .errors import ConfigError, ReportIOError
from .helpers import PACKAGE_PATH
from .shallow import Activation, FitConfig

DEFAULTS_FILE = os.path.join(PACKAGE_PATH, "settings.json")

# settings whose default is null, with the type of a non-null value
_NULLABLE = {
    "grid_points": int,
    "train_points_per_dim": int,
    "out": str,
    "model_out": str,
}


def _type_name(kind) -> str:
    return {bool: "a boolean", int: "an integer", float: "a number", str: "a string"}[kind]


def _matches(value, kind) -> bool:
    if kind is bool:
        return isinstance(value, bool)
    if isinstance(value, bool):
        return False
    if kind is float:
        return isinstance(value, (int, float))
    return isinstance(value, kind)


def check_value(key: str, value, default):
    """Raise ConfigError unless value has the shape of the default for key."""
    if key in _NULLABLE:
        if value is None or _matches(value, _NULLABLE[key]):
            return
        raise ConfigError(f"setting {key} must be null or {_type_name(_NULLABLE[key])}")
    if isinstance(default, list):
        kind = type(default[0])
        if not isinstance(value, list) or not all(_matches(v, kind) for v in value):
            raise ConfigError(f"setting {key} must be a list, each item {_type_name(kind)}")
        return
    if not _matches(value, type(default)):
        raise ConfigError(
            f"setting {key} must be {_type_name(type(default))}, got {value!r}"
        )


def load_settings(path: str = DEFAULTS_FILE) -> dict:
    """Load a flat settings object from a JSON file."""
    try:
        with open(path, encoding="utf-8") as j:
            values = json.load(j)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror or err}") from err
    except ValueError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    if not isinstance(values, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return values


def save_settings(values: dict, path: str):
    """Save settings to a JSON file."""
    try:
        with open(path, "w", encoding="utf-8") as j:
            json.dump(values, j, indent=2)
    except OSError as err:
        raise ReportIOError(f"cannot write {path}: {err.strerror or err}") from err


class Settings:
    """Package defaults, overlaid by a user config file, overlaid by CLI flags."""

    def __init__(self, config_path: Optional[str] = None, overrides: Optional[dict] = None):
        self.logger = logging.getLogger(__name__)
        self.defaults = load_settings()
        self.values = dict(self.defaults)
        if config_path:
            self.update(load_settings(config_path), config_path)
        if overrides:
            self.update(overrides, "command line")

    def update(self, values: dict, source: str):
        """Overlay values; keys without a default and values of the wrong type are rejected."""
        unknown = sorted(set(values) - set(self.values))
        if unknown:
            raise ConfigError(f"unknown setting(s) {', '.join(unknown)} in {source}")
        for key, value in values.items():
            check_value(key, value, self.defaults[key])
            if self.values[key] != value:
                self.logger.debug("Setting %s = %r from %s", key, value, source)
        self.values.update(values)

    def get(self, key: str, default=None):
        """Value of a setting."""
        return self.values.get(key, default)

    def __getitem__(self, key: str):
        """Value of a setting."""
        try:
            return self.values[key]
        except KeyError:
            raise ConfigError(f"unknown setting {key}") from None

    def as_dict(self) -> dict:
        """Copy of the resolved settings."""
        return dict(self.values)

    def fit_config(self) -> FitConfig:
        """Optimizer configuration."""
        try:
            return FitConfig(
                rng_seed=int(self["seed"]),
                restarts=int(self["restarts"]),
                iterations=int(self["iterations"]),
                step_size=float(self["step_size"]),
                step_decay=float(self["step_decay"]),
                init_scale=float(self["init_scale"]),
                optimizer=self["optimizer"],
                activation=self["activation"],
                mse_tolerance=float(self["mse_tolerance"]),
                train_points_per_dim=self["train_points_per_dim"],
            )
        except (TypeError, ValueError) as err:
            raise ConfigError(f"invalid optimizer setting: {err}") from err

    def grid(self, n: int) -> Grid:
        """Measurement grid over I^n."""
        p = self["grid_points"] or default_points_per_dim(n)
        return make_grid(n, int(p), int(self["max_grid_points"]))

    def mode(self, key: str = "mode") -> FeatureMode:
        """Feature mode stored under key."""
        return FeatureMode.from_name(self[key])

    def chain_activation(self) -> Activation:
        """Activation of invertible chain layers."""
        return Activation.from_name(self["chain_activation"])
