"""Contains the model storage: trained models as JSON files."""

import json
import logging
import os
from pathlib import Path
from typing import Union

import numpy as np

from .cascade import CascadeModel, FeatureMode
from .errors import CertificationError, ReportIOError
from .layernet import (
    Certificate,
    LayerMap,
    LayerNetModel,
    Reduction,
    certification_grid,
    verify_invertibility,
)
from .shallow import Activation, ShallowNet

FORMAT_VERSION = 1
RECERTIFY_TOLERANCE = 1e-10

Model = Union[ShallowNet, CascadeModel, LayerNetModel]


def _net_record(net: ShallowNet) -> dict:
    return {
        "n": net.n,
        "units": net.units,
        "activation": net.activation.name,
        "parameters": net.parameters().tolist(),
    }


def _net_from_record(record: dict) -> ShallowNet:
    net = ShallowNet.from_parameters(
        np.array(record["parameters"], dtype=np.float64),
        record["n"],
        Activation.from_name(record["activation"]),
    )
    if net.units != record["units"]:
        raise ReportIOError(f"stored net declares {record['units']} units, holds {net.units}")
    return net


def _cascade_record(model: CascadeModel) -> dict:
    return {
        "n": model.n,
        "mode": model.mode.value,
        "errors": list(model.errors),
        "layers": [_net_record(net) for net in model.layers],
    }


def _cascade_from_record(record: dict) -> CascadeModel:
    return CascadeModel(
        record["n"],
        FeatureMode.from_name(record["mode"]),
        tuple(_net_from_record(r) for r in record["layers"]),
        tuple(float(e) for e in record["errors"]),
    )


def _layer_record(layer: LayerMap) -> dict:
    certificate = layer.certificate
    return {
        "matrix": layer.matrix.tolist(),
        "bias": layer.bias.tolist(),
        "activation": layer.activation.name,
        "certificate": None
        if certificate is None
        else {
            "min_singular_value": certificate.min_singular_value,
            "reconstruction_error": certificate.reconstruction_error,
            "tol": certificate.tol,
        },
    }


class ModelStore:
    """Saves and loads trained models; layer maps are re-certified on load."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def record(self, model: Model) -> dict:
        """Serializable record of a model."""
        if isinstance(model, ShallowNet):
            body = {"kind": "shallow", **_net_record(model)}
        elif isinstance(model, CascadeModel):
            body = {"kind": "cascade", **_cascade_record(model)}
        elif isinstance(model, LayerNetModel):
            body = {
                "kind": "layernet",
                "n": model.n,
                "reduction": None
                if model.reduction is None
                else {
                    "dims": model.reduction.dims,
                    "level": model.reduction.level,
                    "lipschitz_L": model.reduction.lipschitz_L,
                },
                "chain": [_layer_record(layer) for layer in model.chain],
                "head": _cascade_record(model.head),
            }
        else:
            raise TypeError(f"cannot store objects of type {type(model).__name__}")
        return {"format_version": FORMAT_VERSION, **body}

    def save(self, model: Model, path):
        """Write a model to path as JSON."""
        directory = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(directory):
            self.logger.info("Directory %s does not exist and will be created.", directory)
        try:
            Path(directory).mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8") as j:
                json.dump(self.record(model), j, indent=1)
        except OSError as err:
            raise ReportIOError(f"cannot write model {path}: {err.strerror or err}") from err
        self.logger.info("Saved %s model to %s", type(model).__name__, path)

    def load(self, path) -> Model:
        """Read a model written by save."""
        try:
            with open(path, encoding="utf-8") as j:
                record = json.load(j)
        except OSError as err:
            raise ReportIOError(f"cannot read model {path}: {err.strerror or err}") from err
        except ValueError as err:
            raise ReportIOError(f"model {path} is not valid JSON: {err}") from err
        try:
            return self.from_record(record)
        except (KeyError, TypeError) as err:
            raise ReportIOError(f"model {path} is malformed: {err}") from err

    def from_record(self, record: dict) -> Model:
        """Rebuild a model from its record."""
        if record.get("format_version") != FORMAT_VERSION:
            raise ReportIOError(f"unsupported model format {record.get('format_version')}")
        kind = record["kind"]
        if kind == "shallow":
            return _net_from_record(record)
        if kind == "cascade":
            return _cascade_from_record(record)
        if kind == "layernet":
            chain = tuple(
                self.recertify(layer, j + 1) for j, layer in enumerate(record["chain"])
            )
            reduction = record["reduction"]
            return LayerNetModel(
                record["n"],
                chain,
                _cascade_from_record(record["head"]),
                None
                if reduction is None
                else Reduction(
                    reduction["dims"], reduction["level"], reduction.get("lipschitz_L")
                ),
            )
        raise ReportIOError(f"unknown model kind '{kind}'")

    def recertify(self, record: dict, index: int) -> LayerMap:
        """Rebuild a layer map and check its stored certificate still holds."""
        layer = LayerMap(
            np.array(record["matrix"], dtype=np.float64),
            np.array(record["bias"], dtype=np.float64),
            Activation.from_name(record["activation"]),
        )
        stored = record["certificate"]
        if stored is None:
            raise CertificationError(f"layer {index} has no certificate", layer_index=index)
        fresh = verify_invertibility(layer, certification_grid(layer.in_dim), stored["tol"])
        drift = max(
            abs(fresh.min_singular_value - stored["min_singular_value"]),
            abs(fresh.reconstruction_error - stored["reconstruction_error"]),
        )
        if not fresh.passed or not drift <= RECERTIFY_TOLERANCE:
            raise CertificationError(
                f"layer {index} no longer reproduces its certificate (drift {drift:.3g})",
                layer_index=index,
            )
        self.logger.debug("Layer %d re-certified, drift %.3g", index, drift)
        return LayerMap(
            layer.matrix,
            layer.bias,
            layer.activation,
            Certificate(
                stored["min_singular_value"],
                stored["reconstruction_error"],
                stored["tol"],
            ),
        )
