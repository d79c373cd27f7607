"""Versioned JSON model serialization.

Models are small at desk scale, so a human-readable format with full
``repr`` float precision is affordable; save followed by load restores
parameters bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import UnsupportedVersionError, ValidationError
from .nn import AvgPoolLayer, CnnModel, Conv1DLayer, DenseLayer, FlattenLayer, ReLULayer

FORMAT_VERSION = 1


def save_model(model: CnnModel, path, metadata: dict | None = None) -> None:
    """Write the model's architecture, parameters and metadata to JSON."""
    payload = {
        "format_version": FORMAT_VERSION,
        "architecture": model.architecture(),
        "parameters": [
            {
                "layer": idx,
                "name": name,
                "shape": list(arr.shape),
                "values": [float(v) for v in arr.ravel()],
            }
            for idx, layer in enumerate(model.layers)
            for name, arr in layer.param_arrays()
        ],
        "metadata": dict(metadata or {}),
    }
    with open(Path(path), "w") as fh:
        json.dump(payload, fh, allow_nan=False, sort_keys=True)
        fh.write("\n")


def _layer_from_descriptor(desc: dict):
    kind = desc.get("kind")
    if kind == "conv1d":
        return Conv1DLayer(desc["filters"], desc["in_channels"], desc["filter_len"], desc["padding"])
    if kind == "relu":
        return ReLULayer()
    if kind == "avgpool":
        return AvgPoolLayer(desc["window"], desc["stride"], desc["padding"])
    if kind == "flatten":
        return FlattenLayer()
    if kind == "dense":
        return DenseLayer(desc["out"], desc["in"])
    raise ValidationError(f"unknown layer kind {kind!r} in model file")


def load_model(path) -> CnnModel:
    """Rebuild a model from JSON; the training metadata is attached as
    ``model.metadata``.

    Raises UnsupportedVersionError for unknown format versions and
    ValidationError when a parameter array does not match the declared
    architecture.
    """
    with open(Path(path)) as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: unsupported model format_version {version!r} (supported: {FORMAT_VERSION})"
        )
    arch = payload["architecture"]
    layers = [_layer_from_descriptor(d) for d in arch["layers"]]
    model = CnnModel(layers, input_shape=tuple(arch["input_shape"]))

    expected = [
        (idx, name, arr.shape)
        for idx, layer in enumerate(model.layers)
        for name, arr in layer.param_arrays()
    ]
    entries = payload["parameters"]
    if len(entries) != len(expected):
        raise ValidationError(
            f"{path}: expected {len(expected)} parameter arrays, found {len(entries)}"
        )
    arrays = []
    for entry, (idx, name, shape) in zip(entries, expected):
        if entry.get("layer") != idx or entry.get("name") != name:
            raise ValidationError(
                f"{path}: parameter order mismatch at layer {idx} ({name!r} vs {entry.get('name')!r})"
            )
        values = np.asarray(entry["values"], dtype=np.float64)
        if tuple(entry.get("shape", ())) != shape or values.size != int(np.prod(shape)):
            raise ValidationError(
                f"{path}: layer {idx} parameter {name!r} has {values.size} values, expected shape {shape}"
            )
        arrays.append(values.reshape(shape))
    model.set_parameters(arrays)
    model.metadata = dict(payload.get("metadata", {}))
    return model
