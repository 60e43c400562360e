"""Versioned JSON container for trained models.

Floats are written with ``repr`` (shortest round-trip form), so saving and
loading reproduces every 64-bit parameter exactly.
"""
from __future__ import annotations

import json

import numpy as np

from .core import FfnModel, MlpArch, MlpParams, RbnModel, TnnModel
from .data import NormalizationParams
from .errors import SchemaError

FORMAT_NAME = "tennet-model"
FORMAT_VERSION = 1


def _mlp_to_dict(arch: MlpArch, params: MlpParams):
    return {
        "widths": list(arch.widths),
        "weights": [W.tolist() for W in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def _mlp_from_dict(d):
    widths = [int(w) for w in d["widths"]]
    if len(widths) < 3:
        raise SchemaError(f"a network needs at least one hidden layer, got widths {widths}")
    arch = MlpArch(widths[0], tuple(widths[1:-1]), widths[-1])
    weights = tuple(np.array(W, dtype=np.float64).reshape(m, k)
                    for W, (m, k) in zip(d["weights"], arch.layer_shapes()))
    biases = tuple(np.array(b, dtype=np.float64).reshape(-1) for b in d["biases"])
    return arch, MlpParams(weights, biases)


def model_to_dict(model):
    out = {"format": FORMAT_NAME, "format_version": FORMAT_VERSION, "model_kind": model.kind, "dim": model.dim}
    if model.kind == "tnn":
        out["p"] = model.rank
        out["subnetworks"] = [_mlp_to_dict(a, p) for a, p in model.subnetworks]
    elif model.kind == "ffn":
        out["network"] = _mlp_to_dict(model.arch, model.params)
    else:
        out["centers"] = model.centers.tolist()
        out["sigmas"] = model.sigmas.tolist()
        out["linear_weights"] = model.linear_weights.tolist()
        out["bias"] = model.bias
    out["norm"] = model.norm.to_dict() if model.norm is not None else None
    return out


def model_from_dict(d):
    if not isinstance(d, dict) or d.get("format") != FORMAT_NAME:
        raise SchemaError("not a tennet model file")
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format version {version!r} (expected {FORMAT_VERSION})")
    try:
        norm = NormalizationParams.from_dict(d["norm"]) if d.get("norm") is not None else None
        kind = d["model_kind"]
        if kind == "tnn":
            model = TnnModel(tuple(_mlp_from_dict(s) for s in d["subnetworks"]), norm)
            if model.rank != int(d["p"]):
                raise SchemaError(f"declared rank {d['p']} but subnetworks have {model.rank}")
        elif kind == "ffn":
            arch, params = _mlp_from_dict(d["network"])
            model = FfnModel(arch, params, norm)
        elif kind == "rbn":
            model = RbnModel(np.array(d["centers"], dtype=np.float64), d["sigmas"], d["linear_weights"],
                             d["bias"], norm)
        else:
            raise SchemaError(f"unknown model kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"malformed model file: {exc}") from exc
    if model.dim != int(d["dim"]):
        raise SchemaError(f"declared dimension {d['dim']} but model has {model.dim}")
    return model


def dumps(model):
    return json.dumps(model_to_dict(model), allow_nan=False)


def loads(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(d)


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model))
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
