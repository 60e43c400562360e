"""Seeded regression experiments shared by the CLI and the benchmark sweeps.

One run holds out a test set, splits the rest into training and
validation parts, fits the normalization on the training part, trains,
and reports the MSE on all three parts in normalized target units.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace

import numpy as np

from .core import init_ffn, init_rbn, init_tnn, predict
from .data import RawDataset, normalize_apply, normalize_fit
from .errors import ValidationError
from .training import TrainingConfig, split_train_val, train

MODEL_KINDS = ("tnn", "ffn", "rbn")

# architecture defaults per model kind: (depth, width)
DEFAULT_ARCH = {"tnn": (3, 5), "ffn": (4, 40), "rbn": (1, 80)}

_CELL_RE = re.compile(r"^(\d+)m(\d+)$")


def cell_name(depth, width):
    """``depth=4, width=5`` -> ``"04m05"``."""
    return f"{int(depth):02d}m{int(width):02d}"


def parse_cell(name):
    m = _CELL_RE.match(name)
    if not m:
        raise ValidationError(f"cell name must look like 04m05, got {name!r}")
    return int(m.group(1)), int(m.group(2))


def build_model(kind, dim, depth=None, width=None, rng=None, norm=None, bias_init="uniform"):
    """Fresh model of ``kind``; ``depth``/``width`` default per kind.

    For a TNN the rank equals the width, so every layer of a subnetwork,
    including the output layer, has ``width`` neurons. For an RBN only
    ``width`` (the number of units) is used. ``bias_init`` applies to the
    MLP-based kinds.
    """
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    d0, w0 = DEFAULT_ARCH[kind]
    depth = d0 if depth is None else int(depth)
    width = w0 if width is None else int(width)
    if depth < 1 or width < 1:
        raise ValidationError(f"depth and width must be >= 1, got {depth}, {width}")
    if kind == "tnn":
        return init_tnn(dim, (width,) * depth, width, rng, norm=norm, bias_init=bias_init)
    if kind == "ffn":
        return init_ffn(dim, (width,) * depth, rng, norm=norm, bias_init=bias_init)
    return init_rbn(dim, width, rng, norm=norm)


def holdout_split(raw: RawDataset, n_train, seed):
    """Seeded shuffle; the first ``n_train`` samples are kept for training."""
    if not 0 < n_train < raw.n:
        raise ValidationError(f"n_train must lie in (0, {raw.n}), got {n_train}")
    perm = np.random.default_rng(seed).permutation(raw.n)
    return raw.subset(perm[:n_train]), raw.subset(perm[n_train:])


@dataclass
class Splits:
    """Raw and normalized train/validation(/test) parts sharing one normalization."""

    norm: object
    raw: dict
    normalized: dict


def prepare_splits(raw: RawDataset, seed, ratio=(9, 1), n_test=0) -> Splits:
    """Optional seeded test holdout, then the seeded train/validation split.

    The normalization is fit on the training part only.
    """
    parts = {}
    if n_test:
        fit_raw, parts["test"] = holdout_split(raw, raw.n - n_test, seed)
    else:
        fit_raw = raw
    parts["train"], parts["val"] = split_train_val(fit_raw, ratio, seed)
    norm = normalize_fit(parts["train"])
    normalized = {k: normalize_apply(v, norm) for k, v in parts.items()}
    return Splits(norm, parts, normalized)


def _mse(model, ds):
    r = predict(model, ds.x) - ds.y
    return float(r @ r) / r.shape[0]


@dataclass
class RunResult:
    model: object
    history: object
    train_mse: float
    val_mse: float
    test_mse: float
    seed: int


def run_regression(raw: RawDataset, kind="tnn", depth=None, width=None, seed=0,
                   config: TrainingConfig | None = None, n_train=800, kernels=None,
                   bias_init="uniform") -> RunResult:
    """Hold out ``raw.n - n_train`` test samples and train one model.

    With ``n_train = raw.n`` every sample goes to training and validation
    and ``test_mse`` is nan.

    ``seed`` drives the holdout shuffle, the train/validation split and the
    initialization (through independent streams).
    """
    config = config or TrainingConfig()
    if config.seed != seed:
        config = replace(config, seed=seed)
    sp = prepare_splits(raw, seed, config.split_ratio, n_test=raw.n - n_train)
    tr, va, te = sp.normalized["train"], sp.normalized["val"], sp.normalized.get("test")
    model = build_model(kind, raw.dim, depth, width, init_rng(seed), sp.norm, bias_init)
    best, hist = train(model, tr, config, validation=va, kernels=kernels)
    test_mse = _mse(best, te) if te is not None else math.nan
    return RunResult(best, hist, _mse(best, tr), _mse(best, va), test_mse, seed)


def init_rng(seed):
    """Initialization stream, independent of the split permutations."""
    return np.random.default_rng([seed, 1])
