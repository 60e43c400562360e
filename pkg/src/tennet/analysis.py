"""Input sensitivities of a TNN: gradient, Laplacian and per-sample reports.

Because ``Psi = sum_j prod_i phi_ij(x_i)``, only univariate derivatives are
needed::

    dPsi/dx_i     = sum_j phi_ij'(x_i)  prod_{k != i} phi_kj(x_k)
    d2Psi/dx_i^2  = sum_j phi_ij''(x_i) prod_{k != i} phi_kj(x_k)

Everything here is evaluated in normalized input coordinates.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import Dataset, RawDataset, denormalize_inputs, format_float, normalize_inputs
from .errors import ShapeError, ValidationError


def _as_points(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.dim:
        raise ShapeError(f"inputs have {X.shape[1]} columns, model has dimension {model.dim}")
    return X


def _partials(model, X):
    """Per-dimension first and second partials, each ``(n, d)``."""
    jets = [model.factor_jets(i, X[:, i]) for i in range(model.dim)]
    values = [v for v, _, _ in jets]
    d = model.dim
    # products over all other dimensions, without dividing by factor values
    prefix = [np.ones_like(values[0])]
    for v in values[:-1]:
        prefix.append(prefix[-1] * v)
    suffix = np.ones_like(values[0])
    first = np.empty((X.shape[0], d))
    second = np.empty((X.shape[0], d))
    for i in range(d - 1, -1, -1):
        others = prefix[i] * suffix
        first[:, i] = (jets[i][1] * others).sum(axis=1)
        second[:, i] = (jets[i][2] * others).sum(axis=1)
        suffix = suffix * values[i]
    return first, second


def tnn_gradient_batch(model, X):
    return _partials(model, _as_points(model, X))[0]


def tnn_laplacian_batch(model, X):
    return _partials(model, _as_points(model, X))[1].sum(axis=1)


def tnn_gradient(model, x):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.dim:
        raise ShapeError(f"input has length {x.shape[0]}, model has dimension {model.dim}")
    return tnn_gradient_batch(model, x[None, :])[0]


def tnn_laplacian(model, x):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.dim:
        raise ShapeError(f"input has length {x.shape[0]}, model has dimension {model.dim}")
    return float(tnn_laplacian_batch(model, x[None, :])[0])


@dataclass(frozen=True)
class SensitivityReport:
    index: np.ndarray
    raw_inputs: np.ndarray
    gradients: np.ndarray
    grad_norms: np.ndarray
    laplacians: np.ndarray

    def __len__(self):
        return self.index.shape[0]

    @property
    def header(self):
        d = self.gradients.shape[1]
        return (["index"] + [f"x_{i + 1}" for i in range(d)] + [f"grad_{i + 1}" for i in range(d)]
                + ["grad_norm", "laplacian"])

    def to_csv(self, path_or_file):
        def _write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for k in range(len(self)):
                w.writerow([str(int(self.index[k]))]
                           + [format_float(v) for v in self.raw_inputs[k]]
                           + [format_float(v) for v in self.gradients[k]]
                           + [format_float(self.grad_norms[k]), format_float(self.laplacians[k])])

        if hasattr(path_or_file, "write"):
            _write(path_or_file)
        else:
            with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
                _write(fh)


def sensitivity_report(model, dataset) -> SensitivityReport:
    """Gradient, gradient norm and Laplacian at every sample, in dataset order.

    ``dataset`` may be a :class:`RawDataset` (normalized with ``model.norm``)
    or an already normalized :class:`Dataset`.
    """
    if isinstance(dataset, RawDataset):
        if model.norm is None:
            raise ValidationError("raw data needs a model that carries normalization parameters")
        raw = dataset.X
        x = normalize_inputs(raw, model.norm)
    elif isinstance(dataset, Dataset):
        x = dataset.x
        norm = dataset.norm or model.norm
        raw = denormalize_inputs(x, norm) if norm is not None else x
    else:
        raise ValidationError(f"unsupported dataset type {type(dataset).__name__}")
    x = _as_points(model, x)
    first, second = _partials(model, x)
    return SensitivityReport(
        index=np.arange(x.shape[0]),
        raw_inputs=np.asarray(raw, dtype=np.float64),
        gradients=first,
        grad_norms=np.sqrt((first * first).sum(axis=1)),
        laplacians=second.sum(axis=1),
    )
