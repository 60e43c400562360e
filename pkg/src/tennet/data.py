"""Datasets, affine normalization, synthetic benchmarks and CSV I/O.

Raw data lives in :class:`RawDataset`. Models are trained in normalized
coordinates, where every input is mapped to ``[0, 1]`` and the target is
mean-centred and divided by its range::

    x_i = (X_i - X_i_min) / (X_i_max - X_i_min)
    y   = (Y - Y_mean) / (Y_max - Y_min)
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRangeError, ParseError, SchemaError, ShapeError, ValidationError

log = logging.getLogger(__name__)

CONCRETE_COLUMNS = (
    "cement",
    "fly_ash",
    "blast_furnace_slag",
    "water",
    "superplasticizer",
    "coarse_aggregate",
    "fine_aggregate",
    "age",
    "strength_mpa",
)


def _as_2d(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D input array, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class RawDataset:
    """Observed samples ``(X^k, Y^k)`` in physical units."""

    X: np.ndarray
    y: np.ndarray
    columns: tuple = ()

    def __post_init__(self):
        X = _as_2d(self.X)
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ShapeError(f"{X.shape[0]} input rows but {y.shape[0]} targets")
        if X.shape[0] < 1:
            raise ValidationError("dataset is empty")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("dataset contains non-finite values")
        columns = tuple(self.columns) or tuple(f"x_{i + 1}" for i in range(X.shape[1])) + ("y",)
        if len(columns) != X.shape[1] + 1:
            raise SchemaError(f"{len(columns)} column names for {X.shape[1] + 1} columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "columns", columns)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def subset(self, index):
        return RawDataset(self.X[index], self.y[index], self.columns)


@dataclass(frozen=True)
class NormalizationParams:
    x_min: np.ndarray
    x_max: np.ndarray
    y_mean: float
    y_min: float
    y_max: float

    def __post_init__(self):
        x_min = np.asarray(self.x_min, dtype=np.float64).reshape(-1)
        x_max = np.asarray(self.x_max, dtype=np.float64).reshape(-1)
        if x_min.shape != x_max.shape:
            raise ShapeError("x_min and x_max differ in length")
        bad = np.flatnonzero(~(x_max > x_min))
        if bad.size:
            raise DegenerateRangeError(int(bad[0]), f"input dimension {int(bad[0]) + 1} has x_max <= x_min")
        if not self.y_max > self.y_min:
            raise DegenerateRangeError("y", "target has y_max <= y_min")
        object.__setattr__(self, "x_min", x_min)
        object.__setattr__(self, "x_max", x_max)
        object.__setattr__(self, "y_mean", float(self.y_mean))
        object.__setattr__(self, "y_min", float(self.y_min))
        object.__setattr__(self, "y_max", float(self.y_max))

    @property
    def dim(self):
        return self.x_min.shape[0]

    @property
    def x_range(self):
        return self.x_max - self.x_min

    @property
    def y_range(self):
        return self.y_max - self.y_min

    def to_dict(self):
        return {
            "x_min": self.x_min.tolist(),
            "x_max": self.x_max.tolist(),
            "y_mean": self.y_mean,
            "y_min": self.y_min,
            "y_max": self.y_max,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["x_min"], d["x_max"], d["y_mean"], d["y_min"], d["y_max"])


@dataclass(frozen=True)
class Dataset:
    """Normalized samples; ``norm`` links back to physical units when known."""

    x: np.ndarray
    y: np.ndarray
    norm: NormalizationParams | None = field(default=None, compare=False)

    def __post_init__(self):
        x = _as_2d(self.x)
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if x.shape[0] != y.shape[0]:
            raise ShapeError(f"{x.shape[0]} input rows but {y.shape[0]} targets")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]

    def subset(self, index):
        return Dataset(self.x[index], self.y[index], self.norm)


def normalize_fit(raw: RawDataset) -> NormalizationParams:
    """Fit per-dimension min/max and target mean/min/max on ``raw``.

    Raises :class:`DegenerateRangeError` naming the first constant column.
    """
    x_min = raw.X.min(axis=0)
    x_max = raw.X.max(axis=0)
    for i in range(raw.dim):
        if not x_max[i] > x_min[i]:
            raise DegenerateRangeError(raw.columns[i])
    y_min, y_max = float(raw.y.min()), float(raw.y.max())
    if not y_max > y_min:
        raise DegenerateRangeError(raw.columns[-1])
    return NormalizationParams(x_min, x_max, float(raw.y.mean()), y_min, y_max)


def normalize_inputs(X, params: NormalizationParams, clamp=True):
    X = _as_2d(X)
    if X.shape[1] != params.dim:
        raise ShapeError(f"inputs have {X.shape[1]} columns, normalization expects {params.dim}")
    x = (X - params.x_min) / params.x_range
    if clamp:
        outside = (x < 0.0) | (x > 1.0)
        if outside.any():
            log.warning("%d input value(s) outside the fitted range were clamped to [0, 1]", int(outside.sum()))
            x = np.clip(x, 0.0, 1.0)
    return x


def denormalize_inputs(x, params: NormalizationParams):
    return params.x_min + _as_2d(x) * params.x_range


def normalize_output(Y, params: NormalizationParams):
    return (np.asarray(Y, dtype=np.float64) - params.y_mean) / params.y_range


def denormalize_output(y_norm, params: NormalizationParams):
    return np.asarray(y_norm, dtype=np.float64) * params.y_range + params.y_mean


def normalize_apply(raw: RawDataset, params: NormalizationParams, clamp=True) -> Dataset:
    """Map ``raw`` into normalized coordinates.

    Inputs outside the fitted range are clamped to ``[0, 1]`` (with a
    warning) unless ``clamp`` is false.
    """
    return Dataset(normalize_inputs(raw.X, params, clamp=clamp), normalize_output(raw.y, params), params)


# --- synthetic benchmarks -------------------------------------------------


def sum_sines(X):
    X = _as_2d(X)
    return np.sin(2.0 * np.pi * X).sum(axis=1)


def prod_exp(X):
    X = _as_2d(X)
    return np.exp(-(X**2).sum(axis=1))


@dataclass(frozen=True)
class SyntheticFunction:
    name: str
    fn: object
    # integrals of f and f**2 over the unit cube of dimension ``dim``
    integral: object
    integral_sq: object

    def __call__(self, X):
        return self.fn(X)


def _gauss_1d(a):
    # \int_0^1 exp(-a x^2) dx
    return 0.5 * math.sqrt(math.pi / a) * math.erf(math.sqrt(a))


SYNTHETIC = {
    "sum_sines": SyntheticFunction(
        "sum_sines",
        sum_sines,
        integral=lambda dim: 0.0,
        # cross terms vanish and each sin^2 term integrates to 1/2
        integral_sq=lambda dim: dim / 2.0,
    ),
    "prod_exp": SyntheticFunction(
        "prod_exp",
        prod_exp,
        integral=lambda dim: _gauss_1d(1.0) ** dim,
        integral_sq=lambda dim: _gauss_1d(2.0) ** dim,
    ),
}


def synthetic_function(function_id) -> SyntheticFunction:
    try:
        return SYNTHETIC[function_id]
    except KeyError:
        raise ValidationError(
            f"unknown function id {function_id!r}; expected one of {sorted(SYNTHETIC)}"
        ) from None


def gen_synthetic(function_id, n, seed, dim=8) -> RawDataset:
    """Draw ``n`` i.i.d. uniform points in ``[0, 1]^dim`` and evaluate the benchmark exactly."""
    f = synthetic_function(function_id)
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.random((n, dim))
    columns = tuple(f"x_{i + 1}" for i in range(dim)) + ("y",)
    return RawDataset(X, f(X), columns)


# --- CSV ------------------------------------------------------------------


def format_float(v):
    """17 significant digits in scientific notation; round-trips float64 exactly."""
    return f"{v:.16E}"


def load_csv(path, n_inputs=None) -> RawDataset:
    """Read a header + numeric body CSV; the last column is the target."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if len(header) < 2:
            raise SchemaError(f"{path}: need at least one input column and one target column")
        if n_inputs is not None and len(header) != n_inputs + 1:
            raise SchemaError(f"{path}: expected {n_inputs + 1} columns, found {len(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
            values = []
            for j, cell in enumerate(row):
                cell = cell.strip()
                if cell == "":
                    raise ParseError(f"{path}: blank cell", row=lineno, column=header[j])
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: non-numeric cell {cell!r}", row=lineno, column=header[j]) from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}: non-finite cell {cell!r}", row=lineno, column=header[j])
                values.append(v)
            rows.append(values)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    return RawDataset(data[:, :-1], data[:, -1], tuple(header))


def write_csv(path_or_file, raw: RawDataset):
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(raw.columns)
        for xr, yv in zip(raw.X, raw.y):
            w.writerow([format_float(v) for v in xr] + [format_float(yv)])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            _write(fh)
