"""Model definitions and pure forward evaluation.

Three model families share this module:

* :class:`TnnModel` -- tensor neural network ``Psi(x) = sum_j prod_i phi_ij(x_i)``,
  where ``phi_i = (phi_i1, ..., phi_ip)`` is a scalar-input, ``p``-output MLP.
* :class:`FfnModel` -- a plain fully connected network ``R^d -> R``.
* :class:`RbnModel` -- Gaussian radial basis network with a linear read-out.

Hidden layers use ``tanh``; every output layer is the identity.

All models are immutable values. Training never mutates a model in place;
it works on a flat parameter vector (see :func:`to_vector` and
:func:`from_vector`) and builds a new model at the end.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import NormalizationParams
from .errors import ShapeError, ValidationError

HIDDEN_ACTIVATIONS = ("tanh",)
OUTPUT_ACTIVATIONS = ("identity",)


@dataclass(frozen=True)
class MlpArch:
    input_width: int
    hidden_widths: tuple
    output_width: int
    hidden_activation: str = "tanh"
    output_activation: str = "identity"

    def __post_init__(self):
        hidden = tuple(int(w) for w in self.hidden_widths)
        object.__setattr__(self, "hidden_widths", hidden)
        if len(hidden) < 1:
            raise ValidationError("an MLP needs at least one hidden layer")
        if min((self.input_width, self.output_width) + hidden) < 1:
            raise ValidationError(f"all layer widths must be >= 1, got {self.widths}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValidationError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValidationError(f"unsupported output activation {self.output_activation!r}")

    @property
    def widths(self):
        return (self.input_width,) + tuple(self.hidden_widths) + (self.output_width,)

    @property
    def depth(self):
        return len(self.hidden_widths)

    def layer_shapes(self):
        w = self.widths
        return [(w[l + 1], w[l]) for l in range(len(w) - 1)]

    @property
    def n_params(self):
        return sum(m * k + m for m, k in self.layer_shapes())


@dataclass(frozen=True)
class MlpParams:
    """Weights ``W_l`` (shape ``p_l x p_{l-1}``) and biases ``b_l`` for ``l = 1..L+1``."""

    weights: tuple
    biases: tuple

    def __post_init__(self):
        weights = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.asarray(b, dtype=np.float64) for b in self.biases)
        if len(weights) != len(biases):
            raise ShapeError(f"{len(weights)} weight matrices but {len(biases)} bias vectors")
        for l, (W, b) in enumerate(zip(weights, biases), start=1):
            if W.ndim != 2 or b.ndim != 1 or b.shape[0] != W.shape[0]:
                raise ShapeError(f"layer {l}: weight {W.shape} incompatible with bias {b.shape}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValidationError(f"layer {l} has non-finite parameters")
        for l in range(1, len(weights)):
            if weights[l].shape[1] != weights[l - 1].shape[0]:
                raise ShapeError(f"layer {l + 1} expects {weights[l].shape[1]} inputs, layer {l} gives {weights[l - 1].shape[0]}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    def check(self, arch: MlpArch):
        shapes = [W.shape for W in self.weights]
        if shapes != arch.layer_shapes():
            raise ShapeError(f"parameter shapes {shapes} do not match architecture {arch.widths}")
        return self

    def arrays(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out


BIAS_INITS = ("uniform", "zero")


def init_mlp(arch: MlpArch, rng, bias_init="uniform") -> MlpParams:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases from the same law, or zero."""
    if bias_init not in BIAS_INITS:
        raise ValidationError(f"bias_init must be one of {BIAS_INITS}, got {bias_init!r}")
    rng = np.random.default_rng(rng)
    weights, biases = [], []
    for m, k in arch.layer_shapes():
        bound = 1.0 / np.sqrt(k)
        weights.append(rng.uniform(-bound, bound, size=(m, k)))
        biases.append(rng.uniform(-bound, bound, size=m) if bias_init == "uniform" else np.zeros(m))
    return MlpParams(tuple(weights), tuple(biases))


def _layers(params):
    return zip(params.weights, params.biases)


def mlp_forward_batch(params: MlpParams, X):
    """Evaluate the layer recursion row-wise on ``X`` of shape ``(n, p_0)``."""
    a = np.asarray(X, dtype=np.float64)
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(_layers(params)):
        a = a @ W.T + b
        if l < last:
            a = np.tanh(a)
    return a


def mlp_forward(arch: MlpArch, params: MlpParams, input):
    params.check(arch)
    x = np.asarray(input, dtype=np.float64).reshape(-1)
    if x.shape[0] != arch.input_width:
        raise ShapeError(f"input has length {x.shape[0]}, network expects {arch.input_width}")
    return mlp_forward_batch(params, x[None, :])[0]


# --- tensor neural network ------------------------------------------------


@dataclass(frozen=True)
class TnnModel:
    """``d`` scalar-input subnetworks, each with ``p`` outputs."""

    subnetworks: tuple
    norm: NormalizationParams | None = field(default=None, compare=False)

    def __post_init__(self):
        subs = tuple((arch, params.check(arch)) for arch, params in self.subnetworks)
        if not subs:
            raise ValidationError("a TNN needs at least one subnetwork")
        ranks = {arch.output_width for arch, _ in subs}
        if len(ranks) != 1:
            raise ValidationError(f"subnetworks disagree on the rank: {sorted(ranks)}")
        for i, (arch, _) in enumerate(subs):
            if arch.input_width != 1:
                raise ValidationError(f"subnetwork {i} has input width {arch.input_width}, expected 1")
        if self.norm is not None and self.norm.dim != len(subs):
            raise ShapeError(f"normalization has {self.norm.dim} dimensions, model has {len(subs)}")
        object.__setattr__(self, "subnetworks", subs)

    kind = "tnn"

    @property
    def dim(self):
        return len(self.subnetworks)

    @property
    def rank(self):
        return self.subnetworks[0][0].output_width

    def factor_values(self, i, xs):
        """``(len(xs), p)`` array of ``phi_ij(xs)`` for subnetwork ``i``."""
        xs = np.asarray(xs, dtype=np.float64).reshape(-1, 1)
        return mlp_forward_batch(self.subnetworks[i][1], xs)

    def factor_jets(self, i, xs):
        """Values, first and second derivatives of subnetwork ``i`` at ``xs``."""
        from .diff import mlp_jets

        return mlp_jets(self.subnetworks[i][1], xs)

    def param_arrays(self):
        out = []
        for _, params in self.subnetworks:
            out += params.arrays()
        return out

    def param_names(self):
        names = []
        for i, (arch, _) in enumerate(self.subnetworks):
            for l in range(1, arch.depth + 2):
                names += [f"sub{i}.W{l}", f"sub{i}.b{l}"]
        return names

    def with_arrays(self, arrays, norm=...):
        it = iter(arrays)
        subs = []
        for arch, _ in self.subnetworks:
            ws, bs = [], []
            for _l in range(arch.depth + 1):
                ws.append(next(it))
                bs.append(next(it))
            subs.append((arch, MlpParams(tuple(ws), tuple(bs))))
        return TnnModel(tuple(subs), self.norm if norm is ... else norm)


def init_tnn(dim, hidden_widths, rank, rng=None, norm=None, bias_init="uniform") -> TnnModel:
    """Build a TNN whose ``dim`` subnetworks share one architecture."""
    rng = np.random.default_rng(rng)
    arch = MlpArch(1, tuple(hidden_widths), rank)
    return TnnModel(tuple((arch, init_mlp(arch, rng, bias_init)) for _ in range(dim)), norm)


def tnn_forward_batch(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.dim:
        raise ShapeError(f"inputs have {X.shape[1]} columns, model has dimension {model.dim}")
    prod = model.factor_values(0, X[:, 0])
    for i in range(1, model.dim):
        prod = prod * model.factor_values(i, X[:, i])
    return prod.sum(axis=1)


def tnn_forward(model, x):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.dim:
        raise ShapeError(f"input has length {x.shape[0]}, model has dimension {model.dim}")
    return float(tnn_forward_batch(model, x[None, :])[0])


# --- feed-forward network ------------------------------------------------


@dataclass(frozen=True)
class FfnModel:
    arch: MlpArch
    params: MlpParams
    norm: NormalizationParams | None = field(default=None, compare=False)

    kind = "ffn"

    def __post_init__(self):
        if self.arch.output_width != 1:
            raise ValidationError("an FFN regression model has a single output")
        self.params.check(self.arch)

    @property
    def dim(self):
        return self.arch.input_width

    def param_arrays(self):
        return self.params.arrays()

    def param_names(self):
        names = []
        for l in range(1, self.arch.depth + 2):
            names += [f"W{l}", f"b{l}"]
        return names

    def with_arrays(self, arrays, norm=...):
        arrays = list(arrays)
        params = MlpParams(tuple(arrays[0::2]), tuple(arrays[1::2]))
        return FfnModel(self.arch, params, self.norm if norm is ... else norm)


def init_ffn(dim, hidden_widths, rng=None, norm=None, bias_init="uniform") -> FfnModel:
    rng = np.random.default_rng(rng)
    arch = MlpArch(dim, tuple(hidden_widths), 1)
    return FfnModel(arch, init_mlp(arch, rng, bias_init), norm)


def ffn_forward_batch(model: FfnModel, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.dim:
        raise ShapeError(f"inputs have {X.shape[1]} columns, model has dimension {model.dim}")
    return mlp_forward_batch(model.params, X)[:, 0]


def ffn_forward(model: FfnModel, x):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.dim:
        raise ShapeError(f"input has length {x.shape[0]}, model has dimension {model.dim}")
    return float(ffn_forward_batch(model, x[None, :])[0])


# --- radial basis network ------------------------------------------------


@dataclass(frozen=True)
class RbnModel:
    """``bias + sum_k w_k exp(-|x - c_k|^2 / (2 sigma_k^2))``.

    The trainable coordinates are the centres, ``log(sigma_k)`` (which keeps
    every width positive), the linear weights and the bias.
    """

    centers: np.ndarray
    sigmas: np.ndarray
    linear_weights: np.ndarray
    bias: float
    norm: NormalizationParams | None = field(default=None, compare=False)

    kind = "rbn"

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        sigmas = np.asarray(self.sigmas, dtype=np.float64).reshape(-1)
        weights = np.asarray(self.linear_weights, dtype=np.float64).reshape(-1)
        if centers.ndim != 2 or centers.shape[0] < 1:
            raise ShapeError(f"centers must be a non-empty (K, d) array, got {centers.shape}")
        K = centers.shape[0]
        if sigmas.shape != (K,) or weights.shape != (K,):
            raise ShapeError(f"{K} centers but {sigmas.shape[0]} sigmas and {weights.shape[0]} weights")
        if not np.all(sigmas > 0):
            raise ValidationError("every sigma must be > 0")
        arrays = (centers, sigmas, weights, np.float64(self.bias))
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValidationError("RBN has non-finite parameters")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "linear_weights", weights)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self):
        return self.centers.shape[1]

    @property
    def n_units(self):
        return self.centers.shape[0]

    def param_arrays(self):
        return [self.centers, np.log(self.sigmas), self.linear_weights, np.array([self.bias])]

    def param_names(self):
        return ["centers", "log_sigmas", "linear_weights", "bias"]

    def with_arrays(self, arrays, norm=...):
        centers, log_sigmas, weights, bias = arrays
        return RbnModel(centers, np.exp(log_sigmas), weights, float(np.asarray(bias).reshape(-1)[0]),
                        self.norm if norm is ... else norm)


def init_rbn(dim, n_units, rng=None, sigma=1.0, norm=None) -> RbnModel:
    """Centres uniform in the unit cube, equal widths, small random read-out."""
    rng = np.random.default_rng(rng)
    centers = rng.random((n_units, dim))
    bound = 1.0 / np.sqrt(n_units)
    weights = rng.uniform(-bound, bound, size=n_units)
    return RbnModel(centers, np.full(n_units, float(sigma)), weights, 0.0, norm)


def rbn_forward_batch(model: RbnModel, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.dim:
        raise ShapeError(f"inputs have {X.shape[1]} columns, model has dimension {model.dim}")
    sq = ((X[:, None, :] - model.centers[None, :, :]) ** 2).sum(axis=2)
    return model.bias + np.exp(-sq / (2.0 * model.sigmas**2)) @ model.linear_weights


def rbn_forward(model: RbnModel, x):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.dim:
        raise ShapeError(f"input has length {x.shape[0]}, model has dimension {model.dim}")
    return float(rbn_forward_batch(model, x[None, :])[0])


# --- generic helpers ------------------------------------------------------

_BATCH_FORWARD = {"tnn": tnn_forward_batch, "ffn": ffn_forward_batch, "rbn": rbn_forward_batch}


def predict(model, X):
    """Normalized-coordinate predictions for any model kind."""
    return _BATCH_FORWARD[model.kind](model, X)


def to_vector(model):
    """Concatenate the trainable arrays of ``model`` in canonical order."""
    return np.concatenate([np.ravel(a) for a in model.param_arrays()])


def param_shapes(model):
    return [np.shape(a) for a in model.param_arrays()]


def split_vector(theta, shapes):
    """Views into ``theta`` with the given shapes (no copy)."""
    out, pos = [], 0
    for shape in shapes:
        size = int(np.prod(shape, dtype=np.int64))
        out.append(theta[pos:pos + size].reshape(shape))
        pos += size
    if pos != theta.shape[0]:
        raise ShapeError(f"vector has {theta.shape[0]} entries, layout needs {pos}")
    return out


def from_vector(template, theta, norm=...):
    """A new model shaped like ``template`` holding a copy of ``theta``."""
    theta = np.array(theta, dtype=np.float64, copy=True)
    return template.with_arrays(split_vector(theta, param_shapes(template)), norm=norm)


def n_params(model):
    return sum(int(np.size(a)) for a in model.param_arrays())
