"""Input jets and parameter gradients.

Input derivatives of a subnetwork are obtained by pushing a second-order
jet ``(u, u', u'')`` through the layers. Parameter gradients of the mean
squared error are computed by hand-written reverse passes; the TNN and FFN
passes run on the kernels selected in :mod:`tennet.kernels`.

Batch gradients are sums over samples. Summation order differs between the
compiled and numpy kernels, so results agree to rounding, not bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as _kernels
from .core import MlpArch, MlpParams, param_shapes, split_vector, to_vector
from .errors import ShapeError, ValidationError


@dataclass(frozen=True)
class Jet2:
    value: float
    d1: float
    d2: float


def mlp_jets(params: MlpParams, xs):
    """Value, first and second derivative of a scalar-input MLP at each of ``xs``.

    Returns three ``(len(xs), p)`` arrays.
    """
    if params.weights[0].shape[1] != 1:
        raise ShapeError("jets need a network with a single scalar input")
    u = np.asarray(xs, dtype=np.float64).reshape(-1, 1)
    du = np.ones_like(u)
    ddu = np.zeros_like(u)
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        # value channel uses exactly the operations of mlp_forward_batch
        z = u @ W.T + b
        dz = du @ W.T
        ddz = ddu @ W.T
        if l < last:
            u = np.tanh(z)
            t1 = 1.0 - u * u
            du = t1 * dz
            ddu = t1 * ddz - 2.0 * u * t1 * dz * dz
        else:
            u, du, ddu = z, dz, ddz
    return u, du, ddu


def subnetwork_jet(arch: MlpArch, params: MlpParams, x):
    """Jets of every output component of a scalar-input subnetwork at ``x``."""
    if arch.input_width != 1:
        raise ShapeError(f"subnetwork has input width {arch.input_width}; jets need 1")
    params.check(arch)
    v, d1, d2 = mlp_jets(params, [float(x)])
    return [Jet2(float(a), float(b), float(c)) for a, b, c in zip(v[0], d1[0], d2[0])]


# --- parameter gradients --------------------------------------------------


@dataclass(frozen=True)
class ParamGradient:
    """Gradient of the loss laid out like the model's trainable arrays."""

    names: tuple
    shapes: tuple
    flat: np.ndarray
    loss: float

    @property
    def arrays(self):
        return split_vector(self.flat, self.shapes)

    def __getitem__(self, name):
        return self.arrays[self.names.index(name)]

    def blocks(self):
        """Per-network ``MlpParams`` gradients (one per TNN subnetwork, one for an FFN)."""
        arrays = self.arrays
        groups = {}
        for name, arr in zip(self.names, arrays):
            prefix, _, leaf = name.rpartition(".")
            groups.setdefault(prefix, []).append((leaf, arr))
        out = []
        for items in groups.values():
            ws = tuple(a for leaf, a in items if leaf.startswith("W"))
            bs = tuple(a for leaf, a in items if leaf.startswith("b") and leaf[1:].isdigit())
            if not ws:
                raise ValidationError("model has no layered parameters")
            out.append(MlpParams(ws, bs))
        return out


class _Objective:
    """Mean squared error of a model on a fixed batch, as a function of a flat vector.

    ``theta`` may be shared with other objectives (e.g. a validation one);
    every call reads its current contents.
    """

    def __init__(self, model, X, y, theta=None, with_grad=True, kernels=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if X.shape[0] == 0:
            raise ValidationError("empty batch")
        if X.shape[0] != y.shape[0]:
            raise ShapeError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
        if X.shape[1] != model.dim:
            raise ShapeError(f"inputs have {X.shape[1]} columns, model has dimension {model.dim}")
        self.model = model
        self.n = X.shape[0]
        self.shapes = tuple(param_shapes(model))
        self.theta = to_vector(model) if theta is None else theta
        self.grad = np.zeros_like(self.theta) if with_grad else None
        self.kernels = kernels or _kernels
        self._build(X, y)

    def _views(self):
        p = split_vector(self.theta, self.shapes)
        g = split_vector(self.grad, self.shapes) if self.grad is not None else [None] * len(p)
        return p, g


class TnnObjective(_Objective):
    def _build(self, X, y):
        p, g = self._views()
        subnets, pos = [], 0
        for arch, _ in self.model.subnetworks:
            k = 2 * (arch.depth + 1)
            ps, gs = p[pos:pos + k], g[pos:pos + k]
            subnets.append((ps[0::2], ps[1::2],
                            None if self.grad is None else gs[0::2],
                            None if self.grad is None else gs[1::2]))
            pos += k
        self.ws = self.kernels.TnnWorkspace(subnets, X, y)

    def loss(self):
        return self.ws.sse() / self.n

    def loss_grad(self):
        return self.ws.loss_grad() / self.n

    def predict(self):
        return np.array(self.ws.predict())


class FfnObjective(_Objective):
    def _build(self, X, y):
        p, g = self._views()
        self.y = y
        self.ws = self.kernels.MlpWorkspace(
            p[0::2], p[1::2],
            None if self.grad is None else g[0::2],
            None if self.grad is None else g[1::2],
            X,
        )

    def predict(self):
        return np.array(self.ws.forward()[:, 0])

    def loss(self):
        r = self.ws.forward()[:, 0] - self.y
        return float(r @ r) / self.n

    def loss_grad(self):
        r = self.ws.forward()[:, 0] - self.y
        self.ws.output_grad[:, 0] = (2.0 / self.n) * r
        self.ws.backward()
        return float(r @ r) / self.n


class RbnObjective(_Objective):
    """Numpy-only: the RBN has a single hidden layer and no kernel."""

    def _build(self, X, y):
        self.X = X
        self.y = y
        self.x_sq = (X * X).sum(axis=1)

    def _forward(self):
        C, log_s, w, b = split_vector(self.theta, self.shapes)
        sq = self.x_sq[:, None] + (C * C).sum(axis=1)[None, :] - 2.0 * (self.X @ C.T)
        np.maximum(sq, 0.0, out=sq)
        inv2s2 = 0.5 * np.exp(-2.0 * log_s)
        phi = np.exp(-sq * inv2s2)
        return C, w, b, sq, inv2s2, phi, phi @ w + b[0]

    def predict(self):
        return self._forward()[-1]

    def loss(self):
        r = self._forward()[-1] - self.y
        return float(r @ r) / self.n

    def loss_grad(self):
        C, w, b, sq, inv2s2, phi, out = self._forward()
        r = out - self.y
        dr = (2.0 / self.n) * r
        gC, glog_s, gw, gb = split_vector(self.grad, self.shapes)
        gw[:] = phi.T @ dr
        gb[0] = dr.sum()
        dphi = dr[:, None] * w[None, :] * phi
        # d phi / d sq = -phi / (2 s^2) ; d phi / d log s = phi * sq / s^2
        dsq = -dphi * inv2s2
        glog_s[:] = (dphi * sq).sum(axis=0) * (2.0 * inv2s2)
        gC[:] = -2.0 * (dsq.T @ self.X - dsq.sum(axis=0)[:, None] * C)
        return float(r @ r) / self.n


_OBJECTIVES = {"tnn": TnnObjective, "ffn": FfnObjective, "rbn": RbnObjective}


def make_objective(model, X, y, theta=None, with_grad=True, kernels=None):
    return _OBJECTIVES[model.kind](model, X, y, theta=theta, with_grad=with_grad, kernels=kernels)


def loss_param_gradient(model, X, y=None, kernels=None) -> ParamGradient:
    """Gradient of ``E = mean((model(x_k) - y_k)^2)`` with respect to every parameter.

    ``X, y`` are arrays; alternatively pass a single sequence of ``(x, y)``
    pairs as ``X``.
    """
    if y is None:
        pairs = list(X)
        if not pairs:
            raise ValidationError("empty batch")
        X = np.array([np.atleast_1d(np.asarray(x, dtype=np.float64)) for x, _ in pairs])
        y = np.array([float(t) for _, t in pairs])
    obj = make_objective(model, X, y, kernels=kernels)
    loss = obj.loss_grad()
    return ParamGradient(tuple(model.param_names()), obj.shapes, obj.grad.copy(), loss)
