"""Test doubles and builders shared across the suite."""
import numpy as np

from tennet.core import MlpArch, MlpParams, TnnModel


class Poly:
    """Polynomial factor with its first two derivatives."""

    def __init__(self, *coef):
        self.p = np.polynomial.Polynomial(coef)

    def __call__(self, x):
        return self.p(np.asarray(x, dtype=np.float64))

    def d1(self, x):
        return self.p.deriv(1)(np.asarray(x, dtype=np.float64))

    def d2(self, x):
        return self.p.deriv(2)(np.asarray(x, dtype=np.float64))


class FactorHarness:
    """Stand-in for a TNN whose factors phi_ij are analytic polynomials.

    ``factors[i][j]`` is the factor of dimension ``i`` and rank index ``j``.
    """

    kind = "tnn"

    def __init__(self, factors, norm=None):
        self.factors = [list(row) for row in factors]
        self.norm = norm

    @property
    def dim(self):
        return len(self.factors)

    @property
    def rank(self):
        return len(self.factors[0])

    def factor_values(self, i, xs):
        xs = np.asarray(xs, dtype=np.float64).reshape(-1)
        return np.stack([f(xs) for f in self.factors[i]], axis=1)

    def factor_jets(self, i, xs):
        xs = np.asarray(xs, dtype=np.float64).reshape(-1)
        fs = self.factors[i]
        return (np.stack([f(xs) for f in fs], axis=1),
                np.stack([f.d1(xs) for f in fs], axis=1),
                np.stack([f.d2(xs) for f in fs], axis=1))

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        total = np.ones((X.shape[0], self.rank))
        for i in range(self.dim):
            total *= self.factor_values(i, X[:, i])
        return total.sum(axis=1)


def constant_subnet(values, hidden=(2,)):
    """Subnetwork with zero weights whose output bias is ``values``."""
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    arch = MlpArch(1, hidden, values.shape[0])
    ws = tuple(np.zeros(s) for s in arch.layer_shapes())
    bs = tuple(np.zeros(m) for m, _ in arch.layer_shapes()[:-1]) + (values.copy(),)
    return arch, MlpParams(ws, bs)


def constant_tnn(per_dim_values, norm=None):
    return TnnModel(tuple(constant_subnet(v) for v in per_dim_values), norm)
