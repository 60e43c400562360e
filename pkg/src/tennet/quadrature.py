"""Gauss-Legendre rules and factorized integration of TNN models.

A TNN is a sum of products of univariate factors, so its integral over a
box ``Omega_1 x ... x Omega_d`` is a sum of products of one-dimensional
integrals::

    int Psi   = sum_j   prod_i ( sum_n w_i^n phi_ij(x_i^n) )
    int Psi^2 = sum_jk  prod_i ( sum_n w_i^n phi_ij(x_i^n) phi_ik(x_i^n) )

The cost is linear in the dimension; the tensor grid is never formed.

Any object with ``dim``, ``rank`` and ``factor_values(i, xs) -> (len(xs), rank)``
can be integrated, not only :class:`~tennet.core.TnnModel`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeightError, ShapeError, ValidationError

DEFAULT_NODES = 16
_NEWTON_TOL = 1e-14
_NEWTON_MAXITER = 100
_DEGENERATE = 1e-300


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValidationError(f"invalid interval [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self):
        return self.hi - self.lo


def _interval(x):
    return x if isinstance(x, Interval) else Interval(*x)


def _legendre_with_derivative(n, x):
    """P_n(x) and P_n'(x) by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for j in range(1, n):
        p_prev, p = p, ((2 * j + 1) * x * p - j * p_prev) / (j + 1)
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre_rule(n, interval=Interval(-1.0, 1.0)):
    """Nodes and weights of the ``n``-point Gauss-Legendre rule on ``interval``.

    Roots of ``P_n`` are found by Newton's method from the starting guesses
    ``cos(pi (k - 1/4) / (n + 1/2))``. The rule integrates polynomials of
    degree ``<= 2n - 1`` exactly.
    """
    if int(n) != n or n < 1:
        raise ValidationError(f"number of nodes must be a positive integer, got {n!r}")
    n = int(n)
    interval = _interval(interval)
    k = np.arange(1, n + 1, dtype=np.float64)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    if n == 1:
        x = np.zeros(1)
    for _ in range(_NEWTON_MAXITER):
        p, dp = _legendre_with_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    _, dp = _legendre_with_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    half = 0.5 * interval.length
    mid = 0.5 * (interval.lo + interval.hi)
    return mid + half * x, half * w


@dataclass(frozen=True)
class QuadratureRule:
    """One Gauss-Legendre rule per dimension; the tensor grid stays implicit."""

    intervals: tuple
    nodes: tuple
    weights: tuple

    @property
    def dim(self):
        return len(self.intervals)

    @property
    def counts(self):
        return tuple(len(x) for x in self.nodes)

    @property
    def volume(self):
        return float(np.prod([iv.length for iv in self.intervals]))


def build_rule(domain, counts=DEFAULT_NODES) -> QuadratureRule:
    """Per-dimension rules for the box ``domain`` (a list of intervals)."""
    intervals = tuple(_interval(iv) for iv in domain)
    if isinstance(counts, (int, np.integer)):
        counts = [int(counts)] * len(intervals)
    counts = list(counts)
    if len(counts) != len(intervals):
        raise ShapeError(f"{len(counts)} node counts for {len(intervals)} intervals")
    rules = [gauss_legendre_rule(c, iv) for c, iv in zip(counts, intervals)]
    return QuadratureRule(intervals, tuple(r[0] for r in rules), tuple(r[1] for r in rules))


def unit_cube_rule(dim, counts=DEFAULT_NODES) -> QuadratureRule:
    return build_rule([Interval(0.0, 1.0)] * dim, counts)


# --- weight functions ----------------------------------------------------


@dataclass(frozen=True)
class Flat:
    """Constant 1 on the whole interval."""

    def density(self, x):
        return np.ones_like(np.asarray(x, dtype=np.float64))

    def support(self, interval):
        return interval


@dataclass(frozen=True)
class Uniform:
    """Indicator of ``[a, b]`` (intersected with the integration interval)."""

    a: float
    b: float

    def __post_init__(self):
        if not float(self.a) < float(self.b):
            raise ValidationError(f"uniform weight needs a < b, got ({self.a}, {self.b})")

    def density(self, x):
        x = np.asarray(x, dtype=np.float64)
        return ((x >= self.a) & (x <= self.b)).astype(np.float64)

    def support(self, interval):
        lo, hi = max(interval.lo, float(self.a)), min(interval.hi, float(self.b))
        return Interval(lo, hi) if lo < hi else None


@dataclass(frozen=True)
class GaussianTruncated:
    """``exp(-(x - mu)^2 / (2 sigma^2))`` restricted to the interval."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not float(self.sigma) > 0:
            raise ValidationError(f"gaussian weight needs sigma > 0, got {self.sigma}")

    def density(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.exp(-((x - self.mu) ** 2) / (2.0 * self.sigma**2))

    def support(self, interval):
        return interval


@dataclass(frozen=True)
class WeightFunctionSpec:
    """Product weight ``rho(x) = prod_i rho_i(x_i)``."""

    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def dim(self):
        return len(self.factors)

    @classmethod
    def flat(cls, dim):
        return cls((Flat(),) * dim)


def weighted_rule(rule: QuadratureRule, rho: WeightFunctionSpec):
    """Fold ``rho`` into the node weights of ``rule``.

    A uniform factor moves that dimension's nodes onto its support so the
    indicator is integrated exactly; other factors are evaluated at the
    existing nodes. A factor whose support misses the interval gets an
    empty rule.
    """
    if rho.dim != rule.dim:
        raise ShapeError(f"weight function has {rho.dim} factors, rule has {rule.dim} dimensions")
    nodes, weights = [], []
    for iv, x, w, factor in zip(rule.intervals, rule.nodes, rule.weights, rho.factors):
        sub = factor.support(iv)
        if sub is None:
            nodes.append(np.zeros(0))
            weights.append(np.zeros(0))
            continue
        if sub != iv:
            x, w = gauss_legendre_rule(len(x), sub)
        nodes.append(x)
        weights.append(w * factor.density(x))
    return tuple(nodes), tuple(weights)


# --- factorized integrals -------------------------------------------------


def _check_dims(model, rule):
    if rule.dim != model.dim:
        raise ShapeError(f"rule has {rule.dim} dimensions, model has {model.dim}")


def _first_moments(model, nodes, weights):
    # (d, p): row i holds sum_n w_i^n phi_ij(x_i^n)
    return np.array([weights[i] @ model.factor_values(i, nodes[i]) if len(nodes[i])
                     else np.zeros(model.rank) for i in range(model.dim)])


def _second_moments(model, nodes, weights):
    # (d, p, p): G_i[j, k] = sum_n w_i^n phi_ij phi_ik
    out = np.zeros((model.dim, model.rank, model.rank))
    for i in range(model.dim):
        if len(nodes[i]):
            phi = model.factor_values(i, nodes[i])
            out[i] = phi.T @ (weights[i][:, None] * phi)
    return out


def integrate_tnn(model, rule: QuadratureRule) -> float:
    """Factorized quadrature of ``Psi`` over the rule's box."""
    _check_dims(model, rule)
    return float(np.prod(_first_moments(model, rule.nodes, rule.weights), axis=0).sum())


def integrate_tnn_squared(model, rule: QuadratureRule) -> float:
    """Factorized quadrature of ``Psi^2`` over the rule's box."""
    _check_dims(model, rule)
    return float(np.prod(_second_moments(model, rule.nodes, rule.weights), axis=0).sum())


def _weight_mass(weights):
    return float(np.prod([w.sum() for w in weights]))


def _denominator(weights):
    mass = _weight_mass(weights)
    if not mass > _DEGENERATE:
        raise DegenerateWeightError(f"weight function integrates to {mass:g} on the domain")
    return mass


def predict_mean(model, rule: QuadratureRule, rho: WeightFunctionSpec) -> float:
    """``int Psi rho / int rho``: the rho-weighted mean of the model."""
    _check_dims(model, rule)
    nodes, weights = weighted_rule(rule, rho)
    den = _denominator(weights)
    return float(np.prod(_first_moments(model, nodes, weights), axis=0).sum()) / den


def predict_square_mean(model, rule: QuadratureRule, rho: WeightFunctionSpec) -> float:
    """``int Psi^2 rho / int rho``."""
    _check_dims(model, rule)
    nodes, weights = weighted_rule(rule, rho)
    den = _denominator(weights)
    return float(np.prod(_second_moments(model, nodes, weights), axis=0).sum()) / den


# --- integrals in raw units -----------------------------------------------


@dataclass(frozen=True)
class RawIntegrals:
    """Integrals of the denormalized model ``Y(X) = s Psi(x(X)) + mean`` over a raw box."""

    integral: float
    integral_sq: float
    volume: float
    # the same quantities for Psi over the normalized image of the box
    psi_integral: float = math.nan
    psi_integral_sq: float = math.nan
    normalized_volume: float = math.nan


def normalized_box(domain, norm):
    """Image of the raw box ``domain`` under the input normalization."""
    domain = [_interval(iv) for iv in domain]
    if len(domain) != norm.dim:
        raise ShapeError(f"domain has {len(domain)} intervals, normalization has {norm.dim}")
    lo = (np.array([iv.lo for iv in domain]) - norm.x_min) / norm.x_range
    hi = (np.array([iv.hi for iv in domain]) - norm.x_min) / norm.x_range
    return [Interval(a, b) for a, b in zip(lo, hi)]


def integrate_raw(model, domain, counts=DEFAULT_NODES) -> RawIntegrals:
    """Integrate the model and its square in raw input/output units.

    With ``x = (X - x_min) / r`` and ``Y = s Psi + mean`` the change of
    variables gives ``int Y dX = J (s int Psi dx) + mean |box|`` where
    ``J = prod r``, and similarly for ``Y^2``.
    """
    norm = model.norm
    if norm is None:
        raise ValidationError("raw-unit integration needs a model with normalization parameters")
    rule = build_rule(normalized_box(domain, norm), counts)
    jac = float(np.prod(norm.x_range))
    volume = float(np.prod([_interval(iv).length for iv in domain]))
    s, mean = norm.y_range, norm.y_mean
    i1 = integrate_tnn(model, rule)
    i2 = integrate_tnn_squared(model, rule)
    return RawIntegrals(
        integral=jac * s * i1 + mean * volume,
        integral_sq=jac * (s * s * i2 + 2.0 * s * mean * i1) + mean * mean * volume,
        volume=volume,
        psi_integral=i1,
        psi_integral_sq=i2,
        normalized_volume=rule.volume,
    )
