import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import constant_subnet, constant_tnn
from tennet.core import (FfnModel, MlpArch, MlpParams, from_vector, init_ffn, init_mlp, init_rbn, init_tnn,
                         mlp_forward, mlp_forward_batch, predict, to_vector)
from tennet.diff import loss_param_gradient, mlp_jets, subnetwork_jet
from tennet.errors import ShapeError, ValidationError


def fd_loss_gradient(model, X, y, h=1e-6):
    theta = to_vector(model)
    g = np.empty_like(theta)
    for k in range(theta.shape[0]):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        ep = np.mean((predict(from_vector(model, tp), X) - y) ** 2)
        em = np.mean((predict(from_vector(model, tm), X) - y) ** 2)
        g[k] = (ep - em) / (2 * h)
    return g


def _models():
    return {
        "tnn": init_tnn(3, (4, 4), 3, np.random.default_rng(0)),
        "ffn": init_ffn(3, (6, 5), np.random.default_rng(1)),
        "rbn": init_rbn(3, 6, np.random.default_rng(2), sigma=0.6),
    }


class TestSubnetworkJet:
    def test_tanh_net_at_zero(self):
        arch = MlpArch(1, (1,), 1)
        params = MlpParams((np.ones((1, 1)), np.ones((1, 1))), (np.zeros(1), np.zeros(1)))
        (jet,) = subnetwork_jet(arch, params, 0.0)
        assert (jet.value, jet.d1, jet.d2) == (0.0, 1.0, 0.0)

    def test_constant_net(self):
        arch, params = constant_subnet([1.7, -2.0], hidden=(3, 3))
        jets = subnetwork_jet(arch, params, 0.42)
        assert [(j.value, j.d1, j.d2) for j in jets] == [(1.7, 0.0, 0.0), (-2.0, 0.0, 0.0)]

    def test_against_finite_differences(self):
        arch = MlpArch(1, (8, 8, 8), 5)
        params = init_mlp(arch, 31)
        x = 0.3
        jets = subnetwork_jet(arch, params, x)
        f = lambda t: mlp_forward(arch, params, [t])
        h1, h2 = 1e-5, 1e-4
        d1 = (f(x + h1) - f(x - h1)) / (2 * h1)
        d2 = (f(x + h2) - 2 * f(x) + f(x - h2)) / h2**2
        for j, jet in enumerate(jets):
            assert abs(jet.d1 - d1[j]) / max(1.0, abs(d1[j])) < 1e-6
            assert abs(jet.d2 - d2[j]) / max(1.0, abs(d2[j])) < 1e-4

    def test_value_channel_equals_forward(self):
        arch = MlpArch(1, (5, 5, 5), 5)
        params = init_mlp(arch, 4)
        xs = np.linspace(-1, 2, 17)
        v, _, _ = mlp_jets(params, xs)
        np.testing.assert_array_equal(v, mlp_forward_batch(params, xs[:, None]))

    def test_multi_input_network_rejected(self):
        arch = MlpArch(2, (3,), 1)
        with pytest.raises(ShapeError):
            subnetwork_jet(arch, init_mlp(arch, 0), 0.1)

    def test_closed_form_single_neuron(self):
        # phi(x) = v tanh(w x + b) + c
        w, b, v, c = 1.3, -0.2, 0.8, 0.1
        arch = MlpArch(1, (1,), 1)
        params = MlpParams((np.array([[w]]), np.array([[v]])), (np.array([b]), np.array([c])))
        x = 0.45
        t = math.tanh(w * x + b)
        (jet,) = subnetwork_jet(arch, params, x)
        assert jet.value == pytest.approx(v * t + c, abs=1e-15)
        assert jet.d1 == pytest.approx(v * w * (1 - t * t), abs=1e-15)
        assert jet.d2 == pytest.approx(-2 * v * w * w * t * (1 - t * t), abs=1e-15)


class TestLossParamGradient:
    def test_zero_residual_gives_zero_gradient(self):
        model = constant_tnn([[2.0], [1.5]])
        X = np.random.default_rng(0).random((5, 2))
        g = loss_param_gradient(model, X, np.full(5, 3.0))
        assert g.loss == 0.0
        assert np.all(g.flat == 0.0)

    def test_single_output_bias_by_hand(self):
        # only nonzero parameter: output bias c of a 1-D FFN; E = (c - y)^2
        arch = MlpArch(1, (3,), 1)
        ws = tuple(np.zeros(s) for s in arch.layer_shapes())
        model = FfnModel(arch, MlpParams(ws, (np.zeros(3), np.array([0.7]))))
        g = loss_param_gradient(model, [([0.2], -0.1)])
        assert g["b2"][0] == pytest.approx(2 * (0.7 + 0.1), abs=1e-15)
        assert np.count_nonzero(g.flat) == 1

    @pytest.mark.parametrize("kind", ["tnn", "ffn", "rbn"])
    def test_against_finite_differences(self, kind):
        model = _models()[kind]
        rng = np.random.default_rng(9)
        X, y = rng.random((8, 3)), rng.normal(size=8) * 0.1
        g = loss_param_gradient(model, X, y)
        fd = fd_loss_gradient(model, X, y)
        err = np.abs(g.flat - fd) / np.maximum(1.0, np.abs(g.flat))
        assert err.max() < 1e-5

    @pytest.mark.parametrize("kind", ["tnn", "ffn", "rbn"])
    def test_linear_in_residual(self, kind):
        model = _models()[kind]
        X = np.random.default_rng(3).random((6, 3))
        psi = predict(model, X)
        r = np.random.default_rng(4).normal(size=6)
        g1 = loss_param_gradient(model, X, psi - r).flat
        g2 = loss_param_gradient(model, X, psi - 2 * r).flat
        np.testing.assert_allclose(g2, 2 * g1, rtol=0, atol=1e-10)

    def test_empty_batch(self):
        with pytest.raises(ValidationError):
            loss_param_gradient(_models()["tnn"], [])

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            loss_param_gradient(_models()["tnn"], np.zeros((2, 4)), np.zeros(2))

    def test_pairs_and_arrays_agree(self):
        model = _models()["tnn"]
        X = np.random.default_rng(5).random((4, 3))
        y = np.arange(4.0) / 10
        a = loss_param_gradient(model, X, y)
        b = loss_param_gradient(model, list(zip(X, y)))
        np.testing.assert_array_equal(a.flat, b.flat)

    def test_blocks_mirror_subnetworks(self):
        model = _models()["tnn"]
        g = loss_param_gradient(model, np.random.default_rng(0).random((3, 3)), np.zeros(3))
        blocks = g.blocks()
        assert len(blocks) == model.dim
        for blk, (arch, p) in zip(blocks, model.subnetworks):
            assert [w.shape for w in blk.weights] == [w.shape for w in p.weights]
            assert [b.shape for b in blk.biases] == [b.shape for b in p.biases]


class TestGradientProperty:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31 - 1))
    def test_tnn_finite_difference(self, dim, rank, seed):
        model = init_tnn(dim, (3, 3), rank, np.random.default_rng(seed))
        rng = np.random.default_rng(seed + 7)
        X, y = rng.random((5, dim)), rng.normal(size=5)
        g = loss_param_gradient(model, X, y).flat
        fd = fd_loss_gradient(model, X, y)
        assert (np.abs(g - fd) / np.maximum(1.0, np.abs(g))).max() < 1e-5
