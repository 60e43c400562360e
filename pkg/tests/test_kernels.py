import os
import subprocess
import sys

import numpy as np
import pytest

from tennet import _kernels_py, kernels
from tennet.core import init_ffn, init_rbn, init_tnn
from tennet.data import Dataset
from tennet.diff import make_objective
from tennet.training import TrainingConfig, train

compiled = pytest.importorskip("tennet._kernels")
BACKENDS = [_kernels_py, compiled]


def _problem(seed=0, n=37, dim=3):
    rng = np.random.default_rng(seed)
    X = rng.random((n, dim))
    return X, np.sin(2 * X[:, 0]) * X[:, 1:].sum(axis=1)


class TestParity:
    @pytest.mark.parametrize("hidden, rank", [((4,), 1), ((5, 5, 5), 3), ((7, 3), 6)])
    def test_tnn_loss_and_gradient(self, hidden, rank):
        X, y = _problem()
        model = init_tnn(3, hidden, rank, np.random.default_rng(1))
        res = []
        for k in BACKENDS:
            obj = make_objective(model, X, y, kernels=k)
            loss = obj.loss_grad()
            res.append((loss, obj.grad.copy(), obj.predict(), obj.loss()))
        (l0, g0, p0, v0), (l1, g1, p1, v1) = res
        assert l1 == pytest.approx(l0, rel=1e-13)
        assert v1 == pytest.approx(v0, rel=1e-13)
        np.testing.assert_allclose(g1, g0, rtol=1e-11, atol=1e-14)
        np.testing.assert_allclose(p1, p0, rtol=1e-13, atol=1e-15)

    def test_ffn_loss_and_gradient(self):
        X, y = _problem(2)
        model = init_ffn(3, (6, 5, 4), np.random.default_rng(3))
        res = []
        for k in BACKENDS:
            obj = make_objective(model, X, y, kernels=k)
            res.append((obj.loss_grad(), obj.grad.copy()))
        assert res[1][0] == pytest.approx(res[0][0], rel=1e-13)
        np.testing.assert_allclose(res[1][1], res[0][1], rtol=1e-11, atol=1e-14)

    def test_rbn_ignores_backend(self):
        X, y = _problem(4)
        model = init_rbn(3, 5, np.random.default_rng(5))
        grads = []
        for k in BACKENDS:
            obj = make_objective(model, X, y, kernels=k)
            obj.loss_grad()
            grads.append(obj.grad.copy())
        np.testing.assert_array_equal(grads[0], grads[1])

    def test_adam_update(self):
        rng = np.random.default_rng(6)
        state = [rng.normal(size=50) for _ in range(2)] + [np.zeros(50), np.zeros(50)]
        copies = [[a.copy() for a in state] for _ in BACKENDS]
        for t in range(1, 4):
            g = rng.normal(size=50)
            for k, (theta, _, m, v) in zip(BACKENDS, copies):
                k.adam_update(theta, g, m, v, 1e-3, 0.9, 0.999, 1e-8, t)
        for a, b in zip(copies[0], copies[1]):
            np.testing.assert_allclose(b, a, rtol=1e-14, atol=1e-18)

    def test_training_runs_agree(self):
        X, y = _problem(7, n=40, dim=2)
        ds = Dataset(X, y)
        cfg = TrainingConfig(max_epochs=100)
        hists = [train(init_tnn(2, (4, 4), 3, np.random.default_rng(8)), ds, cfg, kernels=k)[1] for k in BACKENDS]
        np.testing.assert_allclose(hists[1].train_mse, hists[0].train_mse, rtol=1e-9)


class TestCompiledWorkspace:
    def test_rejects_non_contiguous_parameters(self):
        W = np.ones((3, 4))[:, ::2]
        with pytest.raises(ValueError):
            compiled.MlpWorkspace([W], [np.zeros(3)], None, None, np.zeros((5, 2)))

    def test_forward_only_workspace_has_no_backward(self):
        X, y = _problem()
        model = init_tnn(3, (3,), 2, np.random.default_rng(0))
        obj = make_objective(model, X, y, with_grad=False, kernels=compiled)
        with pytest.raises(RuntimeError):
            obj.ws.loss_grad()

    def test_repeatable_across_fresh_workspaces(self):
        X, y = _problem(9, n=4)
        model = init_tnn(3, (4,), 2, np.random.default_rng(1))
        losses = {make_objective(model, X, y, with_grad=False, kernels=compiled).loss() for _ in range(200)}
        assert len(losses) == 1


class TestBackendSelection:
    def test_explicit_names(self):
        assert kernels.load_backend("python") is _kernels_py
        assert kernels.load_backend("cython") is compiled

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            kernels.load_backend("fortran")

    @pytest.mark.parametrize("name", ["python", "cython"])
    def test_environment_variable(self, name):
        env = dict(os.environ, TENNET_BACKEND=name)
        out = subprocess.run([sys.executable, "-c", "from tennet import kernels; print(kernels.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == name
