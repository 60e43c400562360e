"""Pure numpy implementation of the training kernels.

Mirrors the API of the compiled ``_kernels`` extension exactly; selected
automatically when the extension is missing or ``TENNET_BACKEND=python``.

Parameter and gradient arrays are passed in as views into flat vectors and
are read (or written) in place on every call, so an optimizer can update
the parameter vector between calls without rebuilding a workspace.
"""
import numpy as np

BACKEND = "python"


class MlpWorkspace:
    """Preallocated forward/backward buffers for one MLP on a fixed batch."""

    def __init__(self, weights, biases, gweights, gbiases, X):
        self.weights = list(weights)
        self.biases = list(biases)
        self.gweights = None if gweights is None else list(gweights)
        self.gbiases = None if gbiases is None else list(gbiases)
        X = np.ascontiguousarray(X, dtype=np.float64)
        n = X.shape[0]
        self.n_layers = len(self.weights)
        self.acts = [X] + [np.empty((n, W.shape[0])) for W in self.weights]
        # gbufs[l] holds dE/d acts[l]; the last one is filled by the caller
        self.gbufs = [None] + [np.empty((n, W.shape[0])) for W in self.weights]
        self.output_grad = self.gbufs[-1]

    def forward(self):
        last = self.n_layers - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            out = self.acts[l + 1]
            np.matmul(self.acts[l], W.T, out=out)
            out += b
            if l < last:
                np.tanh(out, out=out)
        return self.acts[-1]

    def backward(self):
        if self.gweights is None:
            raise RuntimeError("workspace was built without gradient buffers")
        last = self.n_layers - 1
        for l in range(last, -1, -1):
            g = self.gbufs[l + 1]
            if l < last:
                a = self.acts[l + 1]
                g *= 1.0 - a * a
            np.matmul(g.T, self.acts[l], out=self.gweights[l])
            np.sum(g, axis=0, out=self.gbiases[l])
            if l > 0:
                np.matmul(g, self.weights[l], out=self.gbufs[l])


class TnnWorkspace:
    """Fused forward, product/sum combination and backward pass of a TNN.

    ``subnets`` is a sequence of ``(weights, biases, gweights, gbiases)``;
    the gradient entries may be ``None`` for an evaluation-only workspace.
    """

    def __init__(self, subnets, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64).reshape(-1)
        self.n = X.shape[0]
        self.subs = [
            MlpWorkspace(w, b, gw, gb, np.ascontiguousarray(X[:, i:i + 1]))
            for i, (w, b, gw, gb) in enumerate(subnets)
        ]
        self.psi = np.empty(self.n)

    def _outputs(self):
        return [s.forward() for s in self.subs]

    def predict(self):
        outs = self._outputs()
        prod = outs[0].copy()
        for o in outs[1:]:
            prod *= o
        np.sum(prod, axis=1, out=self.psi)
        return self.psi

    def sse(self):
        r = self.predict() - self.y
        return float(r @ r)

    def loss_grad(self):
        """Return the sum of squared residuals; write d(MSE)/d(theta) in place."""
        outs = self._outputs()
        d = len(outs)
        prefix = [None] * (d + 1)
        prefix[0] = np.ones_like(outs[0])
        for i in range(d):
            prefix[i + 1] = prefix[i] * outs[i]
        np.sum(prefix[d], axis=1, out=self.psi)
        r = self.psi - self.y
        sse = float(r @ r)
        scaled = (2.0 / self.n) * r[:, None]
        suffix = np.ones_like(outs[0])
        for i in range(d - 1, -1, -1):
            np.multiply(prefix[i], suffix, out=self.subs[i].output_grad)
            self.subs[i].output_grad *= scaled
            suffix *= outs[i]
        for s in self.subs:
            s.backward()
        return sse


def adam_update(theta, grad, m, v, lr, beta1, beta2, eps, t):
    """In-place bias-corrected Adam step number ``t`` (1-based)."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    theta -= lr * mhat / (np.sqrt(vhat) + eps)
