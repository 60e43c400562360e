# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernels.

Same API as :mod:`tennet._kernels_py`. Matrix products go through BLAS
``dgemm``; bias, activation and the TNN product/sum combination are fused
into single passes over contiguous buffers.

BLAS is column-major, so a C-ordered ``(rows, cols)`` array is handed to it
as the ``cols x rows`` matrix it is in memory.
"""
import numpy as np

from libc.math cimport sqrt, pow
from libc.stdlib cimport malloc, calloc, free
from scipy.linalg.cython_blas cimport dgemm

cdef extern from *:
    """
    #include <math.h>
    #if defined(TENNET_MVEC_TANH) && defined(__AVX512F__)
    #include <immintrin.h>
    __m512d _ZGVeN8v_tanh(__m512d);
    /* every element goes through the same vector routine, tail included,
       so results do not depend on buffer length or alignment */
    static void tennet_tanh_inplace(double* x, Py_ssize_t n) {
        Py_ssize_t i = 0, k;
        double tail[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
        for (; i + 8 <= n; i += 8)
            _mm512_storeu_pd(x + i, _ZGVeN8v_tanh(_mm512_loadu_pd(x + i)));
        if (i < n) {
            for (k = 0; i + k < n; k++) tail[k] = x[i + k];
            _mm512_storeu_pd(tail, _ZGVeN8v_tanh(_mm512_loadu_pd(tail)));
            for (k = 0; i + k < n; k++) x[i + k] = tail[k];
        }
    }
    #define TENNET_TANH_IMPL "libmvec"
    #else
    static void tennet_tanh_inplace(double* x, Py_ssize_t n) {
        Py_ssize_t i;
        for (i = 0; i < n; i++) x[i] = tanh(x[i]);
    }
    #define TENNET_TANH_IMPL "libm"
    #endif
    """
    void tennet_tanh_inplace(double* x, Py_ssize_t n) noexcept nogil
    const char* TENNET_TANH_IMPL

BACKEND = "cython"
TANH_IMPL = TENNET_TANH_IMPL.decode()


cdef double* _ptr(object arr) except NULL:
    if arr.dtype != np.float64 or not arr.flags.c_contiguous or not arr.flags.writeable:
        raise ValueError("kernel buffers must be writeable, C-contiguous float64 arrays")
    cdef double[::1] mv = arr.reshape(-1)
    return &mv[0]


cdef inline void _gemm(char ta, char tb, int m, int n, int k, double* a, int lda,
                       double* b, int ldb, double beta, double* c, int ldc) noexcept nogil:
    cdef double one = 1.0
    dgemm(&ta, &tb, &m, &n, &k, &one, a, &lda, b, &ldb, &beta, c, &ldc)


cdef class MlpWorkspace:
    """Preallocated forward/backward buffers for one MLP on a fixed batch.

    Activations are stored feature-major, ``(width, n)``: every neuron's
    values over the batch are contiguous. ``forward()`` and
    ``output_grad`` expose ``(n, width)`` transposed views.
    """

    cdef int n
    cdef int n_layers
    cdef int* widths
    cdef double** W
    cdef double** b
    cdef double** gW
    cdef double** gb
    cdef double** acts
    cdef double** gbuf
    cdef bint has_grad
    cdef public object weights, biases, gweights, gbiases, acts_arrays, gbuf_arrays, output_grad

    def __cinit__(self):
        self.widths = NULL
        self.W = NULL
        self.b = NULL
        self.gW = NULL
        self.gb = NULL
        self.acts = NULL
        self.gbuf = NULL

    def __init__(self, weights, biases, gweights, gbiases, X):
        cdef int l
        self.weights = list(weights)
        self.biases = list(biases)
        self.has_grad = gweights is not None
        self.gweights = list(gweights) if self.has_grad else None
        self.gbiases = list(gbiases) if self.has_grad else None
        XT = np.ascontiguousarray(np.asarray(X, dtype=np.float64).T)
        self.n = XT.shape[1]
        L = len(self.weights)
        self.n_layers = L
        self.acts_arrays = [XT] + [np.empty((W.shape[0], self.n)) for W in self.weights]
        self.gbuf_arrays = [None] + [np.empty((W.shape[0], self.n)) for W in self.weights]
        self.output_grad = self.gbuf_arrays[L].T

        self.widths = <int*> malloc((L + 1) * sizeof(int))
        self.W = <double**> calloc(L, sizeof(double*))
        self.b = <double**> calloc(L, sizeof(double*))
        self.gW = <double**> calloc(L, sizeof(double*))
        self.gb = <double**> calloc(L, sizeof(double*))
        self.acts = <double**> calloc(L + 1, sizeof(double*))
        self.gbuf = <double**> calloc(L + 1, sizeof(double*))
        if (self.widths == NULL or self.W == NULL or self.b == NULL or self.gW == NULL
                or self.gb == NULL or self.acts == NULL or self.gbuf == NULL):
            raise MemoryError()

        self.widths[0] = XT.shape[0]
        self.acts[0] = _ptr(XT)
        for l in range(L):
            W = self.weights[l]
            if W.shape[1] != self.widths[l] or self.biases[l].shape[0] != W.shape[0]:
                raise ValueError(f"layer {l + 1} has inconsistent shapes")
            self.widths[l + 1] = W.shape[0]
            self.W[l] = _ptr(W)
            self.b[l] = _ptr(self.biases[l])
            if self.has_grad:
                self.gW[l] = _ptr(self.gweights[l])
                self.gb[l] = _ptr(self.gbiases[l])
            self.acts[l + 1] = _ptr(self.acts_arrays[l + 1])
            self.gbuf[l + 1] = _ptr(self.gbuf_arrays[l + 1])

    def __dealloc__(self):
        free(self.widths)
        free(self.W)
        free(self.b)
        free(self.gW)
        free(self.gb)
        free(self.acts)
        free(self.gbuf)

    cdef double* out_ptr(self) noexcept nogil:
        return self.acts[self.n_layers]

    cdef double* out_grad_ptr(self) noexcept nogil:
        return self.gbuf[self.n_layers]

    cdef void _forward(self) noexcept nogil:
        cdef int l, i, j, k, m
        cdef int n = self.n
        cdef double* a
        cdef double* out
        cdef double* row
        cdef double* W
        cdef double* b
        cdef double bj, wj
        for l in range(self.n_layers):
            k = self.widths[l]
            m = self.widths[l + 1]
            a = self.acts[l]
            out = self.acts[l + 1]
            W = self.W[l]
            b = self.b[l]
            if k == 1:
                for j in range(m):
                    row = out + <Py_ssize_t> j * n
                    bj = b[j]
                    wj = W[j]
                    for i in range(n):
                        row[i] = bj + wj * a[i]
            else:
                for j in range(m):
                    row = out + <Py_ssize_t> j * n
                    bj = b[j]
                    for i in range(n):
                        row[i] = bj
                # out (n x m, col-major) += A (n x k) . W^T (k x m)
                _gemm(b'N', b'N', n, m, k, a, n, W, k, 1.0, out, n)
            if l < self.n_layers - 1:
                tennet_tanh_inplace(out, <Py_ssize_t> n * m)

    cdef void _backward(self) noexcept nogil:
        cdef int l, i, j, k, m
        cdef int n = self.n
        cdef Py_ssize_t t, size
        cdef double* g
        cdef double* a
        cdef double* row
        cdef double* gW
        cdef double* gb
        cdef double s
        for l in range(self.n_layers - 1, -1, -1):
            k = self.widths[l]
            m = self.widths[l + 1]
            g = self.gbuf[l + 1]
            size = <Py_ssize_t> n * m
            if l < self.n_layers - 1:
                a = self.acts[l + 1]
                for t in range(size):
                    g[t] = g[t] * (1.0 - a[t] * a[t])
            gW = self.gW[l]
            gb = self.gb[l]
            a = self.acts[l]
            for j in range(m):
                row = g + <Py_ssize_t> j * n
                s = 0.0
                for i in range(n):
                    s = s + row[i]
                gb[j] = s
            if k == 1:
                for j in range(m):
                    row = g + <Py_ssize_t> j * n
                    s = 0.0
                    for i in range(n):
                        s = s + row[i] * a[i]
                    gW[j] = s
            else:
                # gW^T (k x m) = A^T (k x n) . G (n x m)
                _gemm(b'T', b'N', k, m, n, a, n, g, n, 0.0, gW, k)
            if l > 0:
                # dA (n x k) = G (n x m) . W (m x k)
                _gemm(b'N', b'T', n, k, m, g, n, self.W[l], k, 0.0, self.gbuf[l], n)

    def forward(self):
        with nogil:
            self._forward()
        return self.acts_arrays[self.n_layers].T

    def backward(self):
        if not self.has_grad:
            raise RuntimeError("workspace was built without gradient buffers")
        with nogil:
            self._backward()


cdef class TnnWorkspace:
    """Fused forward, product/sum combination and backward pass of a TNN."""

    cdef int n, d, p
    cdef list subs
    cdef double* pre
    cdef double* suf
    cdef double* res
    cdef double** outs
    cdef double** gouts
    cdef double* yp
    cdef double* psip
    cdef bint has_grad
    cdef public object y, psi

    def __cinit__(self):
        self.pre = NULL
        self.suf = NULL
        self.res = NULL
        self.outs = NULL
        self.gouts = NULL

    def __init__(self, subnets, X, y):
        cdef int i
        cdef MlpWorkspace s
        X = np.asarray(X, dtype=np.float64)
        self.y = np.array(y, dtype=np.float64).reshape(-1)
        self.n = X.shape[0]
        self.subs = []
        grads = []
        for i, (w, b, gw, gb) in enumerate(subnets):
            self.subs.append(MlpWorkspace(w, b, gw, gb, X[:, i:i + 1]))
            grads.append(gw is not None)
        self.d = len(self.subs)
        if self.d < 1 or X.shape[1] != self.d or self.y.shape[0] != self.n:
            raise ValueError("inconsistent TNN workspace shapes")
        self.has_grad = all(grads)
        self.p = (<MlpWorkspace> self.subs[0]).widths[(<MlpWorkspace> self.subs[0]).n_layers]
        for s in self.subs:
            if s.widths[s.n_layers] != self.p:
                raise ValueError("subnetworks disagree on the rank")
        self.psi = np.empty(self.n)
        self.yp = _ptr(self.y)
        self.psip = _ptr(self.psi)
        size = <Py_ssize_t> self.n * self.p
        self.pre = <double*> malloc(self.d * size * sizeof(double))
        self.suf = <double*> malloc(size * sizeof(double))
        self.res = <double*> malloc(self.n * sizeof(double))
        self.outs = <double**> malloc(self.d * sizeof(double*))
        self.gouts = <double**> malloc(self.d * sizeof(double*))
        if self.pre == NULL or self.suf == NULL or self.res == NULL or self.outs == NULL or self.gouts == NULL:
            raise MemoryError()
        for i in range(self.d):
            s = self.subs[i]
            self.outs[i] = s.out_ptr()
            self.gouts[i] = s.out_grad_ptr()

    def __dealloc__(self):
        free(self.pre)
        free(self.suf)
        free(self.res)
        free(self.outs)
        free(self.gouts)

    cdef void _forward_all(self):
        cdef MlpWorkspace s
        for s in self.subs:
            with nogil:
                s._forward()

    cdef double _combine(self, bint want_grad) noexcept nogil:
        # all (p, n) buffers are rank-major: row j holds rank term j over the batch
        cdef int i, k, j
        cdef int n = self.n, p = self.p, d = self.d
        cdef Py_ssize_t t, size = <Py_ssize_t> n * p
        cdef double* pre = self.pre
        cdef double* prev
        cdef double* cur
        cdef double* o
        cdef double* g
        cdef double* psi = self.psip
        cdef double* res = self.res
        cdef double* suf = self.suf
        cdef double r, sse = 0.0
        cdef double scale = 2.0 / n
        # pre[i] = prod_{m < i} out_m
        for t in range(size):
            pre[t] = 1.0
        for i in range(1, d):
            prev = pre + (i - 1) * size
            cur = pre + i * size
            o = self.outs[i - 1]
            for t in range(size):
                cur[t] = prev[t] * o[t]
        cur = pre + (d - 1) * size
        o = self.outs[d - 1]
        for k in range(n):
            psi[k] = 0.0
        for j in range(p):
            for k in range(n):
                psi[k] = psi[k] + cur[<Py_ssize_t> j * n + k] * o[<Py_ssize_t> j * n + k]
        for k in range(n):
            r = psi[k] - self.yp[k]
            sse += r * r
            res[k] = scale * r
        if not want_grad:
            return sse
        for t in range(size):
            suf[t] = 1.0
        for i in range(d - 1, -1, -1):
            cur = pre + i * size
            g = self.gouts[i]
            for j in range(p):
                for k in range(n):
                    t = <Py_ssize_t> j * n + k
                    g[t] = res[k] * cur[t] * suf[t]
            if i > 0:
                o = self.outs[i]
                for t in range(size):
                    suf[t] = suf[t] * o[t]
        return sse

    def predict(self):
        self._forward_all()
        with nogil:
            self._combine(False)
        return self.psi

    def sse(self):
        self._forward_all()
        cdef double s
        with nogil:
            s = self._combine(False)
        return s

    def loss_grad(self):
        """Return the sum of squared residuals; write d(MSE)/d(theta) in place."""
        cdef MlpWorkspace s
        cdef double sse
        if not self.has_grad:
            raise RuntimeError("workspace was built without gradient buffers")
        self._forward_all()
        with nogil:
            sse = self._combine(True)
        for s in self.subs:
            with nogil:
                s._backward()
        return sse


def adam_update(double[::1] theta, double[::1] grad, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps, long t):
    """In-place bias-corrected Adam step number ``t`` (1-based)."""
    cdef Py_ssize_t i, n = theta.shape[0]
    cdef double bc1 = 1.0 - pow(beta1, <double> t)
    cdef double bc2 = 1.0 - pow(beta2, <double> t)
    cdef double g, mi, vi
    if grad.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("adam buffers differ in length")
    with nogil:
        for i in range(n):
            g = grad[i]
            mi = beta1 * m[i] + (1.0 - beta1) * g
            vi = beta2 * v[i] + (1.0 - beta2) * (g * g)
            m[i] = mi
            v[i] = vi
            theta[i] = theta[i] - lr * (mi / bc1) / (sqrt(vi / bc2) + eps)
