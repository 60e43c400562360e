"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line with the measured values and
then asserts. Criteria 4-7 train full models over five seeds and take tens
of minutes on one CPU core; select them with ``-m slow`` or skip them
with ``-m "not slow"``.
"""
import logging
import time
from pathlib import Path

import numpy as np
import pytest

from tennet.analysis import tnn_gradient, tnn_laplacian
from tennet.core import MlpParams, TnnModel, from_vector, init_tnn, predict, tnn_forward_batch, to_vector
from tennet.data import Dataset, gen_synthetic, load_csv, normalize_apply, normalize_fit, synthetic_function
from tennet.diff import loss_param_gradient
from tennet.experiment import run_regression
from tennet.quadrature import (GaussianTruncated, Interval, Uniform, WeightFunctionSpec, build_rule,
                               gauss_legendre_rule, integrate_raw, integrate_tnn, integrate_tnn_squared,
                               predict_mean, predict_square_mean, unit_cube_rule)
from tennet.training import TrainingConfig, train

CONCRETE = Path(__file__).parent / "data" / "concrete.csv"
SEEDS = range(5)
DIM = 8
EXP_INTEGRAL = 9.67736e-02


def report(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {title}: {detail}")


@pytest.fixture(autouse=True)
def _quiet_clamping():
    # validation/test inputs can fall outside the train-fitted range
    logging.disable(logging.WARNING)
    yield
    logging.disable(logging.NOTSET)


def _regression(fn, seed):
    # all 1000 samples go to the 9:1 train/validation split; no test holdout
    raw = gen_synthetic(fn, 1000, seed)
    r = run_regression(raw, "tnn", 3, 20, seed, n_train=raw.n)
    ints = integrate_raw(r.model, [Interval(0.0, 1.0)] * DIM)
    f = synthetic_function(fn)
    return {
        "train": r.train_mse,
        "d1": abs(f.integral(DIM) - ints.integral),
        "d2": abs(f.integral_sq(DIM) - ints.integral_sq),
        "integral": ints.integral,
        "epochs": r.history.epochs,
    }


def _medians(runs):
    return {k: float(np.median([r[k] for r in runs])) for k in runs[0]}


def test_criterion_1_quadrature_exactness(capsys):
    start = time.perf_counter()
    worst_exact, min_miss = 0.0, np.inf
    for n in range(1, 11):
        for lo, hi in ((-1.0, 1.0), (0.0, 1.0)):
            x, w = gauss_legendre_rule(n, Interval(lo, hi))
            exact = [(hi ** (k + 1) - lo ** (k + 1)) / (k + 1) for k in range(2 * n + 1)]
            errs = [abs(float(w @ x**k) - exact[k]) for k in range(2 * n + 1)]
            worst_exact = max(worst_exact, max(errs[:2 * n]))
            min_miss = min(min_miss, errs[2 * n])
    elapsed = time.perf_counter() - start
    ok = worst_exact < 1e-12 and min_miss > 1e-12 and elapsed < 1.0
    report(capsys, 1, "quadrature exactness",
           ok, f"max err k<=2n-1 {worst_exact:.2e}, min err k=2n {min_miss:.2e}, {elapsed:.3f}s")
    assert ok


def _grid_integral(model, rule, power):
    grids = np.meshgrid(*rule.nodes, indexing="ij")
    wgrid = np.ones_like(grids[0])
    for i, w in enumerate(rule.weights):
        shape = [1] * rule.dim
        shape[i] = len(w)
        wgrid = wgrid * w.reshape(shape)
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return float(wgrid.ravel() @ tnn_forward_batch(model, pts) ** power)


def test_criterion_2_factorized_integration_oracle(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        d, p = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        hidden = tuple(int(h) for h in rng.integers(1, 6, size=rng.integers(1, 3)))
        model = init_tnn(d, hidden, p, rng)
        lo = rng.uniform(-1.0, 0.5, size=d)
        domain = [Interval(a, a + rng.uniform(0.1, 1.5)) for a in lo]
        rule = build_rule(domain, [int(c) for c in rng.integers(1, 6, size=d)])
        e1 = abs(integrate_tnn(model, rule) - _grid_integral(model, rule, 1))
        e2 = abs(integrate_tnn_squared(model, rule) - _grid_integral(model, rule, 2))
        worst = max(worst, e1, e2)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 10.0
    report(capsys, 2, "factorized integration vs full grid", ok, f"max abs diff {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_3_derivative_oracles(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    model = init_tnn(3, (5, 5), 4, rng)
    X, y = rng.random((8, 3)), rng.normal(size=8) * 0.1

    g = loss_param_gradient(model, X, y).flat
    theta = to_vector(model)
    idx = rng.choice(theta.size, size=100, replace=False)
    h = 1e-6
    param_err = 0.0
    for k in idx:
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        ep = np.mean((predict(from_vector(model, tp), X) - y) ** 2)
        em = np.mean((predict(from_vector(model, tm), X) - y) ** 2)
        fd = (ep - em) / (2 * h)
        param_err = max(param_err, abs(g[k] - fd) / max(1.0, abs(g[k])))

    grad_err = lap_err = 0.0
    for x in rng.random((100, 3)):
        f = lambda z: float(predict(model, z[None, :])[0])
        e = np.eye(3)
        fd_g = np.array([(f(x + 1e-5 * e[i]) - f(x - 1e-5 * e[i])) / 2e-5 for i in range(3)])
        gx = tnn_gradient(model, x)
        grad_err = max(grad_err, np.max(np.abs(gx - fd_g) / np.maximum(1.0, np.abs(fd_g))))
        f0 = f(x)
        fd_l = sum((f(x + 1e-4 * e[i]) - 2 * f0 + f(x - 1e-4 * e[i])) / 1e-8 for i in range(3))
        lap_err = max(lap_err, abs(tnn_laplacian(model, x) - fd_l) / max(1.0, abs(fd_l)))
    elapsed = time.perf_counter() - start
    ok = param_err < 1e-5 and grad_err < 1e-6 and lap_err < 1e-4 and elapsed < 30.0
    report(capsys, 3, "derivative oracles", ok,
           f"params {param_err:.1e}, gradient {grad_err:.1e}, laplacian {lap_err:.1e}, {elapsed:.2f}s")
    assert ok


@pytest.mark.slow
def test_criterion_4_sum_of_sines(capsys):
    runs = [_regression("sum_sines", s) for s in SEEDS]
    m = _medians(runs)
    ok = m["train"] <= 1e-3 and m["d1"] <= 5e-2
    report(capsys, 4, "sum-of-sines regression", ok,
           f"median train MSE {m['train']:.4e} (<= 1e-3), |int(f - Psi)| {m['d1']:.4e} (<= 5e-2), "
           f"|int(f^2 - Psi^2)| {m['d2']:.4e} (reported only), median epochs {m['epochs']:.0f}")
    assert ok


@pytest.mark.slow
def test_criterion_5_product_of_exponentials(capsys):
    runs = [_regression("prod_exp", s) for s in SEEDS]
    m = _medians(runs)
    checks = {
        "train": m["train"] <= 1e-6,
        "d1": m["d1"] <= 1e-4,
        "d2": m["d2"] <= 1e-4,
        "integral": abs(m["integral"] - EXP_INTEGRAL) <= 1e-3,
    }
    ok = all(checks.values())
    per_seed = ", ".join(f"{r['train']:.1e}/{r['d1']:.1e}" for r in runs)
    report(capsys, 5, "product-of-exponentials regression", ok,
           f"median train MSE {m['train']:.4e} (<= 1e-6), |int(f - Psi)| {m['d1']:.4e} (<= 1e-4), "
           f"|int(f^2 - Psi^2)| {m['d2']:.4e} (<= 1e-4), int Psi {m['integral']:.6e} "
           f"(within 1e-3 of {EXP_INTEGRAL}); per seed train/|dI| {per_seed}; "
           f"failed: {[k for k, v in checks.items() if not v]}")
    assert ok


@pytest.mark.slow
def test_criterion_6_model_comparison(capsys):
    test_mse = {k: [] for k in ("tnn", "ffn", "rbn")}
    for seed in SEEDS:
        raw = gen_synthetic("sum_sines", 1000, seed)
        for kind in test_mse:
            test_mse[kind].append(run_regression(raw, kind, seed=seed, n_train=800).test_mse)
    med = {k: float(np.median(v)) for k, v in test_mse.items()}
    gap_ffn, gap_rbn = med["ffn"] / med["tnn"], med["rbn"] / med["tnn"]
    ok = gap_ffn >= 10 and gap_rbn >= 10
    report(capsys, 6, "model comparison on sum-of-sines", ok,
           f"median test MSE tnn {med['tnn']:.4e}, ffn {med['ffn']:.4e}, rbn {med['rbn']:.4e}; "
           f"gap ffn/tnn {gap_ffn:.1f}x, rbn/tnn {gap_rbn:.1f}x (>= 10x)")
    assert ok


@pytest.mark.slow
def test_criterion_7_concrete(capsys):
    raw = load_csv(CONCRETE, n_inputs=8)
    cfg = TrainingConfig(max_epochs=100_000)
    tests = [run_regression(raw, "tnn", seed=s, config=cfg, n_train=800).test_mse for s in SEEDS]
    med = float(np.median(tests))
    ok = med <= 8e-3
    report(capsys, 7, "concrete strength regression", ok,
           f"median test MSE {med:.4e} (<= 8e-3); per seed {', '.join(f'{t:.2e}' for t in tests)}")
    assert ok


def _permute_rank(model, perm):
    subs = []
    for arch, p in model.subnetworks:
        ws = p.weights[:-1] + (p.weights[-1][perm],)
        bs = p.biases[:-1] + (p.biases[-1][perm],)
        subs.append((arch, MlpParams(ws, bs)))
    return TnnModel(tuple(subs), model.norm)


def test_criterion_8_invariants(capsys):
    rng = np.random.default_rng(8)
    failures = []

    # determinism: identical seeds give bit-identical runs
    x = rng.random((40, 2))
    ds = Dataset(x, np.sin(3 * x[:, 0]) * x[:, 1])
    cfg = TrainingConfig(max_epochs=100, seed=5)
    h = [train(init_tnn(2, (4,), 3, np.random.default_rng(1)), ds, cfg)[1] for _ in range(2)]
    if h[0].train_mse != h[1].train_mse or h[0].val_mse != h[1].val_mse:
        failures.append("determinism")

    # normalization round trip
    raw = gen_synthetic("prod_exp", 200, seed=1, dim=4)
    norm = normalize_fit(raw)
    nd = normalize_apply(raw, norm)
    back_y = nd.y * norm.y_range + norm.y_mean
    back_x = nd.x * norm.x_range + norm.x_min
    if np.max(np.abs(back_y - raw.y)) > 1e-12 or np.max(np.abs(back_x - raw.X)) > 1e-12:
        failures.append("normalization round trip")

    # quadrature weights positive and summing to the interval length
    for n in range(1, 65):
        _, w = gauss_legendre_rule(n, Interval(0.0, 2.5))
        if np.any(w <= 0) or abs(w.sum() - 2.5) > 1e-12:
            failures.append(f"weight positivity n={n}")
            break

    # rank permutation leaves the model and its integrals unchanged
    model = init_tnn(3, (5, 5), 4, rng)
    perm = rng.permutation(4)
    pm = _permute_rank(model, perm)
    rule = unit_cube_rule(3, 7)
    pts = rng.random((30, 3))
    if (np.max(np.abs(predict(model, pts) - predict(pm, pts))) > 1e-14
            or abs(integrate_tnn(model, rule) - integrate_tnn(pm, rule)) > 1e-14
            or abs(integrate_tnn_squared(model, rule) - integrate_tnn_squared(pm, rule)) > 1e-14):
        failures.append("rank permutation")

    # weighted variance is nonnegative
    for _ in range(20):
        m = init_tnn(3, (4,), 3, rng)
        rho = WeightFunctionSpec((Uniform(0.2, 0.7), GaussianTruncated(rng.random(), 0.3), Uniform(0.0, 1.0)))
        mean = predict_mean(m, rule, rho)
        var = predict_square_mean(m, rule, rho) - mean**2
        if var < -1e-12 * max(1.0, mean**2):
            failures.append("variance nonnegativity")
            break

    ok = not failures
    report(capsys, 8, "invariant suite", ok,
           "determinism, normalization round trip, weight positivity, rank permutation, variance >= 0"
           + (f"; failed: {failures}" if failures else ""))
    assert ok
