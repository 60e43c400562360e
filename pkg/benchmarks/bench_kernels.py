"""Time the compiled and numpy training kernels on the default experiment models.

Run from the repository root::

    python benchmarks/bench_kernels.py [--repeats 200] [--n 720]

Each row reports the median wall time of one loss-and-gradient evaluation,
which is the per-epoch cost of full-batch training.
"""
import argparse
import time

import numpy as np

from tennet.diff import make_objective
from tennet.experiment import build_model
from tennet.kernels import load_backend

CASES = [
    ("tnn 03m05", "tnn", 3, 5),
    ("tnn 03m20", "tnn", 3, 20),
    ("ffn 04m40", "ffn", 4, 40),
    ("rbn 80", "rbn", None, None),
]


def time_case(kind, depth, width, X, y, backend, repeats):
    model = build_model(kind, X.shape[1], depth, width, rng=0)
    obj = make_objective(model, X, y, kernels=backend)
    obj.loss_grad()
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        obj.loss_grad()
        times.append(time.perf_counter() - t)
    return float(np.median(times)), obj.loss_grad()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200)
    ap.add_argument("--n", type=int, default=720, help="batch size (720 = 9/10 of 800)")
    ap.add_argument("--dim", type=int, default=8)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    X = rng.random((args.n, args.dim))
    y = np.sin(2 * np.pi * X).sum(axis=1) / args.dim
    py = load_backend("python")
    try:
        cy = load_backend("cython")
    except ImportError:
        cy = None
        print("compiled extension not built; only the numpy backend is timed")

    print(f"{'model':<12}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}{'loss diff':>11}")
    for label, kind, depth, width in CASES:
        t_py, l_py = time_case(kind, depth, width, X, y, py, args.repeats)
        if cy is None:
            print(f"{label:<12}{1e3 * t_py:>10.3f}")
            continue
        t_cy, l_cy = time_case(kind, depth, width, X, y, cy, args.repeats)
        print(f"{label:<12}{1e3 * t_py:>10.3f}{1e3 * t_cy:>11.3f}{t_py / t_cy:>8.1f}x{abs(l_py - l_cy):>11.1e}")


if __name__ == "__main__":
    main()
