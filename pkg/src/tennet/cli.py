"""Command-line front end.

Subcommands: gen, train, eval, integrate, predict, analyze, benchmark.
Machine-readable results go to stdout as ``key=value`` pairs; diagnostics go
to the log on stderr (level from the ``TENNET_LOG`` environment variable).

Every subcommand accepts ``--config FILE`` with flat ``key = value`` lines
whose keys are the long flag names (``max-epochs`` or ``max_epochs``).
Explicit flags override file values, which override built-in defaults.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import sensitivity_report
from .core import BIAS_INITS
from .core import predict as model_predict
from .data import (SYNTHETIC, Dataset, format_float, gen_synthetic, load_csv, normalize_apply,
                   synthetic_function, write_csv)
from .errors import DivergenceError, SchemaError, TennetError, UnsupportedOperationError, ValidationError
from .experiment import MODEL_KINDS, build_model, cell_name, init_rng, prepare_splits, run_regression
from .quadrature import (DEFAULT_NODES, Flat, GaussianTruncated, Interval, RawIntegrals, Uniform,
                         WeightFunctionSpec, build_rule, integrate_raw, integrate_tnn, integrate_tnn_squared,
                         normalized_box, predict_mean, predict_square_mean)
from .serialize import load_model, save_model
from .training import TrainingConfig, train

log = logging.getLogger("tennet")


class UsageError(Exception):
    """Bad command-line or config-file input; exits with status 2."""


# --- value parsers ---------------------------------------------------------


def _int_list(text):
    try:
        values = [int(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _ratio(text):
    try:
        a, b = (float(v) for v in str(text).split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a ratio like 9:1, got {text!r}") from None
    return (a, b)


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def parse_intervals(text, dim):
    """``"lo:hi"`` (broadcast) or ``"lo:hi,lo:hi,..."`` with one entry per dimension."""
    parts = [p for p in text.split(",") if p.strip()]
    try:
        ivs = [Interval(*(float(v) for v in p.split(":"))) for p in parts]
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad domain {text!r}: {exc}") from None
    if len(ivs) == 1:
        ivs = ivs * dim
    if len(ivs) != dim:
        raise UsageError(f"domain has {len(ivs)} intervals, model has dimension {dim}")
    return ivs


def parse_rho(text, dim):
    """Per-dimension weight factors: ``flat``, ``uniform:a:b`` or ``gauss:mu:sigma``.

    Entries are comma-separated; a single entry applies to every dimension.
    """
    factors = []
    for part in (p.strip() for p in text.split(",") if p.strip()):
        name, *params = part.split(":")
        try:
            values = [float(v) for v in params]
            if name == "flat" and not values:
                factors.append(Flat())
            elif name == "uniform" and len(values) == 2:
                factors.append(Uniform(*values))
            elif name in ("gauss", "gaussian") and len(values) == 2:
                factors.append(GaussianTruncated(*values))
            else:
                raise UsageError(f"bad weight factor {part!r}")
        except ValueError as exc:
            raise UsageError(f"bad weight factor {part!r}: {exc}") from None
    if len(factors) == 1:
        factors = factors * dim
    if len(factors) != dim:
        raise UsageError(f"weight function has {len(factors)} factors, model has dimension {dim}")
    return WeightFunctionSpec(tuple(factors))


def _rho_to_normalized(rho, norm):
    out = []
    for i, f in enumerate(rho.factors):
        lo, r = norm.x_min[i], norm.x_range[i]
        if isinstance(f, Uniform):
            out.append(Uniform((f.a - lo) / r, (f.b - lo) / r))
        elif isinstance(f, GaussianTruncated):
            out.append(GaussianTruncated((f.mu - lo) / r, f.sigma / r))
        else:
            out.append(f)
    return WeightFunctionSpec(tuple(out))


def read_config_file(path):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


# --- parser -----------------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="key = value file; explicit flags take precedence")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path or directory")
    p.add_argument("--model", choices=MODEL_KINDS, default="tnn", help="model kind")
    p.add_argument("--depth", type=int, help="hidden layers per network")
    p.add_argument("--width", type=int, help="neurons per layer (TNN rank, RBN units)")
    p.add_argument("--nodes", type=_int_list, default=[DEFAULT_NODES],
                   help="Gauss-Legendre nodes per dimension (one value or one per dimension)")
    p.add_argument("--jobs", type=int, default=1)


def _training_flags(p):
    d = TrainingConfig()
    p.add_argument("--lr", type=float, default=d.initial_lr)
    p.add_argument("--lr-factor", type=float, default=d.lr_factor)
    p.add_argument("--lr-patience", type=int, default=d.lr_patience)
    p.add_argument("--patience", type=int, default=d.early_stop_patience, help="early-stopping patience")
    p.add_argument("--split", type=_ratio, default=d.split_ratio, help="train:validation ratio")
    p.add_argument("--max-epochs", type=int, default=d.max_epochs)
    p.add_argument("--min-delta", type=float, default=d.min_delta)
    p.add_argument("--bias-init", choices=BIAS_INITS, default="uniform",
                   help="initial biases: uniform like the weights, or zero")


def build_parser():
    parser = argparse.ArgumentParser(prog="tennet", description="Tensor neural network regression toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    _common(p)
    p.add_argument("--fn", choices=sorted(SYNTHETIC))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--dim", type=int, default=8)

    p = sub.add_parser("train", help="train a model on a CSV dataset")
    _common(p)
    _training_flags(p)
    p.add_argument("--data", help="CSV with the target in the last column")
    p.add_argument("--holdout", type=int, default=0, help="samples held out as a test set")

    p = sub.add_parser("eval", help="MSE of a trained model on datasets")
    _common(p)
    p.add_argument("--run", help="directory written by 'train'")
    p.add_argument("--model-file")
    for name in ("data", "train", "val", "test"):
        p.add_argument(f"--{name}", help=f"{name} CSV")

    p = sub.add_parser("integrate", help="integrate a TNN and its square")
    _common(p)
    p.add_argument("--model-file")
    p.add_argument("--fn", choices=sorted(SYNTHETIC), help="report errors against this function")
    p.add_argument("--domain", help="raw box 'lo:hi' or 'lo:hi,...'; default the training range")

    p = sub.add_parser("predict", help="rho-weighted means of the TNN and its square")
    _common(p)
    p.add_argument("--model-file")
    p.add_argument("--rho", default="flat", help="flat | uniform:a:b | gauss:mu:sigma, comma-separated")
    p.add_argument("--rho-raw", type=_bool, default=False, help="rho parameters are in raw input units")
    p.add_argument("--domain", help="raw box 'lo:hi' or 'lo:hi,...'; default the training range")

    p = sub.add_parser("analyze", help="gradient and Laplacian at every sample")
    _common(p)
    p.add_argument("--model-file")
    p.add_argument("--data")

    p = sub.add_parser("benchmark", help="depth x width sweep over seeded runs")
    _common(p)
    _training_flags(p)
    p.add_argument("--data", help="CSV dataset (otherwise --fn is generated per seed)")
    p.add_argument("--fn", choices=sorted(SYNTHETIC), default="sum_sines")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--dim", type=int, default=8, help="input dimension of generated data")
    p.add_argument("--n-train", type=int, default=800, help="samples kept for training; the rest test")
    p.add_argument("--depths", type=_int_list, default=[4])
    p.add_argument("--widths", type=_int_list, default=[5])
    p.add_argument("--repeats", type=int, default=1, help="seeded runs per cell")
    return parser


def parse_args(argv):
    """Parse ``argv`` with config-file values as the subcommand defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            values = read_config_file(args.config)
        except UsageError as exc:
            parser.error(str(exc))
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(values) - known - {"config"})
        if unknown:
            parser.error(f"unknown config keys for '{args.command}': {', '.join(unknown)}")
        values.pop("config", None)
        subparser.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def training_config(args):
    return TrainingConfig(
        initial_lr=args.lr, lr_factor=args.lr_factor, lr_patience=args.lr_patience,
        early_stop_patience=args.patience, split_ratio=tuple(args.split), max_epochs=args.max_epochs,
        seed=args.seed, min_delta=args.min_delta,
    )


def _need(args, *names):
    # required values may come from flags or the config file
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"'{args.command}' needs {', '.join(missing)}")


def _emit(**values):
    parts = []
    for k, v in values.items():
        parts.append(f"{k}={format_float(v) if isinstance(v, float) else v}")
    print(" ".join(parts))


# --- commands ---------------------------------------------------------------


def cmd_gen(args):
    _need(args, "fn")
    raw = gen_synthetic(args.fn, args.n, args.seed, dim=args.dim)
    if args.out:
        write_csv(args.out, raw)
        print(f"rows={raw.n}")
    else:
        write_csv(sys.stdout, raw)
        print(f"rows={raw.n}", file=sys.stderr)
    return 0


def cmd_train(args):
    _need(args, "data")
    config = training_config(args)
    raw = load_csv(args.data)
    out = Path(args.out or "run")
    out.mkdir(parents=True, exist_ok=True)
    sp = prepare_splits(raw, args.seed, config.split_ratio, n_test=args.holdout)
    for name, part in sp.raw.items():
        write_csv(out / f"{name}.csv", part)
    model = build_model(args.model, raw.dim, args.depth, args.width, init_rng(args.seed), sp.norm,
                        args.bias_init)
    best, hist = train(model, sp.normalized["train"], config, validation=sp.normalized["val"])
    save_model(best, out / "model.json")
    hist.to_csv(out / "history.csv")
    _emit(best_epoch=hist.best_epoch, stopped_epoch=hist.stopped_epoch,
          train_mse=float(hist.best_train_mse), val_mse=float(hist.best_val_mse))
    return 0


def _mse(model, raw):
    if raw.dim != model.dim:
        raise SchemaError(f"dataset has {raw.dim} inputs, model has dimension {model.dim}")
    if model.norm is not None:
        ds = normalize_apply(raw, model.norm)
        x, y = ds.x, ds.y
    else:
        x, y = raw.X, raw.y
    r = model_predict(model, x) - y
    return float(r @ r) / r.shape[0]


def cmd_eval(args):
    run = Path(args.run) if args.run else None
    model_file = args.model_file or (run / "model.json" if run else None)
    if model_file is None:
        raise UsageError("eval needs --model-file or --run")
    model = load_model(model_file)
    results = {}
    for name in ("data", "train", "val", "test"):
        path = getattr(args, name)
        if path is None and run is not None and name != "data" and (run / f"{name}.csv").exists():
            path = run / f"{name}.csv"
        if path is not None:
            key = "mse" if name == "data" else f"{name}_mse"
            results[key] = _mse(model, load_csv(path))
    if not results:
        raise UsageError("eval needs at least one dataset")
    _emit(**results)
    return 0


def _require_tnn(model):
    if model.kind != "tnn":
        raise UnsupportedOperationError(f"factorized integration needs a TNN, got a {model.kind} model")


def _boxes(args, model):
    """Raw box and its image in normalized coordinates."""
    dim, norm = model.dim, model.norm
    if args.domain:
        raw_box = parse_intervals(args.domain, dim)
    elif getattr(args, "fn", None):
        raw_box = [Interval(0.0, 1.0)] * dim
    elif norm is not None:
        raw_box = [Interval(a, b) for a, b in zip(norm.x_min, norm.x_max)]
    else:
        raw_box = [Interval(0.0, 1.0)] * dim
    box = normalized_box(raw_box, norm) if norm is not None else raw_box
    return raw_box, box


def _counts(args, dim):
    nodes = list(args.nodes)
    if len(nodes) == 1:
        nodes = nodes * dim
    if len(nodes) != dim:
        raise UsageError(f"--nodes has {len(nodes)} entries, model has dimension {dim}")
    return nodes


def cmd_integrate(args):
    _need(args, "model_file")
    model = load_model(args.model_file)
    _require_tnn(model)
    raw_box, box = _boxes(args, model)
    counts = _counts(args, model.dim)
    if model.norm is not None:
        r = integrate_raw(model, raw_box, counts)
    else:
        rule = build_rule(box, counts)
        i1, i2 = integrate_tnn(model, rule), integrate_tnn_squared(model, rule)
        r = RawIntegrals(i1, i2, rule.volume, i1, i2, rule.volume)
    out = dict(integral_psi=r.psi_integral, integral_psi_sq=r.psi_integral_sq,
               volume_normalized=r.normalized_volume, integral=r.integral, integral_sq=r.integral_sq,
               volume=r.volume)
    if args.fn:
        f = synthetic_function(args.fn)
        ref1, ref2 = float(f.integral(model.dim)), float(f.integral_sq(model.dim))
        out.update(reference_integral=ref1, reference_integral_sq=ref2,
                   error_integral=ref1 - r.integral, error_integral_sq=ref2 - r.integral_sq)
    _emit(**out)
    return 0


def cmd_predict(args):
    _need(args, "model_file")
    model = load_model(args.model_file)
    _require_tnn(model)
    _, box = _boxes(args, model)
    rho = parse_rho(args.rho, model.dim)
    if args.rho_raw:
        if model.norm is None:
            raise ValidationError("--rho-raw needs a model with normalization parameters")
        rho = _rho_to_normalized(rho, model.norm)
    rule = build_rule(box, _counts(args, model.dim))
    m1 = predict_mean(model, rule, rho)
    m2 = predict_square_mean(model, rule, rho)
    out = dict(mean=m1, square_mean=m2)
    if model.norm is not None:
        s, mean = model.norm.y_range, model.norm.y_mean
        out.update(mean_raw=s * m1 + mean, square_mean_raw=s * s * m2 + 2.0 * s * mean * m1 + mean * mean)
    _emit(**out)
    return 0


def cmd_analyze(args):
    _need(args, "model_file", "data")
    model = load_model(args.model_file)
    _require_tnn(model)
    raw = load_csv(args.data)
    if raw.dim != model.dim:
        raise SchemaError(f"dataset has {raw.dim} inputs, model has dimension {model.dim}")
    if model.norm is not None:
        report = sensitivity_report(model, raw)
    else:
        report = sensitivity_report(model, Dataset(raw.X, raw.y))
    if args.out:
        report.to_csv(args.out)
        print(f"rows={len(report)}")
    else:
        report.to_csv(sys.stdout)
    return 0


# --- benchmark ----------------------------------------------------------------


def _bench_task(task):
    """One seeded run of one cell. Top-level so a process pool can pickle it."""
    kind, depth, width, seed, config, data_path, fn, n, dim, n_train, bias_init = task
    raw = load_csv(data_path) if data_path else gen_synthetic(fn, n, seed, dim=dim)
    key = cell_name(depth, width)
    try:
        r = run_regression(raw, kind, depth, width, seed, config, n_train=n_train, bias_init=bias_init)
    except DivergenceError as exc:
        log.warning("cell %s seed %d diverged at epoch %d", key, seed, exc.epoch)
        return dict(cell=key, depth=depth, width=width, seed=seed, status="diverged",
                    epochs=exc.epoch, curve=None)
    h = r.history
    return dict(cell=key, depth=depth, width=width, seed=seed, status="ok", epochs=h.epochs,
                best_epoch=h.best_epoch, train_mse=r.train_mse, val_mse=r.val_mse, test_mse=r.test_mse,
                curve=(list(h.train_mse), list(h.val_mse), list(h.lr)))


def _mean_curve(curves):
    """Epoch-wise mean of runs of different lengths; finished runs hold their last value."""
    length = max(len(c) for c in curves)
    padded = np.array([list(c) + [c[-1]] * (length - len(c)) for c in curves])
    return padded.mean(axis=0)


def cmd_benchmark(args):
    config = training_config(args)
    out = Path(args.out or "benchmark")
    (out / "curves").mkdir(parents=True, exist_ok=True)
    tasks = [(args.model, d, w, args.seed + r, config, args.data, args.fn, args.n, args.dim, args.n_train,
              args.bias_init)
             for d in args.depths for w in args.widths for r in range(args.repeats)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_task, tasks))
    else:
        results = [_bench_task(t) for t in tasks]
    results.sort(key=lambda r: (r["depth"], r["width"], r["seed"]))

    with open(out / "runs.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "depth", "width", "seed", "status", "epochs", "best_epoch",
                    "train_mse", "val_mse", "test_mse"])
        for r in results:
            ok = r["status"] == "ok"
            w.writerow([r["cell"], r["depth"], r["width"], r["seed"], r["status"], r["epochs"],
                        r["best_epoch"] if ok else "",
                        *(format_float(r[k]) if ok else "" for k in ("train_mse", "val_mse", "test_mse"))])
            if ok:
                with open(out / "curves" / f"{r['cell']}_s{r['seed']}.csv", "w", newline="",
                          encoding="utf-8") as cf:
                    cw = csv.writer(cf, lineterminator="\n")
                    cw.writerow(["epoch", "train_mse", "val_mse", "lr"])
                    for e, row in enumerate(zip(*r["curve"]), start=1):
                        cw.writerow([e, *(format_float(v) for v in row)])

    cells = {}
    for r in results:
        cells.setdefault((r["depth"], r["width"]), []).append(r)
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "model", "depth", "width", "runs", "diverged", "min_train_mse",
                    "median_train_mse", "mean_train_mse", "min_test_mse", "median_test_mse", "mean_test_mse"])
        for (depth, width), runs in sorted(cells.items()):
            ok = [r for r in runs if r["status"] == "ok"]
            row = [cell_name(depth, width), args.model, depth, width, len(runs), len(runs) - len(ok)]
            for key in ("train_mse", "test_mse"):
                vals = [r[key] for r in ok]
                row += ([format_float(min(vals)), format_float(statistics.median(vals)),
                         format_float(statistics.fmean(vals))] if vals else ["", "", ""])
            w.writerow(row)
            if len(ok) > 1:
                mean_tr = _mean_curve([r["curve"][0] for r in ok])
                mean_va = _mean_curve([r["curve"][1] for r in ok])
                with open(out / "curves" / f"{cell_name(depth, width)}_mean.csv", "w", newline="",
                          encoding="utf-8") as cf:
                    cw = csv.writer(cf, lineterminator="\n")
                    cw.writerow(["epoch", "train_mse", "val_mse"])
                    for e, (a, b) in enumerate(zip(mean_tr, mean_va), start=1):
                        cw.writerow([e, format_float(a), format_float(b)])
    print(f"cells={len(cells)} runs={len(results)} "
          f"diverged={sum(r['status'] != 'ok' for r in results)}")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "integrate": cmd_integrate,
    "predict": cmd_predict,
    "analyze": cmd_analyze,
    "benchmark": cmd_benchmark,
}


def _setup_logging():
    level = os.environ.get("TENNET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _setup_logging()
    args = parse_args(sys.argv[1:] if argv is None else argv)
    log.info("resolved settings: %s", {k: v for k, v in sorted(vars(args).items())})
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tennet: usage error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"tennet: {exc}", file=sys.stderr)
        return 1
    except (TennetError, OSError) as exc:
        print(f"tennet: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
