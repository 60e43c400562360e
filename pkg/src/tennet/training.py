"""Full-batch training: MSE loss, Adam, plateau LR schedule and early stopping.

One epoch evaluates the training and validation MSE at the current
parameters, takes one Adam step on the training gradient, and then lets
the scheduler and the early-stopping monitor react to the validation MSE.
The run returns the parameters of the epoch with the lowest validation MSE.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels as _kernels
from .core import from_vector
from .data import format_float
from .diff import make_objective
from .errors import DivergenceError, ShapeError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    initial_lr: float = 1e-3
    lr_factor: float = 0.5
    lr_patience: int = 500
    early_stop_patience: int = 1000
    split_ratio: tuple = (9, 1)
    max_epochs: int = 200_000
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_mode: str = "full"
    min_delta: float = 0.0
    log_every: int = 0

    def __post_init__(self):
        if not 0.0 < self.lr_factor < 1.0:
            raise ValidationError(f"lr_factor must lie in (0, 1), got {self.lr_factor}")
        if self.lr_patience < 1 or self.early_stop_patience < 1:
            raise ValidationError("patience values must be >= 1")
        if len(self.split_ratio) != 2 or min(self.split_ratio) <= 0:
            raise ValidationError(f"split_ratio must be two positive numbers, got {self.split_ratio}")
        if not self.initial_lr > 0:
            raise ValidationError("initial_lr must be > 0")
        if self.max_epochs < 1:
            raise ValidationError("max_epochs must be >= 1")
        if self.batch_mode != "full":
            raise ValidationError(f"only full-batch training is supported, got {self.batch_mode!r}")


def mse_loss(predictions, targets):
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if p.shape != t.shape:
        raise ValidationError(f"{p.shape[0]} predictions but {t.shape[0]} targets")
    if p.shape[0] == 0:
        raise ValidationError("mse of an empty batch")
    r = p - t
    return float(r @ r) / p.shape[0]


# --- Adam -----------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)

    def step(self, params, grads, lr, config: TrainingConfig, kernels=None):
        """Update ``params`` in place."""
        self.t += 1
        (kernels or _kernels).adam_update(params, grads, self.m, self.v, float(lr),
                                          config.adam_beta1, config.adam_beta2, config.adam_eps, self.t)


def adam_step(state: AdamState, params, grads, lr, config: TrainingConfig):
    """Functional Adam step: returns ``(new_state, new_params)``, inputs untouched."""
    params = np.array(params, dtype=np.float64, copy=True)
    grads = np.ascontiguousarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ShapeError(f"params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    shape = params.shape
    new = AdamState(state.m.copy().reshape(-1), state.v.copy().reshape(-1), state.t)
    flat = params.reshape(-1)
    new.step(flat, grads.reshape(-1), lr, config)
    new.m, new.v = new.m.reshape(shape), new.v.reshape(shape)
    return new, flat.reshape(shape)


# --- schedule and early stopping -------------------------------------------


@dataclass(frozen=True)
class PlateauState:
    lr: float
    factor: float = 0.5
    patience: int = 500
    min_delta: float = 0.0
    best: float = math.inf
    counter: int = 0

    @classmethod
    def from_config(cls, config: TrainingConfig):
        return cls(config.initial_lr, config.lr_factor, config.lr_patience, config.min_delta)


def plateau_step(state: PlateauState, val_mse):
    """Multiply the LR by ``factor`` once ``patience`` epochs pass without improvement."""
    if val_mse < state.best - state.min_delta:
        return replace(state, best=val_mse, counter=0), state.lr
    counter = state.counter + 1
    if counter >= state.patience:
        lr = state.lr * state.factor
        return replace(state, lr=lr, counter=0), lr
    return replace(state, counter=counter), state.lr


@dataclass(frozen=True)
class EarlyStopState:
    patience: int = 1000
    min_delta: float = 0.0
    best: float = math.inf
    counter: int = 0

    @classmethod
    def from_config(cls, config: TrainingConfig):
        return cls(config.early_stop_patience, config.min_delta)


def early_stop_step(state: EarlyStopState, val_mse):
    """Signal a stop after ``patience`` consecutive epochs without improvement."""
    if val_mse < state.best - state.min_delta:
        return replace(state, best=val_mse, counter=0), False
    counter = state.counter + 1
    return replace(state, counter=counter), counter >= state.patience


# --- data split -------------------------------------------------------------


def split_train_val(dataset, ratio=(9, 1), seed=0):
    """Seeded shuffle, then the first ``floor(n * a / (a + b))`` samples train."""
    n = dataset.n
    if n < 10:
        raise ValidationError(f"need at least 10 samples to split, got {n}")
    a, b = ratio
    n_train = int(n * a // (a + b))
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.subset(perm[:n_train]), dataset.subset(perm[n_train:])


# --- run history -------------------------------------------------------------


@dataclass
class RunHistory:
    train_mse: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_val_mse: float = math.inf
    best_epoch: int = 0
    stopped_epoch: int = 0
    stop_reason: str = ""
    best_params: np.ndarray | None = None

    @property
    def epochs(self):
        return len(self.train_mse)

    @property
    def best_train_mse(self):
        """Training MSE of the returned (best-validation) parameters."""
        return self.train_mse[self.best_epoch - 1]

    def rows(self):
        for e, (tr, va, lr) in enumerate(zip(self.train_mse, self.val_mse, self.lr), start=1):
            yield e, tr, va, lr

    def to_csv(self, path_or_file):
        def _write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_mse", "val_mse", "lr"])
            for e, tr, va, lr in self.rows():
                w.writerow([e, format_float(tr), format_float(va), format_float(lr)])

        if hasattr(path_or_file, "write"):
            _write(path_or_file)
        else:
            with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
                _write(fh)


def train(model, dataset, config: TrainingConfig = TrainingConfig(), validation=None, kernels=None):
    """Train ``model`` on a normalized dataset; return ``(best_model, history)``.

    Without an explicit ``validation`` set the data is split with
    :func:`split_train_val` using ``config.split_ratio`` and ``config.seed``.
    The returned model carries ``dataset.norm``.
    """
    if validation is None:
        train_set, validation = split_train_val(dataset, config.split_ratio, config.seed)
    else:
        train_set = dataset
    obj = make_objective(model, train_set.x, train_set.y, kernels=kernels)
    theta = obj.theta
    val_obj = make_objective(model, validation.x, validation.y, theta=theta, with_grad=False, kernels=kernels)

    adam = AdamState.zeros(theta.shape[0])
    sched = PlateauState.from_config(config)
    stopper = EarlyStopState.from_config(config)
    hist = RunHistory()
    lr = config.initial_lr
    best_theta = theta.copy()

    for epoch in range(1, config.max_epochs + 1):
        tr = obj.loss_grad()
        if not math.isfinite(tr):
            raise DivergenceError(epoch, tr)
        va = val_obj.loss()
        if not math.isfinite(va):
            raise DivergenceError(epoch, va)
        hist.train_mse.append(tr)
        hist.val_mse.append(va)
        hist.lr.append(lr)
        if va < hist.best_val_mse:
            hist.best_val_mse = va
            hist.best_epoch = epoch
            best_theta[:] = theta
        if config.log_every and epoch % config.log_every == 0:
            log.info("epoch %d train_mse=%.4e val_mse=%.4e lr=%.3g", epoch, tr, va, lr)
        adam.step(theta, obj.grad, lr, config, kernels=kernels)
        sched, lr = plateau_step(sched, va)
        stopper, stop = early_stop_step(stopper, va)
        if stop:
            hist.stop_reason = "early_stopping"
            break
    else:
        hist.stop_reason = "max_epochs"
    hist.stopped_epoch = hist.epochs
    hist.best_params = best_theta
    norm = getattr(dataset, "norm", None)
    return from_vector(model, best_theta, norm=norm), hist
