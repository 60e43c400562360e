"""Tensor neural networks: separable regression models with exact factorized integration."""

from tennet.analysis import sensitivity_report, tnn_gradient, tnn_gradient_batch, tnn_laplacian, tnn_laplacian_batch
from tennet.core import (FfnModel, MlpArch, MlpParams, RbnModel, TnnModel, ffn_forward, init_ffn, init_mlp, init_rbn,
                         init_tnn, mlp_forward, predict, rbn_forward, tnn_forward)
from tennet.data import (Dataset, NormalizationParams, RawDataset, gen_synthetic, load_csv, normalize_apply,
                         normalize_fit, write_csv)
from tennet.diff import loss_param_gradient
from tennet.errors import TennetError
from tennet.experiment import build_model, run_regression
from tennet.kernels import BACKEND
from tennet.quadrature import (Interval, gauss_legendre_rule, integrate_raw, integrate_tnn, integrate_tnn_squared,
                               predict_mean, predict_square_mean, weighted_rule)
from tennet.serialize import load_model, save_model
from tennet.training import TrainingConfig, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Dataset", "FfnModel", "Interval", "MlpArch", "MlpParams", "NormalizationParams", "RawDataset",
    "RbnModel", "TennetError", "TnnModel", "TrainingConfig", "build_model", "ffn_forward", "gauss_legendre_rule",
    "gen_synthetic", "init_ffn", "init_mlp", "init_rbn", "init_tnn", "integrate_raw", "integrate_tnn",
    "integrate_tnn_squared", "load_csv", "load_model", "loss_param_gradient", "mlp_forward", "normalize_apply",
    "normalize_fit", "predict", "predict_mean", "predict_square_mean", "rbn_forward", "run_regression",
    "save_model", "sensitivity_report", "tnn_forward", "tnn_gradient", "tnn_gradient_batch", "tnn_laplacian",
    "tnn_laplacian_batch", "train", "weighted_rule", "write_csv",
]
