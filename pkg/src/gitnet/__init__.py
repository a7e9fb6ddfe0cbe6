"""Operator learning with generalized integral transform layers on PCA
function bases: models, hand-derived gradients, trainers, desk-scale PDE
data generators, and an evaluation-cost model."""

from .estimator import GitNetRegressor, PcaFunctionBasis, PcaNetRegressor
from .model import (
    GitLayerParams,
    GitNetParams,
    PcaNetParams,
    git_layer_forward,
    gitnet_forward,
    hybrid_product,
    init_params,
    init_pcanet,
    lift,
    param_count_layer,
    param_count_total,
    pcanet_forward,
    project,
)
from .pca import PcaBasis, decode, encode, fit_pca
from .tensor import (
    count_flops,
    dense_svd,
    gelu,
    gelu_grad,
    matmul,
    randomized_svd,
)
from .train import (
    AdamState,
    TrainConfig,
    adam_step,
    empirical_loss,
    relative_test_error,
    train_loop,
)

__all__ = [
    "AdamState",
    "GitLayerParams",
    "GitNetParams",
    "GitNetRegressor",
    "PcaBasis",
    "PcaFunctionBasis",
    "PcaNetParams",
    "PcaNetRegressor",
    "TrainConfig",
    "adam_step",
    "count_flops",
    "decode",
    "dense_svd",
    "empirical_loss",
    "encode",
    "fit_pca",
    "gelu",
    "gelu_grad",
    "git_layer_forward",
    "gitnet_forward",
    "hybrid_product",
    "init_params",
    "init_pcanet",
    "lift",
    "matmul",
    "param_count_layer",
    "param_count_total",
    "pcanet_forward",
    "project",
    "randomized_svd",
    "relative_test_error",
    "train_loop",
]

__version__ = "0.1.0"
