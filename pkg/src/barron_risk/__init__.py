"""Path-norm regularized two-layer ReLU networks with computable risk bounds."""

from barron_risk.numerics import RngStream, cholesky_solve, loglog_slope, sample_l1_sphere
from barron_risk.model import InitSpec, NetParams, forward, forward_truncated, init_params, path_norm
from barron_risk.barron import DiscreteBarronRep, construct_approximant, rep_from_network, sample_network
from barron_risk.data import Dataset, NoiseSpec
from barron_risk.training import LossSpec, TrainConfig, TrainedModel, lambda_n, train

__version__ = "0.1.0"

__all__ = [
    "DiscreteBarronRep",
    "Dataset",
    "InitSpec",
    "LossSpec",
    "NetParams",
    "NoiseSpec",
    "RngStream",
    "TrainConfig",
    "TrainedModel",
    "cholesky_solve",
    "construct_approximant",
    "forward",
    "forward_truncated",
    "init_params",
    "lambda_n",
    "loglog_slope",
    "path_norm",
    "rep_from_network",
    "sample_l1_sphere",
    "sample_network",
    "train",
]
