"""Gaussian-process posterior inference with trainable stochastic networks.

Public surface: the four scikit-learn style estimators, the underlying
trainers, the exact-GP oracle, and the data/metrics utilities used by the
benchmark harness.
"""

from .data import Dataset, SplitSpec, Standardizer, load_csv, load_xy_text, make_split, synth_1d
from .estimators import ExactGPRegressor, FBNNRegressor, GPNetRegressor, SVGPRegressor
from .features import RfeFeatureMap, rfe_kernel_estimate
from .filtering import (
    BernoulliLogitLikelihood,
    FilterTarget,
    GaussianLikelihood,
    blend_prior_network,
    kl_gaussian,
    nonconjugate_loss,
    regression_filter_target,
)
from .kernels import (
    GaussianMarginal,
    GpRegressionModel,
    RbfArdKernel,
    exact_gp_posterior,
    kernel_matrix,
    log_marginal_likelihood,
    prior_marginal,
)
from .metrics import MetricsReport, regression_metrics
from .network import GaussianWeightDist, InferenceNetwork, load_network, save_network
from .numerics import CholeskyFactor, JitterPolicy, SeededRng, cholesky, grad_check, mvn_sample
from .svgp import SvgpModel, SvgpTrainer, svgp_predict
from .training import BetaSchedule, FilterTrainer, TrainConfig, pretrain_hyperparameters

__version__ = "0.1.0"

__all__ = [
    "BernoulliLogitLikelihood",
    "BetaSchedule",
    "CholeskyFactor",
    "Dataset",
    "ExactGPRegressor",
    "FBNNRegressor",
    "FilterTarget",
    "FilterTrainer",
    "GPNetRegressor",
    "GaussianLikelihood",
    "GaussianMarginal",
    "GaussianWeightDist",
    "GpRegressionModel",
    "InferenceNetwork",
    "JitterPolicy",
    "MetricsReport",
    "RbfArdKernel",
    "RfeFeatureMap",
    "SVGPRegressor",
    "SeededRng",
    "SplitSpec",
    "Standardizer",
    "SvgpModel",
    "SvgpTrainer",
    "TrainConfig",
    "blend_prior_network",
    "cholesky",
    "exact_gp_posterior",
    "grad_check",
    "kernel_matrix",
    "kl_gaussian",
    "load_csv",
    "load_network",
    "load_xy_text",
    "log_marginal_likelihood",
    "make_split",
    "mvn_sample",
    "nonconjugate_loss",
    "pretrain_hyperparameters",
    "prior_marginal",
    "regression_metrics",
    "rfe_kernel_estimate",
    "save_network",
    "svgp_predict",
    "synth_1d",
]
