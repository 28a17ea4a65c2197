"""scikit-learn style estimators wrapping the four inference methods.

All estimators implement fit(X, y) / predict(X, return_std=..., return_cov=...)
with get_params/set_params from BaseEstimator, so they compose with
pipelines, grid search, and cross-validation. Inputs are validated with the
scikit-learn helpers; the math below them is this package's own.

Predictions are function-space by default (no observation noise); pass
include_noise=True for predictive-y standard deviations.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .kernels import GpRegressionModel, RbfArdKernel, exact_gp_posterior
from .numerics import SeededRng
from .svgp import SvgpTrainer, svgp_predict
from .training import FilterTrainer, TrainConfig, default_hyperparams, pretrain_hyperparameters

__all__ = ["ExactGPRegressor", "GPNetRegressor", "FBNNRegressor", "SVGPRegressor"]


def _validate_fit(X, y):
    return check_X_y(X, y, y_numeric=True, dtype=float)


def _finish_predict(marginal, noise_variance, return_std, return_cov, include_noise):
    if return_cov:
        cov = marginal.cov
        if include_noise:
            cov = cov + noise_variance * np.eye(cov.shape[0])
        return marginal.mean, cov
    if return_std:
        var = marginal.variances()
        if include_noise:
            var = var + noise_variance
        return marginal.mean, np.sqrt(np.maximum(var, 0.0))
    return marginal.mean


class ExactGPRegressor(BaseEstimator, RegressorMixin):
    """Dense GP regression with an ARD RBF kernel (the oracle).

    Hyperparameters can be optimized by marginal-likelihood ascent on a
    random subset before the posterior is formed (`optimize_iterations` > 0).
    """

    def __init__(
        self,
        lengthscale=1.0,
        signal_variance=1.0,
        noise_variance=0.1,
        optimize_iterations=0,
        optimize_lr=0.05,
        optimize_subset=1000,
        seed=0,
    ):
        self.lengthscale = lengthscale
        self.signal_variance = signal_variance
        self.noise_variance = noise_variance
        self.optimize_iterations = optimize_iterations
        self.optimize_lr = optimize_lr
        self.optimize_subset = optimize_subset
        self.seed = seed

    def fit(self, X, y):
        X, y = _validate_fit(X, y)
        d = X.shape[1]
        hyper = np.concatenate(
            [
                np.log(np.broadcast_to(np.asarray(self.lengthscale, dtype=float), (d,))),
                [np.log(self.signal_variance), np.log(self.noise_variance)],
            ]
        )
        if self.optimize_iterations > 0:
            hyper, self.lml_trace_ = pretrain_hyperparameters(
                X, y, self.optimize_subset, self.optimize_iterations,
                self.optimize_lr, SeededRng(self.seed).derive("pretrain"), hyper,
            )
        kernel = RbfArdKernel(log_lengthscales=hyper[:d], log_signal_variance=float(hyper[d]))
        self.hyper_ = hyper
        self.noise_variance_ = float(np.exp(hyper[d + 1]))
        self.model_ = GpRegressionModel(
            kernel=kernel, log_noise_variance=float(hyper[d + 1]), train_x=X, train_y=y
        )
        return self

    def predict(self, X, return_std=False, return_cov=False, include_noise=False):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        marginal = exact_gp_posterior(self.model_, X)
        return _finish_predict(marginal, self.noise_variance_, return_std, return_cov, include_noise)

    def predict_marginal(self, X):
        check_is_fitted(self, "model_")
        return exact_gp_posterior(self.model_, check_array(X, dtype=float))

    def log_marginal_likelihood(self):
        check_is_fitted(self, "model_")
        from .kernels import log_marginal_likelihood as _lml

        return _lml(self.model_)


class GPNetRegressor(BaseEstimator, RegressorMixin):
    """Gaussian-output inference network trained by filter tracking."""

    _mode = "gpnet"

    def __init__(
        self,
        iterations=40000,
        batch_size=20,
        measurement_count=20,
        n_frequencies=20,
        eta=0.003,
        beta0=1.0,
        xi=0.1,
        seed=0,
        likelihood="gaussian",
        sampler="uniform-box",
        sampler_scale=1.0,
        sampler_box=None,
        sampler_margin=0.0,
        hyperparam_mode="pretrain-then-fix",
        optimizer="adam",
        adam_beta2=0.999,
        mc_samples=20,
        weight_structure="auto",
        train_raw_frequencies=False,
        train_amplitude=True,
        init_lengthscale=1.0,
        init_signal_variance=1.0,
        init_noise_variance=0.1,
        pretrain_iterations=100,
        pretrain_subset=1000,
        pretrain_lr=0.05,
    ):
        self.iterations = iterations
        self.batch_size = batch_size
        self.measurement_count = measurement_count
        self.n_frequencies = n_frequencies
        self.eta = eta
        self.beta0 = beta0
        self.xi = xi
        self.seed = seed
        self.likelihood = likelihood
        self.sampler = sampler
        self.sampler_scale = sampler_scale
        self.sampler_box = sampler_box
        self.sampler_margin = sampler_margin
        self.hyperparam_mode = hyperparam_mode
        self.optimizer = optimizer
        self.adam_beta2 = adam_beta2
        self.mc_samples = mc_samples
        self.weight_structure = weight_structure
        self.train_raw_frequencies = train_raw_frequencies
        self.train_amplitude = train_amplitude
        self.init_lengthscale = init_lengthscale
        self.init_signal_variance = init_signal_variance
        self.init_noise_variance = init_noise_variance
        self.pretrain_iterations = pretrain_iterations
        self.pretrain_subset = pretrain_subset
        self.pretrain_lr = pretrain_lr

    def _config(self):
        return TrainConfig(
            beta0=self.beta0,
            xi=self.xi,
            eta=self.eta,
            batch_size=self.batch_size,
            measurement_count=self.measurement_count,
            iterations=self.iterations,
            seed=self.seed,
            likelihood=self.likelihood,
            sampler=self.sampler,
            sampler_scale=self.sampler_scale,
            sampler_box=self.sampler_box,
            sampler_margin=self.sampler_margin,
            hyperparam_mode=self.hyperparam_mode,
            optimizer=self.optimizer,
            adam_beta2=self.adam_beta2,
            mc_samples=self.mc_samples,
            n_frequencies=self.n_frequencies,
            weight_structure=self.weight_structure,
            train_raw_frequencies=self.train_raw_frequencies,
            train_amplitude=self.train_amplitude,
            init_lengthscale=self.init_lengthscale,
            init_signal_variance=self.init_signal_variance,
            init_noise_variance=self.init_noise_variance,
            pretrain_iterations=self.pretrain_iterations,
            pretrain_subset=self.pretrain_subset,
            pretrain_lr=self.pretrain_lr,
        )

    def fit(self, X, y, callback=None, callback_every=0, hyper=None):
        X, y = _validate_fit(X, y)
        self.trainer_ = FilterTrainer(self._config(), X, y, mode=self._mode, hyper=hyper)
        self.trainer_.run(callback=callback, callback_every=callback_every)
        self.hyper_ = self.trainer_.hyper.copy()
        self.noise_variance_ = self.trainer_.noise_variance
        return self

    def predict(self, X, return_std=False, return_cov=False, include_noise=False):
        check_is_fitted(self, "trainer_")
        X = check_array(X, dtype=float)
        marginal = self.trainer_.predictive(X)
        return _finish_predict(marginal, self.noise_variance_, return_std, return_cov, include_noise)

    def predict_marginal(self, X):
        check_is_fitted(self, "trainer_")
        return self.trainer_.predictive(check_array(X, dtype=float))


class FBNNRegressor(GPNetRegressor):
    """Minibatch-heuristic ablation: matches the posterior of the prior given
    only the current minibatch (untempered noise). A simplified stand-in for
    that family of methods, kept for uncertainty comparisons."""

    _mode = "fbnn"


class SVGPRegressor(BaseEstimator, RegressorMixin):
    """Sparse variational GP with whitened inducing variables."""

    def __init__(
        self,
        n_inducing=100,
        iterations=10000,
        batch_size=500,
        eta=0.003,
        seed=0,
        hyperparam_mode="pretrain-then-fix",
        optimizer="adam",
        train_z=False,
        init_lengthscale=1.0,
        init_signal_variance=1.0,
        init_noise_variance=0.1,
        pretrain_iterations=100,
        pretrain_subset=1000,
        pretrain_lr=0.05,
    ):
        self.n_inducing = n_inducing
        self.iterations = iterations
        self.batch_size = batch_size
        self.eta = eta
        self.seed = seed
        self.hyperparam_mode = hyperparam_mode
        self.optimizer = optimizer
        self.train_z = train_z
        self.init_lengthscale = init_lengthscale
        self.init_signal_variance = init_signal_variance
        self.init_noise_variance = init_noise_variance
        self.pretrain_iterations = pretrain_iterations
        self.pretrain_subset = pretrain_subset
        self.pretrain_lr = pretrain_lr

    def _config(self):
        return TrainConfig(
            eta=self.eta,
            batch_size=self.batch_size,
            iterations=self.iterations,
            seed=self.seed,
            hyperparam_mode=self.hyperparam_mode,
            optimizer=self.optimizer,
            init_lengthscale=self.init_lengthscale,
            init_signal_variance=self.init_signal_variance,
            init_noise_variance=self.init_noise_variance,
            pretrain_iterations=self.pretrain_iterations,
            pretrain_subset=self.pretrain_subset,
            pretrain_lr=self.pretrain_lr,
        )

    def fit(self, X, y, callback=None, callback_every=0, hyper=None):
        X, y = _validate_fit(X, y)
        self.trainer_ = SvgpTrainer(
            self._config(), X, y, n_inducing=self.n_inducing, hyper=hyper, train_z=self.train_z
        )
        self.trainer_.run(callback=callback, callback_every=callback_every)
        self.hyper_ = self.trainer_.model.hyper.copy()
        self.noise_variance_ = self.trainer_.model.noise_variance
        return self

    def predict(self, X, return_std=False, return_cov=False, include_noise=False):
        check_is_fitted(self, "trainer_")
        X = check_array(X, dtype=float)
        marginal = svgp_predict(self.trainer_.model, X, full_cov=True)
        return _finish_predict(marginal, self.noise_variance_, return_std, return_cov, include_noise)

    def predict_marginal(self, X):
        check_is_fitted(self, "trainer_")
        return svgp_predict(self.trainer_.model, check_array(X, dtype=float), full_cov=True)

    def elbo(self, X, y):
        check_is_fitted(self, "trainer_")
        X, y = _validate_fit(X, y)
        return self.trainer_.elbo(X, y)
