"""The filter-tracking training loop, hyperparameter handling, and schedules.

`FilterTrainer` runs the full algorithm: at each iteration it samples a
minibatch and a fresh set of measurement points, builds the filter target
(conjugate closed form for Gaussian noise, Monte-Carlo surrogate otherwise),
and takes one optimizer step on the network parameters. Mode "fbnn" swaps
the tempered filter target for the exact posterior of the prior conditioned
on the current minibatch alone, the minibatch-heuristic ablation; it is a
deliberately simplified stand-in for that family of methods, not a faithful
reimplementation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermitenorm

from .errors import BetaOutOfRange, ConfigError, NonFinite, NotPositiveDefinite, TrainingFailure
from .features import RfeFeatureMap
from .filtering import (
    BernoulliLogitLikelihood,
    blend_prior_network,
    kl_gaussian_with_grads,
    nonconjugate_loss,
    regression_filter_target,
)
from .kernels import GpRegressionModel, RbfArdKernel, exact_gp_posterior, lml_value_and_grad, prior_marginal
from .network import FULL_COV_FEATURE_LIMIT, InferenceNetwork
from .numerics import SeededRng
from .optim import make_optimizer
from .samplers import SAMPLER_KINDS, build_sampler

__all__ = [
    "BetaSchedule",
    "TrainConfig",
    "FilterTrainer",
    "hyperparameter_objective",
    "pretrain_hyperparameters",
    "default_hyperparams",
]

LIKELIHOOD_KINDS = ("gaussian", "bernoulli-logit")
HYPERPARAM_MODES = ("fixed", "pretrain-then-fix", "online")
OPTIMIZER_KINDS = ("adam", "sgd")
WEIGHT_STRUCTURES = ("auto", "full", "diagonal")


@dataclass(frozen=True)
class BetaSchedule:
    """Tempering-weight decay beta_t = beta0 / (1 + xi * sqrt(t))."""

    beta0: float = 1.0
    xi: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.beta0 <= 1.0:
            raise BetaOutOfRange(f"beta0={self.beta0} outside (0, 1]")
        if self.xi < 0.0:
            raise ConfigError("xi must be >= 0")

    def beta_at(self, t: int) -> float:
        if t < 0:
            raise ConfigError("iteration index must be >= 0")
        return self.beta0 / (1.0 + self.xi * np.sqrt(t))


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the data."""

    beta0: float = 1.0
    xi: float = 0.1
    eta: float = 0.003
    batch_size: int = 20
    measurement_count: int = 20
    iterations: int = 40000
    seed: int = 0
    likelihood: str = "gaussian"
    sampler: str = "uniform-box"
    sampler_scale: float = 1.0
    sampler_box: tuple | None = None
    sampler_margin: float = 0.0
    hyperparam_mode: str = "pretrain-then-fix"
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    mc_samples: int = 20
    n_frequencies: int = 20
    weight_structure: str = "auto"
    train_raw_frequencies: bool = False
    train_amplitude: bool = True
    init_lengthscale: float = 1.0
    init_signal_variance: float = 1.0
    init_noise_variance: float = 0.1
    pretrain_iterations: int = 100
    pretrain_subset: int = 1000
    pretrain_lr: float = 0.05

    def validate(self) -> None:
        if not 0.0 < self.beta0 <= 1.0:
            raise ConfigError(f"beta0={self.beta0} must lie in (0, 1]")
        if self.xi < 0.0:
            raise ConfigError("xi must be >= 0")
        if self.eta < 0.0:
            raise ConfigError("eta must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.measurement_count < 2:
            raise ConfigError("measurement_count must be >= 2")
        if self.measurement_count == 2:
            warnings.warn("moment matching is only unique for more than 2 measurement points")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.likelihood not in LIKELIHOOD_KINDS:
            raise ConfigError(f"likelihood must be one of {LIKELIHOOD_KINDS}")
        if self.sampler not in SAMPLER_KINDS:
            raise ConfigError(f"sampler must be one of {SAMPLER_KINDS}")
        if self.sampler_margin < 0.0:
            raise ConfigError("sampler_margin must be >= 0")
        if self.hyperparam_mode not in HYPERPARAM_MODES:
            raise ConfigError(f"hyperparam_mode must be one of {HYPERPARAM_MODES}")
        if self.optimizer not in OPTIMIZER_KINDS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZER_KINDS}")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples must be >= 1")
        if self.n_frequencies < 1:
            raise ConfigError("n_frequencies must be >= 1")
        if self.weight_structure not in WEIGHT_STRUCTURES:
            raise ConfigError(f"weight_structure must be one of {WEIGHT_STRUCTURES}")
        if self.init_signal_variance <= 0 or self.init_noise_variance <= 0 or self.init_lengthscale <= 0:
            raise ConfigError("initial hyperparameters must be positive")


def default_hyperparams(dim: int, config: TrainConfig) -> np.ndarray:
    """Packed [log_l (dim), log_sf2, log_noise] from the configured initials."""
    return np.concatenate(
        [
            np.full(dim, np.log(config.init_lengthscale)),
            [np.log(config.init_signal_variance), np.log(config.init_noise_variance)],
        ]
    )


def _split_hyper(vec: np.ndarray, dim: int):
    kernel = RbfArdKernel(log_lengthscales=vec[:dim], log_signal_variance=float(vec[dim]))
    return kernel, float(vec[dim + 1])


def hyperparameter_objective(
    q_means: np.ndarray,
    q_vars: np.ndarray,
    kernel: RbfArdKernel,
    log_noise: float,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    n_total: int,
    likelihood_kind: str = "gaussian",
):
    """Minibatch marginal-likelihood lower bound for the prior hyperparameters.

    (n/b) * sum_i [ E_{q}(log p(y_i|f_i)) - KL(q(f_i) || N(0, k(x_i, x_i))) ]
    with q(f_i) the network's current 1-D marginals, treated as constants.
    Returns the value and its gradient w.r.t. [log_l, log_sf2, log_noise].
    """
    q_means = np.asarray(q_means, dtype=float).ravel()
    q_vars = np.asarray(q_vars, dtype=float).ravel()
    y_batch = np.asarray(y_batch, dtype=float).ravel()
    b = y_batch.shape[0]
    scale = n_total / b
    k_diag = kernel.diag(x_batch)

    if likelihood_kind == "gaussian":
        s2 = float(np.exp(log_noise))
        resid = (y_batch - q_means) ** 2 + q_vars
        e_term = -0.5 * np.log(2.0 * np.pi * s2) - resid / (2.0 * s2)
        d_log_noise = scale * float(np.sum(-0.5 + resid / (2.0 * s2)))
    elif likelihood_kind == "bernoulli-logit":
        e_term = gauss_hermite_log_prob(BernoulliLogitLikelihood(), y_batch, q_means, q_vars)
        d_log_noise = 0.0
    else:
        raise ConfigError(f"likelihood must be one of {LIKELIHOOD_KINDS}")

    ratio = (q_vars + q_means**2) / k_diag
    kl = 0.5 * (ratio - 1.0 + np.log(k_diag) - np.log(q_vars))
    value = scale * float(np.sum(e_term - kl))
    if not np.isfinite(value):
        raise NonFinite("hyperparameter objective is non-finite")

    grad = np.zeros(kernel.dim + 2)
    # k(x, x) is the signal variance for every x: no lengthscale path.
    grad[kernel.dim] = scale * float(np.sum(0.5 * (ratio - 1.0)))
    grad[kernel.dim + 1] = d_log_noise
    return value, grad


def gauss_hermite_log_prob(likelihood, y, means, variances, n_nodes: int = 32) -> np.ndarray:
    """E_{N(mean, var)}[log p(y | f)] per point, by Gauss-Hermite quadrature."""
    nodes, weights = roots_hermitenorm(n_nodes)
    weights = weights / np.sqrt(2.0 * np.pi)
    f = means[:, None] + np.sqrt(variances)[:, None] * nodes[None, :]
    vals = likelihood.log_prob(np.asarray(y, dtype=float)[:, None], f)
    return vals @ weights


def pretrain_hyperparameters(
    train_x: np.ndarray,
    train_y: np.ndarray,
    subset_size: int,
    iterations: int,
    lr: float,
    rng: SeededRng,
    init: np.ndarray,
):
    """Maximize the exact log marginal likelihood on a random subset.

    Returns the final packed hyperparameters and the trace of objective
    values (one per iteration plus the final evaluation).
    """
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    n = train_x.shape[0]
    take = min(subset_size, n)
    idx = rng.choice(n, size=take, replace=False)
    x_sub, y_sub = train_x[idx], np.asarray(train_y, dtype=float).ravel()[idx]
    dim = train_x.shape[1]
    kernel, log_noise = _split_hyper(np.asarray(init, dtype=float), dim)
    model = GpRegressionModel(kernel=kernel, log_noise_variance=log_noise, train_x=x_sub, train_y=y_sub)

    opt = make_optimizer("adam", lr)
    state = opt.init_state(dim + 2)
    vec = model.hyperparams()
    trace = []
    for _ in range(iterations):
        value, grad = lml_value_and_grad(model.with_hyperparams(vec))
        trace.append(value)
        state, vec = opt.step(state, vec, -grad)
    trace.append(lml_value_and_grad(model.with_hyperparams(vec))[0])
    return vec, trace


class FilterTrainer:
    """Owns all mutable state of one training run; deterministic given config.

    Parameters
    ----------
    config : TrainConfig
    train_x, train_y : arrays
        Training data (already standardized by the caller if desired).
    mode : {"gpnet", "fbnn"}
        "gpnet" tracks the tempered filter; "fbnn" matches the exact
        posterior of the prior given only the current minibatch.
    hyper : array, optional
        Packed [log_l, log_sf2, log_noise] to start from; defaults come from
        the config, after pretraining when the mode asks for it.
    """

    def __init__(self, config: TrainConfig, train_x, train_y, mode: str = "gpnet", hyper=None):
        config.validate()
        if mode not in ("gpnet", "fbnn"):
            raise ConfigError(f"unknown trainer mode {mode!r}")
        if mode == "fbnn" and config.likelihood != "gaussian":
            raise ConfigError("the fbnn ablation supports only the gaussian likelihood")
        self.config = config
        self.mode = mode
        self.train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
        self.train_y = np.asarray(train_y, dtype=float).ravel()
        if self.train_x.shape[0] != self.train_y.shape[0]:
            raise ConfigError("train_x and train_y disagree on the number of rows")
        self.n_total = self.train_x.shape[0]
        self.dim = self.train_x.shape[1]
        self.batch_size = min(config.batch_size, self.n_total)

        root = SeededRng(config.seed)
        self._rng_batch = root.derive("batch")
        self._rng_measure = root.derive("measurement")
        self._rng_mc = root.derive("mc")
        freq_seed = root.derive("frequencies").seed

        if hyper is not None:
            self.hyper = np.asarray(hyper, dtype=float).copy()
        else:
            self.hyper = default_hyperparams(self.dim, config)
            if config.hyperparam_mode == "pretrain-then-fix":
                self.hyper, self.pretrain_trace = pretrain_hyperparameters(
                    self.train_x,
                    self.train_y,
                    config.pretrain_subset,
                    config.pretrain_iterations,
                    config.pretrain_lr,
                    root.derive("pretrain"),
                    self.hyper,
                )

        kernel, _ = _split_hyper(self.hyper, self.dim)
        # c(x) is fixed at construction; it does not track later hyper updates.
        self.sampler = build_sampler(
            config.sampler,
            self.train_x,
            lengthscales=kernel.lengthscales,
            box=config.sampler_box,
            scale=config.sampler_scale,
            margin=config.sampler_margin,
        )

        fmap = RfeFeatureMap.create(
            dim=self.dim,
            n_frequencies=config.n_frequencies,
            seed=freq_seed,
            log_lengthscales=kernel.log_lengthscales.copy(),
            log_amplitude=0.5 * kernel.log_signal_variance,
            train_raw_frequencies=config.train_raw_frequencies,
            train_amplitude=config.train_amplitude,
        )
        structure = config.weight_structure
        if structure == "auto":
            structure = "full" if fmap.dim_out <= FULL_COV_FEATURE_LIMIT else "diagonal"
        self.net = InferenceNetwork.initial(fmap, structure=structure)

        self.schedule = BetaSchedule(beta0=config.beta0, xi=config.xi)
        self._opt = make_optimizer(
            config.optimizer, config.eta, config.adam_beta1, config.adam_beta2, config.adam_eps
        )
        self._opt_state = self._opt.init_state(self.net.n_params)
        # Hyperparameters share the learning rate of the network updates.
        self._hyper_opt = make_optimizer(
            config.optimizer, config.eta, config.adam_beta1, config.adam_beta2, config.adam_eps
        )
        self._hyper_opt_state = self._hyper_opt.init_state(self.dim + 2)
        self.iteration = 0

    # -- current derived quantities -------------------------------------
    @property
    def kernel(self) -> RbfArdKernel:
        return _split_hyper(self.hyper, self.dim)[0]

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.hyper[self.dim + 1]))

    @property
    def beta(self) -> float:
        return self.schedule.beta_at(self.iteration)

    def predictive(self, points):
        """Network marginal at the given points (function-space, no noise)."""
        return self.net.marginal(points)

    # -- one step ---------------------------------------------------------
    def step(self, batch_x: np.ndarray, batch_y: np.ndarray) -> float:
        """One parameter update from one minibatch; returns the step objective."""
        try:
            return self._step_inner(batch_x, batch_y)
        except (NotPositiveDefinite, NonFinite, np.linalg.LinAlgError) as err:
            raise TrainingFailure(self.iteration, err) from err

    def _step_inner(self, batch_x, batch_y) -> float:
        batch_x = np.atleast_2d(np.asarray(batch_x, dtype=float))
        batch_y = np.asarray(batch_y, dtype=float).ravel()
        beta = self.beta
        kernel, log_noise = _split_hyper(self.hyper, self.dim)
        x_m = self.sampler.sample(self._rng_measure, self.config.measurement_count, avoid=batch_x)

        if self.config.hyperparam_mode == "online":
            q_means, q_vars = self.net.marginal_diag(batch_x)
            _, h_grad = hyperparameter_objective(
                q_means, q_vars, kernel, log_noise, batch_x, batch_y,
                self.n_total, self.config.likelihood,
            )
        else:
            h_grad = None

        if self.mode == "fbnn":
            objective, grad = self._fbnn_objective(kernel, log_noise, x_m, batch_x, batch_y)
        elif self.config.likelihood == "gaussian":
            objective, grad = self._conjugate_objective(kernel, log_noise, beta, x_m, batch_x, batch_y)
        else:
            objective, grad = nonconjugate_loss(
                self.net, self.net, kernel, x_m, batch_x, batch_y,
                BernoulliLogitLikelihood(), beta, self.n_total,
                self.config.mc_samples, self._rng_mc,
            )

        self._opt_state, new_params = self._opt.step(self._opt_state, self.net.params, grad)
        self.net = self.net.with_params(new_params)
        if h_grad is not None:
            self._hyper_opt_state, self.hyper = self._hyper_opt.step(
                self._hyper_opt_state, self.hyper, -h_grad
            )
        self.iteration += 1
        return objective

    def _conjugate_objective(self, kernel, log_noise, beta, x_m, batch_x, batch_y):
        """KL(q(f_M) || filter target at f_M) and its parameter gradient."""
        joint_points = np.vstack([x_m, batch_x])
        prior = prior_marginal(kernel, joint_points)
        net_joint = self.net.marginal(joint_points)
        blended = blend_prior_network(prior, net_joint, beta)
        target = regression_filter_target(
            blended, batch_y, float(np.exp(log_noise)), self.n_total, beta
        )
        q_m, pullback = self.net.marginal_with_pullback(x_m)
        kl, d_mean, d_cov = kl_gaussian_with_grads(q_m, target.marginal)
        return kl, pullback(d_mean, d_cov)

    def _fbnn_objective(self, kernel, log_noise, x_m, batch_x, batch_y):
        """KL against the prior's posterior given the minibatch alone."""
        model = GpRegressionModel(
            kernel=kernel, log_noise_variance=log_noise, train_x=batch_x, train_y=batch_y
        )
        target = exact_gp_posterior(model, x_m)
        q_m, pullback = self.net.marginal_with_pullback(x_m)
        kl, d_mean, d_cov = kl_gaussian_with_grads(q_m, target)
        return kl, pullback(d_mean, d_cov)

    # -- run loop ---------------------------------------------------------
    def sample_batch(self):
        idx = self._rng_batch.choice(self.n_total, size=self.batch_size, replace=False)
        return self.train_x[idx], self.train_y[idx]

    def run(self, callback=None, callback_every: int = 0):
        """Run the configured number of iterations.

        `callback(trainer, iteration, objective)` fires every
        `callback_every` steps (and on the final step) when requested.
        """
        objective = float("nan")
        for _ in range(self.config.iterations):
            bx, by = self.sample_batch()
            objective = self.step(bx, by)
            if callback is not None and callback_every > 0:
                done = self.iteration
                if done % callback_every == 0 or done == self.config.iterations:
                    callback(self, done, objective)
        return objective
