"""Sparse variational GP baseline with whitened inducing variables.

The variational family is q(u) = N(Lz m_v, Lz S Lz^T) with Lz the Cholesky
factor of K(Z, Z): whitening keeps the KL term against N(0, I) and makes
conditioning stable when Z moves. The minibatch ELBO is

    (n/b) * sum_i E_{q(f_i)}[log p(y_i | f_i)] - KL(q(v) || N(0, I))

and all gradients (variational parameters, hyperparameters, inducing
locations) are hand-derived reverse-mode products, validated against finite
differences in the test suite.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NonFinite, NotPositiveDefinite, TrainingFailure
from .kernels import (
    GaussianMarginal,
    RbfArdKernel,
    kernel_grad_log_hyper,
    kernel_matrix,
)
from .network import GaussianWeightDist
from .numerics import DEFAULT_JITTER, SeededRng, cholesky, cholesky_backward, solve_triangular
from .optim import make_optimizer
from .training import TrainConfig, default_hyperparams, pretrain_hyperparameters

__all__ = ["SvgpModel", "svgp_predict", "svgp_elbo_and_grads", "SvgpTrainer", "kmeanspp_indices"]


class SvgpModel:
    """Inducing locations, whitened q(u), and prior hyperparameters."""

    def __init__(self, z: np.ndarray, hyper: np.ndarray, whitened: bool = True):
        if not whitened:
            raise ConfigError("only the whitened parameterization is implemented")
        self.z = np.atleast_2d(np.asarray(z, dtype=float)).copy()
        self.hyper = np.asarray(hyper, dtype=float).copy()
        self.whitened = True
        m = self.z.shape[0]
        self.q = GaussianWeightDist(mean=np.zeros(m), structure="full")

    @property
    def n_inducing(self) -> int:
        return self.z.shape[0]

    @property
    def dim(self) -> int:
        return self.z.shape[1]

    @property
    def kernel(self) -> RbfArdKernel:
        d = self.dim
        return RbfArdKernel(log_lengthscales=self.hyper[:d], log_signal_variance=float(self.hyper[d]))

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.hyper[self.dim + 1]))


def _inducing_factor(model: SvgpModel):
    kzz = kernel_matrix(model.kernel, model.z)
    return cholesky(kzz, DEFAULT_JITTER)


def kl_whitened(q: GaussianWeightDist):
    """KL(N(m, L L^T) || N(0, I)) and gradients w.r.t. (m, L)."""
    lmat = q.chol()
    m = q.dim
    log_diag = np.log(np.diag(lmat))
    kl = 0.5 * (np.sum(lmat**2) + float(q.mean @ q.mean) - m) - float(np.sum(log_diag))
    d_mean = q.mean.copy()
    d_l = np.tril(lmat).copy()
    np.fill_diagonal(d_l, np.diag(lmat) - 1.0 / np.diag(lmat))
    return kl, d_mean, d_l


def svgp_predict(model: SvgpModel, points: np.ndarray, full_cov: bool = True):
    """Predictive marginal of the latent function at the given points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lz = _inducing_factor(model)
    kzx = kernel_matrix(model.kernel, model.z, points)
    a = solve_triangular(lz, kzx, side="lower")
    mean = a.T @ model.q.mean
    b = model.q.chol().T @ a
    if full_cov:
        kxx = kernel_matrix(model.kernel, points)
        cov = kxx - a.T @ a + b.T @ b
        return GaussianMarginal(points=points, mean=mean, cov=0.5 * (cov + cov.T))
    var = model.kernel.diag(points) - np.sum(a * a, axis=0) + np.sum(b * b, axis=0)
    return mean, var


def svgp_elbo_and_grads(
    model: SvgpModel,
    batch_x: np.ndarray,
    batch_y: np.ndarray,
    n_total: int,
    train_hypers: bool = False,
    train_z: bool = False,
):
    """Minibatch ELBO and gradients: (elbo, d_qparams, d_hyper, d_z).

    d_hyper / d_z are None unless requested. Gaussian likelihood only.
    """
    batch_x = np.atleast_2d(np.asarray(batch_x, dtype=float))
    batch_y = np.asarray(batch_y, dtype=float).ravel()
    b = batch_y.shape[0]
    scale = n_total / b
    d = model.dim
    s2 = model.noise_variance
    sf2 = model.kernel.signal_variance

    lz = _inducing_factor(model)
    kzx = kernel_matrix(model.kernel, model.z, batch_x)
    a = solve_triangular(lz, kzx, side="lower")
    lv = model.q.chol()
    bmat = lv.T @ a
    mu = a.T @ model.q.mean
    var = model.kernel.diag(batch_x) - np.sum(a * a, axis=0) + np.sum(bmat * bmat, axis=0)
    if np.any(var <= 0):
        raise NonFinite("negative predictive variance in the sparse bound")

    resid = batch_y - mu
    ell = -0.5 * np.log(2.0 * np.pi * s2) - (resid**2 + var) / (2.0 * s2)
    kl, kl_d_mean, kl_d_l = kl_whitened(model.q)
    elbo = scale * float(np.sum(ell)) - kl

    # Reverse pass.
    g_mu = scale * resid / s2
    g_var = np.full(b, -scale / (2.0 * s2))

    d_mean = a @ g_mu - kl_d_mean
    d_b = 2.0 * bmat * g_var[None, :]
    d_l = a @ d_b.T - kl_d_l
    d_l = np.tril(d_l)
    # chol parameters store log-diagonal: chain by L_ii.
    d_cp = d_l.copy()
    np.fill_diagonal(d_cp, np.diag(d_l) * np.diag(lv))
    m = model.n_inducing
    d_qparams = np.concatenate([d_mean, d_cp[np.tril_indices(m)]])

    d_hyper = None
    d_z = None
    if train_hypers or train_z:
        d_a = np.outer(model.q.mean, g_mu) - 2.0 * a * g_var[None, :] + lv @ d_b
        d_kzx = solve_triangular(lz, d_a, side="lower-transpose")
        d_lz = np.tril(-solve_triangular(lz, d_a @ a.T, side="lower-transpose"))
        d_kzz = cholesky_backward(lz.lower, d_lz)
        if train_hypers:
            kzz_mat, kzz_grads = kernel_grad_log_hyper(model.kernel, model.z)
            _, kzx_grads = kernel_grad_log_hyper(model.kernel, model.z, batch_x)
            d_hyper = np.zeros(d + 2)
            for i in range(d + 1):
                d_hyper[i] = float(np.sum(d_kzz * kzz_grads[i])) + float(np.sum(d_kzx * kzx_grads[i]))
            d_hyper[d] += sf2 * float(np.sum(g_var))  # k(x, x) path
            d_hyper[d + 1] = scale * float(np.sum(-0.5 + (resid**2 + var) / (2.0 * s2)))
        if train_z:
            ls2 = model.kernel.lengthscales ** 2
            kzz_mat = kernel_matrix(model.kernel, model.z)
            d_z = np.zeros_like(model.z)
            for dd in range(d):
                diff_zx = model.z[:, dd][:, None] - batch_x[:, dd][None, :]
                d_z[:, dd] += np.sum(d_kzx * kzx * (-diff_zx / ls2[dd]), axis=1)
                diff_zz = model.z[:, dd][:, None] - model.z[:, dd][None, :]
                d_z[:, dd] += 2.0 * np.sum(d_kzz * kzz_mat * (-diff_zz / ls2[dd]), axis=1)
    return elbo, d_qparams, d_hyper, d_z


def kmeanspp_indices(x: np.ndarray, m: int, rng: SeededRng) -> np.ndarray:
    """Greedy D^2-weighted subset selection (k-means++ seeding)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    m = min(m, n)
    chosen = [int(rng.integers(0, n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(m - 1):
        total = float(d2.sum())
        if total <= 0:
            remaining = np.setdiff1d(np.arange(n), chosen)
            chosen.append(int(remaining[int(rng.integers(0, remaining.size))]))
            continue
        r = rng.uniform(0.0, total)
        idx = int(np.searchsorted(np.cumsum(d2), r))
        idx = min(idx, n - 1)
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.asarray(chosen)


class SvgpTrainer:
    """Minibatch ELBO ascent over q(u) (plus hyperparameters / Z by flag)."""

    def __init__(
        self,
        config: TrainConfig,
        train_x,
        train_y,
        n_inducing: int = 100,
        hyper=None,
        train_z: bool = False,
    ):
        config.validate()
        if config.likelihood != "gaussian":
            raise ConfigError("the sparse baseline supports only the gaussian likelihood")
        self.config = config
        self.train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
        self.train_y = np.asarray(train_y, dtype=float).ravel()
        self.n_total = self.train_x.shape[0]
        self.batch_size = min(config.batch_size, self.n_total)
        self.train_z = train_z
        self.train_hypers = config.hyperparam_mode == "online"

        root = SeededRng(config.seed)
        self._rng_batch = root.derive("batch")

        dim = self.train_x.shape[1]
        if hyper is not None:
            hyper = np.asarray(hyper, dtype=float).copy()
        else:
            hyper = default_hyperparams(dim, config)
            if config.hyperparam_mode == "pretrain-then-fix":
                hyper, self.pretrain_trace = pretrain_hyperparameters(
                    self.train_x, self.train_y, config.pretrain_subset,
                    config.pretrain_iterations, config.pretrain_lr,
                    root.derive("pretrain"), hyper,
                )

        idx = kmeanspp_indices(self.train_x, n_inducing, root.derive("inducing"))
        self.model = SvgpModel(z=self.train_x[idx], hyper=hyper)

        self._opt = make_optimizer(
            config.optimizer, config.eta, config.adam_beta1, config.adam_beta2, config.adam_eps
        )
        self._opt_state = self._opt.init_state(self.model.q.n_params)
        self._hyper_opt_state = self._opt.init_state(dim + 2)
        self._z_opt_state = self._opt.init_state(self.model.z.size)
        self.iteration = 0

    def predictive(self, points, full_cov: bool = True):
        return svgp_predict(self.model, points, full_cov=full_cov)

    def elbo(self, batch_x, batch_y) -> float:
        return svgp_elbo_and_grads(self.model, batch_x, batch_y, self.n_total)[0]

    def step(self, batch_x, batch_y) -> float:
        try:
            elbo, d_q, d_hyper, d_z = svgp_elbo_and_grads(
                self.model, batch_x, batch_y, self.n_total,
                train_hypers=self.train_hypers, train_z=self.train_z,
            )
            self._opt_state, new_q = self._opt.step(self._opt_state, self.model.q.params, -d_q)
            self.model.q = self.model.q.with_params(new_q)
            if d_hyper is not None:
                self._hyper_opt_state, self.model.hyper = self._opt.step(
                    self._hyper_opt_state, self.model.hyper, -d_hyper
                )
            if d_z is not None:
                self._z_opt_state, new_z = self._opt.step(
                    self._z_opt_state, self.model.z.ravel(), -d_z.ravel()
                )
                self.model.z = new_z.reshape(self.model.z.shape)
        except (NotPositiveDefinite, NonFinite, np.linalg.LinAlgError) as err:
            raise TrainingFailure(self.iteration, err) from err
        self.iteration += 1
        return elbo

    def sample_batch(self):
        idx = self._rng_batch.choice(self.n_total, size=self.batch_size, replace=False)
        return self.train_x[idx], self.train_y[idx]

    def run(self, callback=None, callback_every: int = 0):
        objective = float("nan")
        for _ in range(self.config.iterations):
            bx, by = self.sample_batch()
            objective = self.step(bx, by)
            if callback is not None and callback_every > 0:
                done = self.iteration
                if done % callback_every == 0 or done == self.config.iterations:
                    callback(self, done, objective)
        return objective
