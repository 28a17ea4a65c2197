"""One step of the bootstrapped functional mirror-descent filter.

The step blends the zero-mean GP prior with the network's current marginal
using tempering weight beta (precisions combine as beta*K^-1 +
(1-beta)*Sigma^-1), conditions the blend on the minibatch targets with
inflated noise sigma2 * b / (n_total * beta), and matches the network to the
result: in the conjugate (Gaussian-likelihood) case by the closed-form KL,
otherwise by a Monte-Carlo surrogate over the joint distribution at
measurement plus batch points.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from .errors import BetaOutOfRange, DimensionMismatch, NonFinite
from .kernels import GaussianMarginal, RbfArdKernel, prior_marginal
from .network import InferenceNetwork
from .numerics import (
    DEFAULT_JITTER,
    SeededRng,
    cholesky,
    cholesky_backward,
    solve_triangular,
)

__all__ = [
    "FilterTarget",
    "Likelihood",
    "GaussianLikelihood",
    "BernoulliLogitLikelihood",
    "blend_prior_network",
    "condition_joint_on_batch",
    "regression_filter_target",
    "kl_gaussian",
    "kl_gaussian_with_grads",
    "nonconjugate_loss",
]


@dataclass(frozen=True)
class FilterTarget:
    """The Gaussian a single filter step asks the network to match."""

    marginal: GaussianMarginal
    beta: float
    effective_noise: float


class Likelihood(abc.ABC):
    """Elementwise observation model log p(y | f)."""

    kind: str

    @abc.abstractmethod
    def log_prob(self, y: np.ndarray, f: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def dlog_prob_df(self, y: np.ndarray, f: np.ndarray) -> np.ndarray: ...


class GaussianLikelihood(Likelihood):
    kind = "gaussian"

    def __init__(self, sigma2: float):
        if not sigma2 > 0:
            raise ValueError("noise variance must be positive")
        self.sigma2 = float(sigma2)

    def log_prob(self, y, f):
        return -0.5 * np.log(2.0 * np.pi * self.sigma2) - 0.5 * (y - f) ** 2 / self.sigma2

    def dlog_prob_df(self, y, f):
        return (y - f) / self.sigma2


class BernoulliLogitLikelihood(Likelihood):
    """Binary targets in {0, 1}; p(y=1 | f) = sigmoid(f)."""

    kind = "bernoulli-logit"

    def log_prob(self, y, f):
        return y * f - np.logaddexp(0.0, f)

    def dlog_prob_df(self, y, f):
        return y - 1.0 / (1.0 + np.exp(-f))


def _check_same_points(a: GaussianMarginal, b: GaussianMarginal):
    if a.points.shape != b.points.shape or float(np.max(np.abs(a.points - b.points))) > 1e-12:
        raise DimensionMismatch("marginals are over different point sets")


def blend_prior_network(prior: GaussianMarginal, net: GaussianMarginal, beta: float) -> GaussianMarginal:
    """Tempered Gaussian product prior^beta * net^(1-beta), renormalized.

    Precisions combine linearly: Lam = beta*K^-1 + (1-beta)*Sigma^-1; the
    blended mean is Lam^-1 (1-beta) Sigma^-1 mu. All inversions route
    through Cholesky solves.
    """
    _check_same_points(prior, net)
    if not 0.0 <= beta <= 1.0:
        raise BetaOutOfRange(f"beta={beta} outside [0, 1]")
    if float(np.max(np.abs(prior.mean))) > 0.0:
        raise ValueError("blend expects a zero-mean prior marginal")
    # The exponent collapses at the endpoints; skip the double inversion.
    if beta == 1.0:
        return prior
    if beta == 0.0:
        return net
    k_factor = cholesky(prior.cov, DEFAULT_JITTER)
    s_factor = cholesky(net.cov, DEFAULT_JITTER)
    k_prec = k_factor.inverse()
    s_prec = s_factor.inverse()
    lam = beta * k_prec + (1.0 - beta) * s_prec
    lam = 0.5 * (lam + lam.T)
    lam_factor = cholesky(lam, DEFAULT_JITTER)
    cov = lam_factor.inverse()
    mean = lam_factor.solve((1.0 - beta) * (s_prec @ net.mean))
    return GaussianMarginal(points=prior.points, mean=mean, cov=0.5 * (cov + cov.T))


def condition_joint_on_batch(joint: GaussianMarginal, y_batch: np.ndarray, noise_var: float) -> GaussianMarginal:
    """Condition a joint Gaussian on noisy observations of its trailing coords.

    The batch occupies the last b coordinates; the returned Gaussian still
    covers all coordinates.
    """
    y_batch = np.asarray(y_batch, dtype=float).ravel()
    b = y_batch.shape[0]
    if b < 1 or b > joint.size:
        raise DimensionMismatch(f"batch of {b} targets against joint of size {joint.size}")
    sl = slice(joint.size - b, joint.size)
    kbb = joint.cov[sl, sl] + noise_var * np.eye(b)
    factor = cholesky(kbb, DEFAULT_JITTER)
    kab = joint.cov[:, sl]
    alpha = factor.solve(y_batch - joint.mean[sl])
    mean = joint.mean + kab @ alpha
    v = solve_triangular(factor, kab.T, side="lower")
    cov = joint.cov - v.T @ v
    return GaussianMarginal(points=joint.points, mean=mean, cov=0.5 * (cov + cov.T))


def regression_filter_target(
    blended_joint: GaussianMarginal,
    y_batch: np.ndarray,
    sigma2: float,
    n_total: int,
    beta: float,
) -> FilterTarget:
    """Closed-form filter step for the Gaussian likelihood.

    The tempered minibatch likelihood acts as a GP regression observation
    with per-point noise sigma2 * b / (n_total * beta); conditioning the
    blended joint on it and keeping the leading (measurement) block gives
    the target the network is matched against.
    """
    if not 0.0 < beta <= 1.0:
        raise BetaOutOfRange(f"beta={beta} outside (0, 1]")
    y_batch = np.asarray(y_batch, dtype=float).ravel()
    b = y_batch.shape[0]
    if b < 1 or b >= blended_joint.size:
        raise DimensionMismatch(
            f"joint of size {blended_joint.size} must cover measurement points plus batch of {b}"
        )
    effective_noise = sigma2 * b / (n_total * beta)
    conditioned = condition_joint_on_batch(blended_joint, y_batch, effective_noise)
    n_measure = blended_joint.size - b
    marginal = conditioned.subset(np.arange(n_measure))
    return FilterTarget(marginal=marginal, beta=beta, effective_noise=effective_noise)


def kl_gaussian(q: GaussianMarginal, p: GaussianMarginal) -> float:
    return kl_gaussian_with_grads(q, p)[0]


def kl_gaussian_with_grads(q: GaussianMarginal, p: GaussianMarginal):
    """KL(q || p) between Gaussians on the same points, with moment gradients.

    Returns (kl, d_kl/d_mean_q, d_kl/d_cov_q); the covariance gradient is
    entrywise and symmetric. Both covariances receive the standard jitter
    policy before factorization so the log-determinants stay defined for
    rank-deficient network covariances.
    """
    _check_same_points(q, p)
    m = q.size
    p_factor = cholesky(p.cov, DEFAULT_JITTER)
    q_factor = cholesky(q.cov, DEFAULT_JITTER)
    half = solve_triangular(p_factor, q_factor.lower, side="lower")
    trace_term = float(np.sum(half * half))
    diff = p.mean - q.mean
    alpha = p_factor.solve(diff)
    quad = float(diff @ alpha)
    kl = 0.5 * (trace_term + quad - m + p_factor.log_det() - q_factor.log_det())
    d_mean_q = -alpha
    d_cov_q = 0.5 * (p_factor.inverse() - q_factor.inverse())
    return kl, d_mean_q, d_cov_q


def _cross_entropy_with_grads(q_mean, q_cov, p: GaussianMarginal, p_factor):
    """E_q[log p] for Gaussian p, with gradients w.r.t. q's moments."""
    m = q_mean.shape[0]
    half = solve_triangular(p_factor, cholesky(q_cov, DEFAULT_JITTER).lower, side="lower")
    trace_term = float(np.sum(half * half))
    diff = q_mean - p.mean
    alpha = p_factor.solve(diff)
    value = -0.5 * (m * np.log(2.0 * np.pi) + p_factor.log_det() + trace_term + float(diff @ alpha))
    p_prec = p_factor.inverse()
    return value, -alpha, -0.5 * p_prec


def nonconjugate_loss(
    net: InferenceNetwork,
    frozen: InferenceNetwork,
    prior_kernel: RbfArdKernel,
    x_measure: np.ndarray,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    likelihood: Likelihood,
    beta: float,
    n_total: int,
    mc_samples: int,
    rng: SeededRng,
):
    """Surrogate filter objective for arbitrary likelihoods, as a minimization.

    The maximization target is

        (n/b) * beta * E[sum_i log p(y_i|f_i)]  (reparameterized Monte Carlo)
      + beta * E[log prior] + (1-beta) * E[log q_frozen] - E[log q]

    with all Gaussian expectations in closed form under the network's joint
    marginal at [x_measure; x_batch]. Returns (-objective, gradient of
    -objective w.r.t. the network parameters).
    """
    if not 0.0 <= beta <= 1.0:
        raise BetaOutOfRange(f"beta={beta} outside [0, 1]")
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    x_measure = np.atleast_2d(np.asarray(x_measure, dtype=float))
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=float))
    y_batch = np.asarray(y_batch, dtype=float).ravel()
    b = y_batch.shape[0]
    points = np.vstack([x_measure, x_batch])
    n_points = points.shape[0]

    q, pullback = net.marginal_with_pullback(points)
    q_frozen = frozen.marginal(points)
    prior = prior_marginal(prior_kernel, points)

    prior_factor = cholesky(prior.cov, DEFAULT_JITTER)
    frozen_factor = cholesky(q_frozen.cov, DEFAULT_JITTER)
    q_factor = cholesky(q.cov, DEFAULT_JITTER)

    ce_prior, d_mu_prior, d_cov_prior = _cross_entropy_with_grads(q.mean, q.cov, prior, prior_factor)
    ce_frozen, d_mu_frozen, d_cov_frozen = _cross_entropy_with_grads(q.mean, q.cov, q_frozen, frozen_factor)
    # -E_q[log q] is the entropy of the (jittered) joint.
    entropy = 0.5 * (n_points * np.log(2.0 * np.pi * np.e) + q_factor.log_det())
    d_cov_entropy = 0.5 * q_factor.inverse()

    # Reparameterized likelihood expectation at the batch coordinates.
    eps = rng.standard_normal((mc_samples, n_points))
    samples = q.mean[None, :] + eps @ q_factor.lower.T
    f_batch = samples[:, n_points - b :]
    ll = likelihood.log_prob(y_batch[None, :], f_batch)
    mc_term = float(np.sum(ll)) / mc_samples
    g = likelihood.dlog_prob_df(y_batch[None, :], f_batch) / mc_samples
    d_samples = np.zeros_like(samples)
    d_samples[:, n_points - b :] = g

    like_scale = (n_total / b) * beta
    objective = like_scale * mc_term + beta * ce_prior + (1.0 - beta) * ce_frozen + entropy
    if not np.isfinite(objective):
        raise NonFinite("filter surrogate objective is non-finite")

    d_mean = like_scale * d_samples.sum(axis=0) + beta * d_mu_prior + (1.0 - beta) * d_mu_frozen
    d_chol = np.tril(d_samples.T @ eps) * like_scale
    d_cov = (
        cholesky_backward(q_factor.lower, d_chol)
        + beta * d_cov_prior
        + (1.0 - beta) * d_cov_frozen
        + d_cov_entropy
    )
    grad = pullback(-d_mean, -d_cov)
    return -objective, grad
