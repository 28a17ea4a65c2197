"""ARD RBF kernel, Gaussian marginals, and the exact GP regression oracle.

The oracle is dense-only (guarded at N <= 20000) and exists for testing and
for hyperparameter pretraining on subsets; the prior mean is zero everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, NonFinite, NotSymmetric
from .numerics import DEFAULT_JITTER, cholesky, solve_triangular

__all__ = [
    "RbfArdKernel",
    "GaussianMarginal",
    "GpRegressionModel",
    "kernel_matrix",
    "prior_marginal",
    "exact_gp_posterior",
    "log_marginal_likelihood",
    "lml_value_and_grad",
]

MAX_DENSE_POINTS = 20000


@dataclass(frozen=True)
class RbfArdKernel:
    """Squared-exponential kernel with one lengthscale per input dimension.

    k(x, x') = sf2 * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)

    Hyperparameters are stored in log-space so gradient steps are
    unconstrained.
    """

    log_lengthscales: np.ndarray
    log_signal_variance: float = 0.0

    def __post_init__(self):
        ll = np.atleast_1d(np.asarray(self.log_lengthscales, dtype=float))
        object.__setattr__(self, "log_lengthscales", ll)
        if not (np.all(np.isfinite(ll)) and np.isfinite(self.log_signal_variance)):
            raise NonFinite("kernel hyperparameters must be finite")

    @classmethod
    def default(cls, dim: int) -> "RbfArdKernel":
        """Unit lengthscales and unit signal variance."""
        return cls(log_lengthscales=np.zeros(dim), log_signal_variance=0.0)

    @property
    def dim(self) -> int:
        return self.log_lengthscales.shape[0]

    @property
    def lengthscales(self) -> np.ndarray:
        return np.exp(self.log_lengthscales)

    @property
    def signal_variance(self) -> float:
        return float(np.exp(self.log_signal_variance))

    def __call__(self, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
        return kernel_matrix(self, a, b)

    def diag(self, a: np.ndarray) -> np.ndarray:
        a = _check_points(a, self.dim)
        return np.full(a.shape[0], self.signal_variance)


def _check_points(a, dim=None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionMismatch(f"points must be 2-D, got shape {a.shape}")
    if dim is not None and a.shape[1] != dim:
        raise DimensionMismatch(f"points have dim {a.shape[1]}, kernel expects {dim}")
    return a


def _scaled_sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared distances of lengthscale-scaled inputs."""
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    sq = aa + bb - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    return sq


def kernel_matrix(k: RbfArdKernel, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Cross-covariance matrix; symmetric PSD when a is b."""
    a = _check_points(a, k.dim)
    symmetric = b is None
    b = a if symmetric else _check_points(b, k.dim)
    inv_l = 1.0 / k.lengthscales
    sq = _scaled_sqdist(a * inv_l, b * inv_l)
    out = k.signal_variance * np.exp(-0.5 * sq)
    if symmetric:
        out = 0.5 * (out + out.T)
    return out


def kernel_grad_log_hyper(k: RbfArdKernel, a: np.ndarray, b: np.ndarray | None = None):
    """dK/d(log l_d) for each dimension and dK/d(log sf2), as one stacked array.

    Returns (K, grads) with grads[d] = K * (a_d - b_d)^2 / l_d^2 for
    d < dim, and grads[dim] = K (the signal-variance direction).
    """
    a = _check_points(a, k.dim)
    b = a if b is None else _check_points(b, k.dim)
    kmat = kernel_matrix(k, a, b)
    grads = np.empty((k.dim + 1,) + kmat.shape)
    ls = k.lengthscales
    for d in range(k.dim):
        diff = (a[:, d][:, None] - b[:, d][None, :]) / ls[d]
        grads[d] = kmat * diff**2
    grads[k.dim] = kmat
    return kmat, grads


@dataclass(frozen=True)
class GaussianMarginal:
    """Finite-dimensional Gaussian over function values at a fixed point set."""

    points: np.ndarray
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        points = _check_points(self.points)
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.cov, dtype=float)
        m = points.shape[0]
        if mean.shape[0] != m or cov.shape != (m, m):
            raise DimensionMismatch(
                f"marginal over {m} points got mean {mean.shape} cov {cov.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise NonFinite("marginal moments must be finite")
        scale = max(float(np.max(np.abs(cov))), 1.0)
        if float(np.max(np.abs(cov - cov.T))) > 1e-10 * scale:
            raise NotSymmetric("covariance asymmetric beyond 1e-10 relative tolerance")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def subset(self, idx) -> "GaussianMarginal":
        idx = np.asarray(idx)
        return GaussianMarginal(
            points=self.points[idx],
            mean=self.mean[idx],
            cov=self.cov[np.ix_(idx, idx)],
        )

    def variances(self) -> np.ndarray:
        return np.diag(self.cov).copy()


def prior_marginal(kernel: RbfArdKernel, points: np.ndarray) -> GaussianMarginal:
    """Zero-mean prior marginal at the given points."""
    points = _check_points(points, kernel.dim)
    return GaussianMarginal(points=points, mean=np.zeros(points.shape[0]), cov=kernel_matrix(kernel, points))


@dataclass(frozen=True)
class GpRegressionModel:
    """Zero-mean GP regression model: kernel, Gaussian noise, training data."""

    kernel: RbfArdKernel
    log_noise_variance: float
    train_x: np.ndarray
    train_y: np.ndarray

    def __post_init__(self):
        x = _check_points(self.train_x, self.kernel.dim)
        y = np.asarray(self.train_y, dtype=float).ravel()
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{x.shape[0]} inputs vs {y.shape[0]} targets")
        object.__setattr__(self, "train_x", x)
        object.__setattr__(self, "train_y", y)

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.log_noise_variance))

    @property
    def n(self) -> int:
        return self.train_x.shape[0]

    def with_hyperparams(self, vec: np.ndarray) -> "GpRegressionModel":
        """Rebuild with packed [log_l (D), log_sf2, log_noise]."""
        vec = np.asarray(vec, dtype=float).ravel()
        d = self.kernel.dim
        if vec.shape[0] != d + 2:
            raise DimensionMismatch(f"expected {d + 2} hyperparameters, got {vec.shape[0]}")
        kernel = RbfArdKernel(log_lengthscales=vec[:d], log_signal_variance=float(vec[d]))
        return replace(self, kernel=kernel, log_noise_variance=float(vec[d + 1]))

    def hyperparams(self) -> np.ndarray:
        return np.concatenate(
            [self.kernel.log_lengthscales, [self.kernel.log_signal_variance, self.log_noise_variance]]
        )


def exact_gp_posterior(model: GpRegressionModel, test_points: np.ndarray) -> GaussianMarginal:
    """Closed-form GP regression posterior with full covariance over test points.

    mean = K_*D (K_DD + s2 I)^{-1} y
    cov  = K_** - K_*D (K_DD + s2 I)^{-1} K_D*
    """
    test_points = _check_points(test_points, model.kernel.dim)
    if model.n > MAX_DENSE_POINTS:
        raise DimensionMismatch(f"dense oracle guard: N={model.n} exceeds {MAX_DENSE_POINTS}")
    if model.n == 0:
        return prior_marginal(model.kernel, test_points)
    kdd = kernel_matrix(model.kernel, model.train_x)
    ky = kdd + model.noise_variance * np.eye(model.n)
    factor = cholesky(ky, DEFAULT_JITTER)
    kxd = kernel_matrix(model.kernel, test_points, model.train_x)
    kxx = kernel_matrix(model.kernel, test_points)
    alpha = factor.solve(model.train_y)
    mean = kxd @ alpha
    v = solve_triangular(factor, kxd.T, side="lower")
    cov = kxx - v.T @ v
    return GaussianMarginal(points=test_points, mean=mean, cov=0.5 * (cov + cov.T))


def log_marginal_likelihood(model: GpRegressionModel) -> float:
    """log N(y; 0, K_DD + s2 I)."""
    return lml_value_and_grad(model)[0]


def lml_value_and_grad(model: GpRegressionModel):
    """Log marginal likelihood and its gradient w.r.t. [log_l, log_sf2, log_noise].

    Uses d/dtheta = 0.5 tr((aa^T - Ky^{-1}) dKy/dtheta) with a = Ky^{-1} y.
    """
    if model.n > MAX_DENSE_POINTS:
        raise DimensionMismatch(f"dense oracle guard: N={model.n} exceeds {MAX_DENSE_POINTS}")
    kdd, kgrads = kernel_grad_log_hyper(model.kernel, model.train_x)
    s2 = model.noise_variance
    ky = kdd + s2 * np.eye(model.n)
    factor = cholesky(ky, DEFAULT_JITTER)
    alpha = factor.solve(model.train_y)
    value = (
        -0.5 * float(model.train_y @ alpha)
        - 0.5 * factor.log_det()
        - 0.5 * model.n * np.log(2.0 * np.pi)
    )
    ky_inv = factor.inverse()
    w = np.outer(alpha, alpha) - ky_inv
    grad = np.empty(model.kernel.dim + 2)
    for i in range(model.kernel.dim + 1):
        grad[i] = 0.5 * float(np.sum(w * kgrads[i]))
    grad[-1] = 0.5 * s2 * float(np.trace(w))
    return value, grad
