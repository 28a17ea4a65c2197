"""Dense linear algebra, Gaussian sampling, seeded randomness, gradient checks.

Every covariance inversion in the package routes through `cholesky` and the
triangular solves below; explicit matrix inverses of non-triangular matrices
are deliberately absent.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular as _solve_triangular

from .errors import DimensionMismatch, NonFinite, NotPositiveDefinite, NotSymmetric

__all__ = [
    "JitterPolicy",
    "CholeskyFactor",
    "SeededRng",
    "cholesky",
    "solve_triangular",
    "mvn_sample",
    "grad_check",
    "cholesky_backward",
]


@dataclass(frozen=True)
class JitterPolicy:
    """Diagonal-jitter escalation used when factorizing near-singular matrices.

    The escalation sequence is {0, eps, eps*growth, ...} with
    eps = initial_scale * mean(diag); `max_attempts` entries are tried in
    total before giving up.
    """

    initial_scale: float = 1e-8
    growth: float = 10.0
    max_attempts: int = 5

    def sequence(self, matrix: np.ndarray) -> list[float]:
        scale = float(np.mean(np.diag(matrix)))
        if not scale > 0.0:
            scale = 1.0
        eps = self.initial_scale * scale
        out = [0.0]
        for k in range(self.max_attempts - 1):
            out.append(eps * self.growth**k)
        return out


DEFAULT_JITTER = JitterPolicy()

# Jitter escalation disabled: a single attempt with zero jitter.
NO_JITTER = JitterPolicy(initial_scale=0.0, growth=1.0, max_attempts=1)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with L @ L.T = A + jitter_used * I."""

    lower: np.ndarray
    jitter_used: float = 0.0

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve (L L^T) x = b via two triangular solves."""
        y = solve_triangular(self, b, side="lower")
        return solve_triangular(self, y, side="lower-transpose")

    def inverse(self) -> np.ndarray:
        """(L L^T)^{-1}, computed by solving against the identity."""
        return self.solve(np.eye(self.dim))

    def log_det(self) -> float:
        """log det(L L^T) = 2 * sum(log diag L)."""
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))


def _as_matrix(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{name} contains non-finite entries")
    return a


def cholesky(a: np.ndarray, policy: JitterPolicy = DEFAULT_JITTER) -> CholeskyFactor:
    """Factor a symmetric matrix, escalating diagonal jitter on failure.

    Raises NotSymmetric if max|A - A^T| exceeds 1e-10 relative to max|A|,
    NonFinite on NaN/inf entries, and NotPositiveDefinite once the jitter
    escalation is exhausted.
    """
    a = _as_matrix(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {a.shape}")
    scale = max(float(np.max(np.abs(a))), 1.0)
    asym = float(np.max(np.abs(a - a.T)))
    if asym > 1e-10 * scale:
        raise NotSymmetric(f"asymmetry {asym:.3e} exceeds tolerance {1e-10 * scale:.3e}")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    eye = np.eye(n)
    last_err = None
    for jitter in policy.sequence(a):
        try:
            lower = np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError as err:
            last_err = err
            continue
        return CholeskyFactor(lower=lower, jitter_used=jitter)
    raise NotPositiveDefinite(
        f"factorization failed after {policy.max_attempts} jitter attempts ({last_err})"
    )


def solve_triangular(l: CholeskyFactor | np.ndarray, b: np.ndarray, side: str = "lower") -> np.ndarray:
    """Forward/back substitution against the lower factor or its transpose.

    side: "lower" solves L x = b; "lower-transpose" solves L^T x = b.
    """
    lower = l.lower if isinstance(l, CholeskyFactor) else np.asarray(l, dtype=float)
    b = np.asarray(b, dtype=float)
    if lower.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"factor dim {lower.shape[0]} vs rhs dim {b.shape[0]}")
    if side == "lower":
        return _solve_triangular(lower, b, lower=True)
    if side == "lower-transpose":
        return _solve_triangular(lower, b, lower=True, trans="T")
    raise ValueError(f"unknown side {side!r}")


def mvn_sample(mean: np.ndarray, cov_chol: CholeskyFactor | np.ndarray, rng: "SeededRng", n: int) -> np.ndarray:
    """Draw n rows of mean + L @ eps with eps ~ N(0, I)."""
    mean = np.asarray(mean, dtype=float).ravel()
    lower = cov_chol.lower if isinstance(cov_chol, CholeskyFactor) else np.asarray(cov_chol, dtype=float)
    if lower.shape[0] != mean.shape[0]:
        raise DimensionMismatch(f"mean dim {mean.shape[0]} vs factor dim {lower.shape[0]}")
    eps = rng.generator.standard_normal((n, mean.shape[0]))
    return mean[None, :] + eps @ lower.T


def grad_check(f, grad, point: np.ndarray, step: float = 1e-5) -> float:
    """Max relative error between an analytic gradient and central differences.

    Per-coordinate error is |g_a - g_fd| / (|g_a| + |g_fd| + 1e-8).
    """
    point = np.asarray(point, dtype=float).ravel()
    g_analytic = np.asarray(grad(point), dtype=float).ravel()
    g_fd = np.empty_like(point)
    for i in range(point.size):
        up = point.copy()
        dn = point.copy()
        up[i] += step
        dn[i] -= step
        f_up, f_dn = f(up), f(dn)
        if not (np.isfinite(f_up) and np.isfinite(f_dn)):
            raise NonFinite(f"objective non-finite near coordinate {i}")
        g_fd[i] = (f_up - f_dn) / (2.0 * step)
    if not np.all(np.isfinite(g_analytic)):
        raise NonFinite("analytic gradient contains non-finite entries")
    err = np.abs(g_analytic - g_fd) / (np.abs(g_analytic) + np.abs(g_fd) + 1e-8)
    return float(np.max(err)) if err.size else 0.0


def cholesky_backward(lower: np.ndarray, grad_lower: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. L = chol(A) back to a symmetric gradient w.r.t. A."""
    middle = np.tril(lower.T @ grad_lower)
    idx = np.diag_indices_from(middle)
    middle[idx] *= 0.5
    linv = _solve_triangular(lower, np.eye(lower.shape[0]), lower=True)
    grad_a = linv.T @ middle @ linv
    return 0.5 * (grad_a + grad_a.T)


def _hash_tag(seed: int, tag) -> int:
    digest = hashlib.blake2s(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class SeededRng:
    """Deterministic random stream: identical seed, identical stream.

    Backed by a named generator (PCG64). `derive` produces an independent
    child stream keyed by a string tag, so subsystems never share state.
    """

    seed: int
    algorithm: str = "pcg64"
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.algorithm != "pcg64":
            raise ValueError(f"unknown rng algorithm {self.algorithm!r}")
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def derive(self, tag) -> "SeededRng":
        return SeededRng(seed=_hash_tag(self.seed, tag), algorithm=self.algorithm)

    # Thin passthroughs for the handful of draws used in this package.
    def standard_normal(self, shape):
        return self.generator.standard_normal(shape)

    def uniform(self, low, high, size=None):
        return self.generator.uniform(low, high, size=size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def choice(self, n, size, replace=False):
        return self.generator.choice(n, size=size, replace=replace)

    def permutation(self, n):
        return self.generator.permutation(n)
