"""Gaussian-output inference networks: f(x) = w^T phi(x), w ~ N(m, V).

Because the output is linear in Gaussian weights, every finite marginal is
exactly Gaussian with mean Phi m and covariance Phi V Phi^T; no sampling is
needed to evaluate moments. V is parameterized by a Cholesky factor whose
diagonal is stored in log-space (full mode) or by per-weight log standard
deviations (diagonal mode).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch
from .features import FeatureMap, RfeFeatureMap
from .kernels import GaussianMarginal
from .numerics import DEFAULT_JITTER, SeededRng, cholesky, cholesky_backward

__all__ = [
    "GaussianWeightDist",
    "InferenceNetwork",
    "save_network",
    "load_network",
]

# Above this feature count a full Cholesky weight covariance gets unwieldy
# (F^2/2 parameters); default to diagonal.
FULL_COV_FEATURE_LIMIT = 512


@dataclass(frozen=True)
class GaussianWeightDist:
    """Gaussian over network weights with PSD-by-construction covariance.

    structure "full": `chol_param` is an F x F array whose strict lower
    triangle is used as-is and whose diagonal stores log(L_ii).
    structure "diagonal": only `log_std` (F,) is stored.
    """

    mean: np.ndarray
    structure: str = "full"
    chol_param: np.ndarray | None = None
    log_std: np.ndarray | None = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        object.__setattr__(self, "mean", mean)
        f = mean.shape[0]
        if self.structure == "full":
            cp = self.chol_param
            cp = np.zeros((f, f)) if cp is None else np.asarray(cp, dtype=float)
            if cp.shape != (f, f):
                raise DimensionMismatch(f"chol_param shape {cp.shape}, expected {(f, f)}")
            object.__setattr__(self, "chol_param", np.tril(cp))
        elif self.structure == "diagonal":
            ls = self.log_std
            ls = np.zeros(f) if ls is None else np.asarray(ls, dtype=float).ravel()
            if ls.shape[0] != f:
                raise DimensionMismatch(f"log_std length {ls.shape[0]}, expected {f}")
            object.__setattr__(self, "log_std", ls)
        else:
            raise ValueError(f"unknown weight-covariance structure {self.structure!r}")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def chol(self) -> np.ndarray:
        """The actual lower-triangular factor L with V = L L^T."""
        if self.structure == "diagonal":
            return np.diag(np.exp(self.log_std))
        low = np.tril(self.chol_param, -1)
        np.fill_diagonal(low, np.exp(np.diag(self.chol_param)))
        return low

    @property
    def n_params(self) -> int:
        if self.structure == "diagonal":
            return 2 * self.dim
        return self.dim + self.dim * (self.dim + 1) // 2

    @property
    def params(self) -> np.ndarray:
        if self.structure == "diagonal":
            return np.concatenate([self.mean, self.log_std])
        f = self.dim
        return np.concatenate([self.mean, self.chol_param[np.tril_indices(f)]])

    def with_params(self, vec: np.ndarray) -> "GaussianWeightDist":
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.shape[0] != self.n_params:
            raise DimensionMismatch(f"expected {self.n_params} weight parameters, got {vec.shape[0]}")
        f = self.dim
        if self.structure == "diagonal":
            return replace(self, mean=vec[:f], log_std=vec[f:])
        cp = np.zeros((f, f))
        cp[np.tril_indices(f)] = vec[f:]
        return replace(self, mean=vec[:f], chol_param=cp)


@dataclass(frozen=True)
class InferenceNetwork:
    """A feature map plus a Gaussian weight distribution.

    The trainable parameter vector is the feature-map parameters followed by
    the weight parameters; `marginal_with_pullback` provides the exact
    reverse-mode product used by every training objective.
    """

    feature_map: FeatureMap
    weights: GaussianWeightDist

    @classmethod
    def initial(cls, feature_map: FeatureMap, structure: str | None = None) -> "InferenceNetwork":
        """Zero mean, identity weight covariance: the network starts at the
        distribution whose induced kernel is the feature map's own."""
        f = feature_map.dim_out
        if structure is None:
            structure = "full" if f <= FULL_COV_FEATURE_LIMIT else "diagonal"
        return cls(feature_map=feature_map, weights=GaussianWeightDist(mean=np.zeros(f), structure=structure))

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.feature_map.params, self.weights.params])

    @property
    def n_params(self) -> int:
        return self.feature_map.params.shape[0] + self.weights.n_params

    def with_params(self, vec: np.ndarray) -> "InferenceNetwork":
        vec = np.asarray(vec, dtype=float).ravel()
        n_fm = self.feature_map.params.shape[0]
        if vec.shape[0] != n_fm + self.weights.n_params:
            raise DimensionMismatch(f"expected {n_fm + self.weights.n_params} parameters, got {vec.shape[0]}")
        return InferenceNetwork(
            feature_map=self.feature_map.with_params(vec[:n_fm]),
            weights=self.weights.with_params(vec[n_fm:]),
        )

    def marginal(self, points: np.ndarray) -> GaussianMarginal:
        """Exact Gaussian marginal at the given points: N(Phi m, (Phi L)(Phi L)^T)."""
        phi = self.feature_map.evaluate(points)
        return self._marginal_from_phi(points, phi)

    def _marginal_from_phi(self, points, phi) -> GaussianMarginal:
        mean = phi @ self.weights.mean
        if self.weights.structure == "diagonal":
            a = phi * np.exp(self.weights.log_std)[None, :]
        else:
            a = phi @ self.weights.chol()
        cov = a @ a.T
        return GaussianMarginal(points=points, mean=mean, cov=0.5 * (cov + cov.T))

    def marginal_diag(self, points: np.ndarray):
        """Per-point means and variances without forming the full covariance."""
        phi = self.feature_map.evaluate(points)
        mean = phi @ self.weights.mean
        if self.weights.structure == "diagonal":
            a = phi * np.exp(self.weights.log_std)[None, :]
        else:
            a = phi @ self.weights.chol()
        return mean, np.sum(a * a, axis=1)

    def marginal_with_pullback(self, points: np.ndarray):
        """Marginal plus a closure mapping (dL/dmean, dL/dcov) to dL/dparams.

        dL/dcov is interpreted entrywise (no symmetry factor); callers pass
        the symmetric gradient of their scalar objective.
        """
        phi, fm_pullback = self.feature_map.evaluate_with_pullback(points)
        w = self.weights
        mean = phi @ w.mean
        if w.structure == "diagonal":
            std = np.exp(w.log_std)
            a = phi * std[None, :]
        else:
            lmat = w.chol()
            a = phi @ lmat
        cov = a @ a.T
        marginal = GaussianMarginal(points=points, mean=mean, cov=0.5 * (cov + cov.T))

        def pullback(d_mean: np.ndarray, d_cov: np.ndarray | None = None) -> np.ndarray:
            d_mean = np.zeros(mean.shape[0]) if d_mean is None else np.asarray(d_mean, dtype=float)
            d_phi = np.outer(d_mean, w.mean)
            d_w_mean = phi.T @ d_mean
            if d_cov is None:
                d_a = None
            else:
                d_a = (d_cov + d_cov.T) @ a
            if w.structure == "diagonal":
                if d_a is None:
                    d_log_std = np.zeros(w.dim)
                else:
                    d_phi += d_a * std[None, :]
                    d_log_std = np.sum(d_a * phi, axis=0) * std
                d_weights = np.concatenate([d_w_mean, d_log_std])
            else:
                if d_a is None:
                    d_cp = np.zeros((w.dim, w.dim))
                else:
                    d_phi += d_a @ lmat.T
                    d_l = np.tril(phi.T @ d_a)
                    d_cp = d_l.copy()
                    np.fill_diagonal(d_cp, np.diag(d_l) * np.diag(lmat))
                d_weights = np.concatenate([d_w_mean, d_cp[np.tril_indices(w.dim)]])
            return np.concatenate([fm_pullback(d_phi), d_weights])

        return marginal, pullback

    def sample(self, points: np.ndarray, rng: SeededRng, n: int) -> np.ndarray:
        """n function draws at the points, via the marginal's Cholesky factor."""
        marginal = self.marginal(points)
        factor = cholesky(marginal.cov, DEFAULT_JITTER)
        eps = rng.standard_normal((n, marginal.size))
        return marginal.mean[None, :] + eps @ factor.lower.T

    def sample_with_pullback(self, points: np.ndarray, rng: SeededRng, n: int):
        """Reparameterized draws plus a closure mapping dL/dsamples to dL/dparams.

        Samples are mean + L_c eps with L_c the (jittered) marginal Cholesky
        factor, so gradients flow through both moments.
        """
        marginal, pullback = self.marginal_with_pullback(points)
        factor = cholesky(marginal.cov, DEFAULT_JITTER)
        eps = rng.standard_normal((n, marginal.size))
        samples = marginal.mean[None, :] + eps @ factor.lower.T

        def sample_pullback(d_samples: np.ndarray) -> np.ndarray:
            d_samples = np.asarray(d_samples, dtype=float)
            d_mean = d_samples.sum(axis=0)
            d_chol = np.tril(d_samples.T @ eps)
            d_cov = cholesky_backward(factor.lower, d_chol)
            return pullback(d_mean, d_cov)

        return samples, sample_pullback


_CHECKPOINT_VERSION = 1


def save_network(path, net: InferenceNetwork) -> None:
    """Serialize parameters plus feature-map metadata; bit-exact round trip."""
    fm = net.feature_map
    if not isinstance(fm, RfeFeatureMap):
        raise TypeError(f"cannot checkpoint feature map of type {type(fm).__name__}")
    np.savez(
        path,
        version=_CHECKPOINT_VERSION,
        feature_kind="rfe",
        n_frequencies=fm.n_frequencies,
        dim_in=fm.dim_in,
        frequency_seed=fm.frequency_seed,
        train_raw_frequencies=int(fm.train_raw_frequencies),
        train_amplitude=int(fm.train_amplitude),
        log_lengthscales=fm.log_lengthscales,
        log_amplitude=fm.log_amplitude,
        weight_structure=net.weights.structure,
        params=net.params,
    )


def load_network(path) -> InferenceNetwork:
    with np.load(Path(path), allow_pickle=False) as data:
        version = int(data["version"])
        if version != _CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        if str(data["feature_kind"]) != "rfe":
            raise ValueError(f"unsupported feature kind {data['feature_kind']}")
        fm = RfeFeatureMap.create(
            dim=int(data["dim_in"]),
            n_frequencies=int(data["n_frequencies"]),
            seed=int(data["frequency_seed"]),
            log_lengthscales=np.asarray(data["log_lengthscales"], dtype=float),
            log_amplitude=float(data["log_amplitude"]),
            train_raw_frequencies=bool(int(data["train_raw_frequencies"])),
            train_amplitude=bool(int(data["train_amplitude"])),
        )
        net = InferenceNetwork.initial(fm, structure=str(data["weight_structure"]))
        return net.with_params(np.asarray(data["params"], dtype=float))
