"""Feature maps for linear-in-Gaussian-weights inference networks.

The shipped instance is a random-feature expansion of the ARD RBF kernel:
cosine/sine features at random frequencies whose inner products approximate
the kernel. Frequencies are stored as fixed standard-normal draws divided by
trainable lengthscales (so a prior-matched initialization is exact in
distribution); training the frequencies directly is available behind a flag.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch
from .numerics import SeededRng

__all__ = ["FeatureMap", "RfeFeatureMap", "rfe_kernel_estimate"]


class FeatureMap(abc.ABC):
    """Deterministic map x -> phi(x) with a trainable parameter vector.

    Implementations must supply exact reverse-mode products: given the
    gradient of a scalar loss w.r.t. the feature matrix, return the gradient
    w.r.t. the parameter vector.
    """

    dim_in: int
    dim_out: int

    @property
    @abc.abstractmethod
    def params(self) -> np.ndarray: ...

    @abc.abstractmethod
    def with_params(self, vec: np.ndarray) -> "FeatureMap": ...

    @abc.abstractmethod
    def evaluate(self, points: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def evaluate_with_pullback(self, points: np.ndarray): ...


def _check_points(points, dim) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[1] != dim:
        raise DimensionMismatch(f"points shape {points.shape} incompatible with input dim {dim}")
    return points


@dataclass(frozen=True)
class RfeFeatureMap(FeatureMap):
    """Random-feature expansion: phi(x) = (a/sqrt(Mf)) [cos(Sx), sin(Sx)].

    S has rows s_m = z_m / l (elementwise), with z_m fixed standard-normal
    draws. ||phi(x)||^2 = a^2 for every x, so the induced kernel estimate at
    zero distance is exactly a^2. With a^2 and l matching an ARD RBF kernel,
    phi(x)^T phi(x') converges to that kernel as Mf grows.
    """

    base_frequencies: np.ndarray
    log_lengthscales: np.ndarray
    log_amplitude: float = 0.0
    train_raw_frequencies: bool = False
    # The amplitude direction is redundant with the weight scale (a*phi with
    # weights m equals phi with weights a*m); training it invites a see-saw
    # drift, so it can be pinned.
    train_amplitude: bool = True
    frequency_seed: int = 0
    # In raw mode the trained frequencies; None means "derive from base/l".
    raw_frequencies: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "base_frequencies", np.asarray(self.base_frequencies, dtype=float))
        object.__setattr__(
            self, "log_lengthscales", np.atleast_1d(np.asarray(self.log_lengthscales, dtype=float))
        )
        if self.train_raw_frequencies and self.raw_frequencies is None:
            object.__setattr__(self, "raw_frequencies", self.frequencies.copy())

    @classmethod
    def create(
        cls,
        dim: int,
        n_frequencies: int,
        seed: int,
        log_lengthscales: np.ndarray | None = None,
        log_amplitude: float = 0.0,
        train_raw_frequencies: bool = False,
        train_amplitude: bool = True,
    ) -> "RfeFeatureMap":
        base = SeededRng(seed).standard_normal((n_frequencies, dim))
        if log_lengthscales is None:
            log_lengthscales = np.zeros(dim)
        return cls(
            base_frequencies=base,
            log_lengthscales=np.asarray(log_lengthscales, dtype=float),
            log_amplitude=float(log_amplitude),
            train_raw_frequencies=train_raw_frequencies,
            train_amplitude=train_amplitude,
            frequency_seed=seed,
        )

    @property
    def n_frequencies(self) -> int:
        return self.base_frequencies.shape[0]

    @property
    def dim_in(self) -> int:
        return self.base_frequencies.shape[1]

    @property
    def dim_out(self) -> int:
        return 2 * self.n_frequencies

    @property
    def amplitude(self) -> float:
        return float(np.exp(self.log_amplitude))

    @property
    def frequencies(self) -> np.ndarray:
        if self.train_raw_frequencies and self.raw_frequencies is not None:
            return self.raw_frequencies
        return self.base_frequencies / np.exp(self.log_lengthscales)[None, :]

    @property
    def params(self) -> np.ndarray:
        if self.train_raw_frequencies:
            head = self.frequencies.ravel()
        else:
            head = self.log_lengthscales
        if self.train_amplitude:
            return np.concatenate([head, [self.log_amplitude]])
        return np.asarray(head, dtype=float).copy()

    def with_params(self, vec: np.ndarray) -> "RfeFeatureMap":
        vec = np.asarray(vec, dtype=float).ravel()
        n_head = self.n_frequencies * self.dim_in if self.train_raw_frequencies else self.dim_in
        want = n_head + (1 if self.train_amplitude else 0)
        if vec.shape[0] != want:
            raise DimensionMismatch(f"expected {want} feature parameters, got {vec.shape[0]}")
        log_amp = float(vec[-1]) if self.train_amplitude else self.log_amplitude
        head = vec[:n_head]
        if self.train_raw_frequencies:
            return replace(
                self, raw_frequencies=head.reshape(self.n_frequencies, self.dim_in), log_amplitude=log_amp
            )
        return replace(self, log_lengthscales=head, log_amplitude=log_amp)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = _check_points(points, self.dim_in)
        t = points @ self.frequencies.T
        scale = self.amplitude / np.sqrt(self.n_frequencies)
        return scale * np.concatenate([np.cos(t), np.sin(t)], axis=1)

    def evaluate_with_pullback(self, points: np.ndarray):
        """Feature matrix plus a closure mapping dL/dPhi to dL/dparams."""
        points = _check_points(points, self.dim_in)
        freqs = self.frequencies
        t = points @ freqs.T
        cos_t, sin_t = np.cos(t), np.sin(t)
        scale = self.amplitude / np.sqrt(self.n_frequencies)
        phi = scale * np.concatenate([cos_t, sin_t], axis=1)
        mf = self.n_frequencies

        def pullback(d_phi: np.ndarray) -> np.ndarray:
            d_t = scale * (-sin_t * d_phi[:, :mf] + cos_t * d_phi[:, mf:])
            d_freqs = d_t.T @ points
            if self.train_raw_frequencies:
                head = d_freqs.ravel()
            else:
                head = -np.sum(d_freqs * freqs, axis=0)
            if self.train_amplitude:
                return np.concatenate([head, [float(np.sum(d_phi * phi))]])
            return head

        return phi, pullback


def rfe_kernel_estimate(fmap: RfeFeatureMap, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Phi(a) Phi(b)^T, the feature-space kernel estimate."""
    phi_a = fmap.evaluate(a)
    phi_b = phi_a if b is None else fmap.evaluate(b)
    return phi_a @ phi_b.T
