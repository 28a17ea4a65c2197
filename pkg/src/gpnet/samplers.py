"""Measurement-point samplers: the distribution c(x) of Algorithm inputs.

Three kinds are supported: uniform over a per-dimension box, draws from the
empirical training distribution, and the training distribution convolved
with the prior kernel (training rows plus Gaussian noise whose per-dimension
standard deviation is a multiplier times the prior lengthscale).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GpnetError
from .numerics import SeededRng

__all__ = ["MeasurementSampler", "build_sampler"]

SAMPLER_KINDS = ("uniform-box", "empirical-train", "train-convolved")

# Measurement points this close to a batch point make the joint covariance
# singular beyond jitter repair; they get resampled.
DUPLICATE_DISTANCE = 1e-9


@dataclass(frozen=True)
class MeasurementSampler:
    kind: str
    train_x: np.ndarray | None = None
    box_lo: np.ndarray | None = None
    box_hi: np.ndarray | None = None
    noise_std: np.ndarray | None = None  # per-dimension, for train-convolved

    def _draw(self, rng: SeededRng, m: int) -> np.ndarray:
        if self.kind == "uniform-box":
            d = self.box_lo.shape[0]
            return rng.uniform(0.0, 1.0, size=(m, d)) * (self.box_hi - self.box_lo) + self.box_lo
        if self.kind == "empirical-train":
            idx = rng.integers(0, self.train_x.shape[0], size=m)
            return self.train_x[idx].copy()
        if self.kind == "train-convolved":
            idx = rng.integers(0, self.train_x.shape[0], size=m)
            noise = rng.standard_normal((m, self.train_x.shape[1])) * self.noise_std[None, :]
            return self.train_x[idx] + noise
        raise GpnetError(f"unknown sampler kind {self.kind!r}")

    def sample(self, rng: SeededRng, m: int, avoid: np.ndarray | None = None) -> np.ndarray:
        """Draw m points, resampling any that collide with `avoid` rows."""
        points = self._draw(rng, m)
        if avoid is None or avoid.size == 0:
            return points
        avoid = np.atleast_2d(np.asarray(avoid, dtype=float))
        for _ in range(200):
            d2 = np.min(
                np.sum((points[:, None, :] - avoid[None, :, :]) ** 2, axis=2), axis=1
            )
            bad = d2 < DUPLICATE_DISTANCE**2
            if not np.any(bad):
                return points
            points[bad] = self._draw(rng, int(np.sum(bad)))
        raise GpnetError("could not sample measurement points distinct from the batch")


def build_sampler(
    kind: str,
    train_x: np.ndarray,
    lengthscales: np.ndarray | None = None,
    box: tuple | None = None,
    scale: float = 1.0,
    margin: float = 0.0,
) -> MeasurementSampler:
    """Construct a sampler, deriving defaults from the training inputs.

    uniform-box defaults to the per-dimension data range, widened by
    `margin` times the range so test regions at the edges stay covered;
    train-convolved needs the prior lengthscales.
    """
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    if kind == "uniform-box":
        if box is None:
            lo, hi = train_x.min(axis=0), train_x.max(axis=0)
        else:
            lo = np.broadcast_to(np.asarray(box[0], dtype=float), (train_x.shape[1],)).copy()
            hi = np.broadcast_to(np.asarray(box[1], dtype=float), (train_x.shape[1],)).copy()
        if margin > 0.0:
            width = hi - lo
            lo, hi = lo - margin * width, hi + margin * width
        return MeasurementSampler(kind=kind, box_lo=lo, box_hi=hi)
    if kind == "empirical-train":
        return MeasurementSampler(kind=kind, train_x=train_x)
    if kind == "train-convolved":
        if lengthscales is None:
            raise GpnetError("train-convolved sampler needs prior lengthscales")
        noise_std = scale * np.broadcast_to(
            np.asarray(lengthscales, dtype=float), (train_x.shape[1],)
        )
        return MeasurementSampler(kind=kind, train_x=train_x, noise_std=noise_std.copy())
    raise GpnetError(f"unknown sampler kind {kind!r}; expected one of {SAMPLER_KINDS}")
