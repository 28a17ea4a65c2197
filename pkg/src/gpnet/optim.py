"""Minimization-convention optimizers with explicit, immutable state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["AdamState", "Adam", "Sgd", "make_optimizer"]


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class Adam:
    """Adaptive-moment estimation with bias correction."""

    lr: float = 0.003
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def init_state(self, n: int) -> AdamState:
        return AdamState(m=np.zeros(n), v=np.zeros(n), t=0)

    def step(self, state: AdamState, params: np.ndarray, grad: np.ndarray):
        t = state.t + 1
        m = self.beta1 * state.m + (1.0 - self.beta1) * grad
        v = self.beta2 * state.v + (1.0 - self.beta2) * grad**2
        m_hat = m / (1.0 - self.beta1**t)
        v_hat = v / (1.0 - self.beta2**t)
        new_params = params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return AdamState(m=m, v=v, t=t), new_params


@dataclass(frozen=True)
class Sgd:
    lr: float = 0.003

    def init_state(self, n: int) -> int:
        return 0

    def step(self, state: int, params: np.ndarray, grad: np.ndarray):
        return state + 1, params - self.lr * grad


def make_optimizer(kind: str, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
    if kind == "adam":
        return Adam(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    if kind == "sgd":
        return Sgd(lr=lr)
    raise ValueError(f"unknown optimizer {kind!r}")
