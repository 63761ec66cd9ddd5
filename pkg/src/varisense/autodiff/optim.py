"""Parameter update rules: SGD with momentum and Adam.

Both optimizers clear gradients after applying an update; a step with any
missing gradient is rejected so silent no-op updates cannot happen.
"""
from __future__ import annotations

import numpy as np

from .tensor import Tensor


class SgdMomentum:
    kind = "sgd-momentum"

    def __init__(self, params: list[Tensor], lr: float, momentum: float = 0.9):
        self.params = list(params)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ValueError(f"optimizer step with missing gradient on param {i}")
        for p, v in zip(self.params, self.velocity):
            v *= self.momentum
            v += p.grad
            p.data -= self.lr * v
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


class Adam:
    kind = "adam"

    def __init__(self, params: list[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ValueError(f"optimizer step with missing gradient on param {i}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
